#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmc/grid.hpp"
#include "pmc/protocol.hpp"
#include "pmc/rng.hpp"

namespace pmc {

// ---------------------------------------------------------------------------
// Extended nonnegative values

enum class InfinityReason {
    none,
    lambda_shape,
    lambda_mass,
    lambda_continuity,
    lambda_support,
    lambda_sign,
    zero_rate_flow, // Phi(q,0) with q > 0
};

/// Value in [0, +infty]. Infinity is an explicit tag carrying the failed
/// admissibility item, never a floating-point overflow.
struct RateValue {
    double value = 0.0;
    bool is_finite = true;
    InfinityReason reason = InfinityReason::none;
    std::string detail;

    static RateValue finite(double v) { return {v, true, InfinityReason::none, {}}; }
    static RateValue infinite(InfinityReason r, std::string d = {}) {
        return {0.0, false, r, std::move(d)};
    }
};

inline InfinityReason reason_from_item(LambdaItem item) {
    switch (item) {
    case LambdaItem::shape: return InfinityReason::lambda_shape;
    case LambdaItem::mass: return InfinityReason::lambda_mass;
    case LambdaItem::continuity: return InfinityReason::lambda_continuity;
    case LambdaItem::support: return InfinityReason::lambda_support;
    case LambdaItem::sign: return InfinityReason::lambda_sign;
    default: return InfinityReason::none;
    }
}

// ---------------------------------------------------------------------------
// Scalar cost functions

namespace detail {

inline double snap_zero(double v, double tol) { return v < tol ? 0.0 : v; }

/// Three-branch Phi with 0 log 0 = 0; infinite branch signalled by the flag.
struct ScalarCost {
    double value = 0.0;
    bool finite = true;
};

inline ScalarCost phi_branches(double q, double p) {
    if (q == 0.0) return {p, true};
    if (p == 0.0) return {0.0, false};
    return {q * std::log(q / p) - (q - p), true};
}

inline double arcsinh(double x) {
    // log(x + sqrt(x^2+1)), evaluated on |x| to avoid cancellation
    double ax = std::abs(x);
    double v = std::log(ax + std::sqrt(ax * ax + 1.0));
    return x < 0.0 ? -v : v;
}

inline ScalarCost psi_branches(double u, double ubar, double a) {
    if (a == 0.0) return phi_branches(std::abs(u), std::abs(ubar));
    double v = u * (arcsinh(u / a) - arcsinh(ubar / a)) -
               (std::sqrt(a * a + u * u) - std::sqrt(a * a + ubar * ubar));
    return {v, true};
}

} // namespace detail

/// Poisson large-deviation cost Phi(q,p) = q log(q/p) - (q-p), with
/// Phi(0,p)=p and Phi(q,0)=+infty for q>0. Inputs below tol_zero are snapped
/// to zero before branching.
inline RateValue phi_fn(double q, double p, double tol_zero = tol_zero_default) {
    auto r = detail::phi_branches(detail::snap_zero(q, tol_zero), detail::snap_zero(p, tol_zero));
    if (!r.finite) return RateValue::infinite(InfinityReason::zero_rate_flow, "Phi(q,0) with q>0");
    return RateValue::finite(r.value);
}

/// Current-level cost Psi(u, ubar; a): arcsinh form for a>0, Phi(|u|,|ubar|)
/// at a=0.
inline RateValue psi_fn(double u, double ubar, double a) {
    auto r = detail::psi_branches(u, ubar, a);
    if (!r.finite) return RateValue::infinite(InfinityReason::zero_rate_flow, "Psi at a=0 with ubar=0");
    return RateValue::finite(r.value);
}

// ---------------------------------------------------------------------------
// Level 2.5 rate functional for (mu, Q)

namespace detail {

/// Bin-sum quadrature of the Phi integrand; membership is NOT checked here.
inline ScalarCost rate_quadrature(const Graph& g, const RateProtocol& p,
                                  const PeriodicDensity& mu, const PeriodicFlow& q,
                                  double tol_zero) {
    const double delta = p.bin_width();
    double acc = 0.0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        StateId y = g.edges()[e].first;
        for (std::size_t k = 0; k < q.bins; ++k) {
            double qv = snap_zero(q.at(e, k), tol_zero);
            double mv = snap_zero(mu.at(y, k), tol_zero);
            auto c = phi_branches(qv, mv * p.rate(e, k));
            if (!c.finite) return {0.0, false};
            acc += c.value;
        }
    }
    return {acc * delta, true};
}

} // namespace detail

/// I(mu,Q): +infinity with the failed item if (mu,Q) is not admissible,
/// otherwise the bin-sum of the Phi costs (exact quadrature for the
/// piecewise-constant data model).
inline RateValue rate_I(const RateProtocol& p, const PeriodicDensity& mu, const PeriodicFlow& q,
                        const MembershipTolerances& tol = {}) {
    auto rep = lambda_membership(p.graph(), mu, q, tol);
    if (!rep.member)
        return RateValue::infinite(reason_from_item(rep.first_failed),
                                   rep.violations.empty() ? "" : rep.violations.front());
    auto c = detail::rate_quadrature(p.graph(), p, mu, q, tol.zero);
    if (!c.finite)
        return RateValue::infinite(InfinityReason::zero_rate_flow, "Phi(q,0) with q>0");
    return RateValue::finite(c.value);
}

// ---------------------------------------------------------------------------
// Currents: minimal realizing flow and the contracted functional

/// Q^{J,mu}(y,z) = [J + sqrt(J^2 + 4 mu(y) mu(z) r(y,z) r(z,y))]/2 per edge;
/// on one-way edges this reduces to max(J,0).
inline PeriodicFlow q_from_current(const RateProtocol& p, const PeriodicDensity& mu,
                                   const PeriodicCurrent& j) {
    const Graph& g = p.graph();
    PeriodicFlow q(mu.period, mu.bins, g.num_edges());
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        std::size_t s = g.sym_pair_index(y, z);
        std::size_t erev = g.edge_index(z, y);
        for (std::size_t k = 0; k < mu.bins; ++k) {
            double jv = (y < z) ? j.at(s, k) : -j.at(s, k);
            double rrev = (erev == Graph::npos) ? 0.0 : p.rate(erev, k);
            double prod = 4.0 * mu.at(y, k) * mu.at(z, k) * p.rate(e, k) * rrev;
            double val = 0.5 * (jv + std::sqrt(jv * jv + std::max(prod, 0.0)));
            q.at(e, k) = std::max(val, 0.0);
        }
    }
    return q;
}

struct CurrentRateResult {
    RateValue value;      // the Phi-form evaluation (public value)
    double phi_form = 0.0;
    double psi_form = 0.0;
    double mismatch = 0.0; // |phi_form - psi_form|
    PeriodicFlow minimal_flow;
};

/// I-hat(mu,J), evaluated along both algebraic routes: through the minimal
/// realizing flow (Phi form) and through the arcsinh cost on symmetrized
/// edges (Psi form). The two are equal in exact arithmetic; the mismatch
/// field reports the numerical gap.
inline CurrentRateResult rate_I_hat(const RateProtocol& p, const PeriodicDensity& mu,
                                    const PeriodicCurrent& j,
                                    const MembershipTolerances& tol = {}) {
    const Graph& g = p.graph();
    CurrentRateResult out;
    auto rep = lambda_a_membership(g, mu, j, tol);
    if (!rep.member) {
        out.value = RateValue::infinite(reason_from_item(rep.first_failed),
                                        rep.violations.empty() ? "" : rep.violations.front());
        return out;
    }
    out.minimal_flow = q_from_current(p, mu, j);
    auto phi = detail::rate_quadrature(g, p, mu, out.minimal_flow, tol.zero);

    const double delta = p.bin_width();
    double psi = 0.0;
    bool psi_finite = true;
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [lo, hi] = g.sym_pairs()[s];
        const StateId ends[2][2] = {{lo, hi}, {hi, lo}};
        for (const auto& dir : ends) {
            StateId y = dir[0], z = dir[1];
            for (std::size_t k = 0; k < mu.bins; ++k) {
                double jv = (y < z) ? j.at(s, k) : -j.at(s, k);
                double ryz = p.rate(y, z, k), rzy = p.rate(z, y, k);
                double my = detail::snap_zero(mu.at(y, k), tol.zero);
                double mz = detail::snap_zero(mu.at(z, k), tol.zero);
                double jmu = my * ryz - mz * rzy;
                double a = 2.0 * std::sqrt(std::max(my * mz * ryz * rzy, 0.0));
                auto c = detail::psi_branches(jv, jmu, a);
                if (!c.finite) {
                    psi_finite = false;
                    break;
                }
                psi += 0.5 * c.value;
            }
            if (!psi_finite) break;
        }
        if (!psi_finite) break;
    }
    psi *= delta;

    if (!phi.finite || !psi_finite) {
        out.value = RateValue::infinite(InfinityReason::zero_rate_flow,
                                        "cost infinite on a zero-rate entry");
        return out;
    }
    out.phi_form = phi.value;
    out.psi_form = psi;
    out.mismatch = std::abs(phi.value - psi);
    out.value = RateValue::finite(phi.value);
    return out;
}

/// Independent brute-force construction of the minimal realizing flow:
/// per symmetrized pair and bin, a 1-D minimization of
/// Phi(j+ + s, mu(y) r(y,z)) + Phi(j- + s, mu(z) r(z,y)) over s >= 0.
/// Golden section brackets the minimum; because value comparisons of the
/// flat objective bottom out at sqrt(eps), the bracket is then polished by
/// sign bisection of the (monotone) derivative down to 1e-12 and below.
inline PeriodicFlow minimal_flow_oracle(const RateProtocol& p, const PeriodicDensity& mu,
                                        const PeriodicCurrent& j) {
    const Graph& g = p.graph();
    PeriodicFlow q(mu.period, mu.bins, g.num_edges());
    const double invphi = 0.6180339887498949;
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [y, z] = g.sym_pairs()[s];
        std::size_t ef = g.edge_index(y, z), eb = g.edge_index(z, y);
        for (std::size_t k = 0; k < mu.bins; ++k) {
            double jv = j.at(s, k); // oriented y->z
            double jp = std::max(jv, 0.0), jm = std::max(-jv, 0.0);
            if (ef == Graph::npos) { // only z->y exists
                q.at(eb, k) = jm;
                continue;
            }
            if (eb == Graph::npos) { // only y->z exists
                q.at(ef, k) = jp;
                continue;
            }
            double p1 = mu.at(y, k) * p.rate(ef, k);
            double p2 = mu.at(z, k) * p.rate(eb, k);
            double sstar = 0.0;
            if (p1 > 0.0 && p2 > 0.0) {
                auto cost = [&](double sv) {
                    return detail::phi_branches(jp + sv, p1).value +
                           detail::phi_branches(jm + sv, p2).value;
                };
                double lo = 0.0, hi = std::sqrt(p1 * p2) + std::abs(jv) + 1.0;
                const double hi0 = hi;
                double x1 = hi - invphi * (hi - lo);
                double x2 = lo + invphi * (hi - lo);
                double f1 = cost(x1), f2 = cost(x2);
                while (hi - lo > 1e-6 * (1.0 + hi0)) {
                    if (f1 < f2) {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - invphi * (hi - lo);
                        f1 = cost(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + invphi * (hi - lo);
                        f2 = cost(x2);
                    }
                }
                // derivative of the bracket: log((j+ + s)(j- + s)/(p1 p2)),
                // increasing; -inf at s = 0 because min(j+, j-) = 0
                auto slope = [&](double sv) {
                    return std::log(jp + sv) + std::log(jm + sv) - std::log(p1) - std::log(p2);
                };
                lo = std::max(lo - (hi - lo), 0.0);
                hi = std::min(hi + (hi - lo), hi0);
                if (slope(hi) <= 0.0) {
                    sstar = hi;
                } else {
                    while (hi - lo > 1e-13 * (1.0 + hi)) {
                        double mid = 0.5 * (lo + hi);
                        if (mid <= lo || mid >= hi) break;
                        (slope(mid) < 0.0 ? lo : hi) = mid;
                    }
                    sstar = 0.5 * (lo + hi);
                }
            }
            q.at(ef, k) = jp + sstar;
            q.at(eb, k) = jm + sstar;
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// Tilted functional and its variational use

/// Discrete test pair: phi holds node values at bin boundaries (piecewise
/// linear in time), F is constant per bin.
struct TestFunctionPair {
    std::vector<std::vector<double>> phi; // [state][bin boundary]
    std::vector<std::vector<double>> F;   // [edge][bin]
};

inline TestFunctionPair zero_test_pair(const Graph& g, std::size_t bins) {
    TestFunctionPair tf;
    tf.phi.assign(g.num_states(), std::vector<double>(bins, 0.0));
    tf.F.assign(g.num_edges(), std::vector<double>(bins, 0.0));
    return tf;
}

inline constexpr double tilt_clamp_default = 40.0;

/// I_{phi,F}(mu,Q) = -mu(d_t phi) + div Q(phi) + Q(F) - mu(r^F - r),
/// discretized so that the phi terms pair the node value at boundary k+1
/// with the forward continuity residual of bin k. For any admissible pair
/// the phi part vanishes with the residual and sup over F recovers the Phi
/// cost gridpointwise.
inline double tilted_rate(const RateProtocol& p, const PeriodicDensity& mu,
                          const PeriodicFlow& q, const TestFunctionPair& tf) {
    const Graph& g = p.graph();
    const std::size_t m = mu.bins;
    const double delta = p.bin_width();

    double pairing = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        auto div = divergence_column(g, q, k);
        std::size_t kn = (k + 1) % m;
        for (std::size_t y = 0; y < g.num_states(); ++y)
            pairing += tf.phi[y][kn] * ((mu.at(y, kn) - mu.at(y, k)) + delta * div[y]);
    }

    double qf = 0.0, mu_term = 0.0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        StateId y = g.edges()[e].first;
        for (std::size_t k = 0; k < m; ++k) {
            double f = std::min(std::max(tf.F[e][k], -500.0), 500.0);
            qf += q.at(e, k) * f;
            mu_term += mu.at(y, k) * p.rate(e, k) * std::expm1(f);
        }
    }
    return pairing + delta * (qf - mu_term);
}

/// Near-optimal tilt from the Legendre structure: F = log(Q/(mu r)) clamped
/// to +-fmax, with F = -fmax where the flow vanishes; phi = 0.
inline TestFunctionPair analytic_test_pair(const RateProtocol& p, const PeriodicDensity& mu,
                                           const PeriodicFlow& q,
                                           double fmax = tilt_clamp_default,
                                           double tol_zero = tol_zero_default) {
    const Graph& g = p.graph();
    TestFunctionPair tf = zero_test_pair(g, mu.bins);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        StateId y = g.edges()[e].first;
        for (std::size_t k = 0; k < mu.bins; ++k) {
            double qv = detail::snap_zero(q.at(e, k), tol_zero);
            double pv = detail::snap_zero(mu.at(y, k), tol_zero) * p.rate(e, k);
            double f;
            if (qv == 0.0)
                f = -fmax;
            else if (pv == 0.0)
                f = fmax;
            else
                f = std::min(std::max(std::log(qv / pv), -fmax), fmax);
            tf.F[e][k] = f;
        }
    }
    return tf;
}

struct VariationalBound {
    double best = 0.0;     // sup over all tried pairs
    double analytic = 0.0; // value at the analytic near-optimizer
};

/// Lower bound on I(mu,Q) from the sup representation: the analytic tilt
/// plus `trials` random (phi,F) pairs drawn from a seeded generator.
inline VariationalBound variational_lower_bound(const RateProtocol& p, const PeriodicDensity& mu,
                                                const PeriodicFlow& q, std::size_t trials,
                                                std::uint64_t seed = 12345) {
    const Graph& g = p.graph();
    VariationalBound out;
    out.analytic = tilted_rate(p, mu, q, analytic_test_pair(p, mu, q));
    out.best = out.analytic;
    Rng rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        TestFunctionPair tf = zero_test_pair(g, mu.bins);
        for (auto& row : tf.phi)
            for (auto& v : row) v = 2.0 * rng.uniform() - 1.0;
        for (auto& row : tf.F)
            for (auto& v : row) v = 2.0 * (2.0 * rng.uniform() - 1.0);
        out.best = std::max(out.best, tilted_rate(p, mu, q, tf));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Time reversal at the level of (mu, Q) and (mu, J)

/// theta mu_t = mu_{T0-t}, theta Q_t(y,z) = Q_{T0-t}(z,y); bin reflection
/// k -> M-1-k plus edge transposition. Involution, bit exact.
inline std::pair<PeriodicDensity, PeriodicFlow> theta_reverse(const Graph& g,
                                                              const PeriodicDensity& mu,
                                                              const PeriodicFlow& q) {
    if (!g.is_symmetric())
        throw std::invalid_argument("theta_reverse: requires E = E_s");
    const std::size_t m = mu.bins;
    PeriodicDensity mu_r(mu.period, m, mu.num_states());
    PeriodicFlow q_r(q.period, m, q.num_edges());
    for (std::size_t y = 0; y < mu.num_states(); ++y)
        for (std::size_t k = 0; k < m; ++k) mu_r.values[y][k] = mu.at(y, m - 1 - k);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        std::size_t erev = g.edge_index(z, y);
        for (std::size_t k = 0; k < m; ++k) q_r.at(e, k) = q.at(erev, m - 1 - k);
    }
    return {std::move(mu_r), std::move(q_r)};
}

/// theta J_t(y,z) = -J_{T0-t}(y,z) on the oriented pair storage.
inline std::pair<PeriodicDensity, PeriodicCurrent> theta_reverse_current(
    const PeriodicDensity& mu, const PeriodicCurrent& j) {
    const std::size_t m = mu.bins;
    PeriodicDensity mu_r(mu.period, m, mu.num_states());
    PeriodicCurrent j_r(j.period, m, j.num_pairs());
    for (std::size_t y = 0; y < mu.num_states(); ++y)
        for (std::size_t k = 0; k < m; ++k) mu_r.values[y][k] = mu.at(y, m - 1 - k);
    for (std::size_t s = 0; s < j.num_pairs(); ++s)
        for (std::size_t k = 0; k < m; ++k) j_r.at(s, k) = -j.at(s, m - 1 - k);
    return {std::move(mu_r), std::move(j_r)};
}

} // namespace pmc
