#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pmc/grid.hpp"
#include "pmc/ldp.hpp"
#include "pmc/steady.hpp"

namespace pmc {

/// Naive-reversal entropy functional: the backward chain runs the same rates
/// against reflected time, so both a jump term and a time-integral term
/// survive. Time reflection maps bin k to bin M-1-k.
inline double s_naive(const RateProtocol& p, const PeriodicDensity& mu, const PeriodicFlow& q) {
    const Graph& g = p.graph();
    if (!g.is_symmetric()) throw std::invalid_argument("s_naive: requires E = E_s");
    const std::size_t m = p.bins();
    const double delta = p.bin_width();
    double jump = 0.0, dwell = 0.0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        std::size_t erev = g.edge_index(z, y);
        for (std::size_t k = 0; k < m; ++k)
            jump += q.at(e, k) * std::log(p.rate(e, k) / p.rate(erev, m - 1 - k));
    }
    for (StateId y = 0; y < g.num_states(); ++y)
        for (std::size_t k = 0; k < m; ++k)
            dwell += mu.at(y, k) * (p.exit_rate(y, k) - p.exit_rate(y, m - 1 - k));
    return delta * (jump - dwell);
}

/// Total entropy functional (reversed protocol): no mu dependence.
inline double s_tot(const RateProtocol& p, const PeriodicFlow& q) {
    const Graph& g = p.graph();
    if (!g.is_symmetric()) throw std::invalid_argument("s_tot: requires E = E_s");
    const double delta = p.bin_width();
    double acc = 0.0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        std::size_t erev = g.edge_index(z, y);
        for (std::size_t k = 0; k < p.bins(); ++k)
            acc += q.at(e, k) * std::log(p.rate(e, k) / p.rate(erev, k));
    }
    return delta * acc;
}

/// Current form of the total entropy: (1/2) sum_E int J log(r/r~), equal to
/// s_tot(Q) whenever J is the antisymmetrization of Q.
inline double s_tot_current(const RateProtocol& p, const PeriodicCurrent& j) {
    const Graph& g = p.graph();
    if (!g.is_symmetric()) throw std::invalid_argument("s_tot_current: requires E = E_s");
    const double delta = p.bin_width();
    double acc = 0.0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        std::size_t erev = g.edge_index(z, y);
        std::size_t s = g.sym_pair_index(y, z);
        for (std::size_t k = 0; k < p.bins(); ++k) {
            double jv = (y < z) ? j.at(s, k) : -j.at(s, k);
            acc += 0.5 * jv * std::log(p.rate(e, k) / p.rate(erev, k));
        }
    }
    return delta * acc;
}

/// Excess entropy functional: -sum_y int mu(y,ds) d_s log w_s(y), with the
/// time derivative taken as the periodic forward difference of log w.
inline double s_ex(const RateProtocol& p, const PeriodicDensity& mu, const PeriodicDensity& w) {
    if (mu.bins != p.bins() || w.bins != mu.bins || w.num_states() != mu.num_states() ||
        mu.num_states() != p.graph().num_states())
        throw std::invalid_argument("s_ex: grid does not match the protocol");
    const std::size_t m = mu.bins;
    double acc = 0.0;
    for (std::size_t y = 0; y < mu.num_states(); ++y)
        for (std::size_t k = 0; k < m; ++k)
            acc -= mu.at(y, k) * (std::log(w.at(y, (k + 1) % m)) - std::log(w.at(y, k)));
    return acc;
}

inline double s_ex(const RateProtocol& p, const PeriodicDensity& mu) {
    return s_ex(p, mu, accompanying_distribution(p));
}

// ---------------------------------------------------------------------------
// Gallavotti-Cohen duality residuals

enum class GcRelation { uva1, uva2, uva3, luci1, luci2 };

inline std::string to_string(GcRelation r) {
    switch (r) {
    case GcRelation::uva1: return "uva1";
    case GcRelation::uva2: return "uva2";
    case GcRelation::uva3: return "uva3";
    case GcRelation::luci1: return "luci1";
    case GcRelation::luci2: return "luci2";
    }
    return "?";
}

struct GCReport {
    GcRelation relation = GcRelation::uva1;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    std::string inputs; // short provenance note
};

/// Flow relations: both sides evaluated by independent code paths. The left
/// side reruns the full rate functional on the theta-reversed pair against
/// the transformed protocol; the right side is the forward functional plus
/// the matching entropy term.
inline GCReport gc_check(GcRelation rel, const RateProtocol& p, const PeriodicDensity& mu,
                         const PeriodicFlow& q, const MembershipTolerances& tol = {},
                         std::string inputs = {}) {
    const Graph& g = p.graph();
    if (!g.is_symmetric()) throw std::invalid_argument("gc_check: requires E = E_s");
    auto rep = lambda_membership(g, mu, q, tol);
    if (!rep.member)
        throw std::invalid_argument("gc_check: input pair not admissible: " +
                                    (rep.violations.empty() ? std::string{} : rep.violations[0]));

    auto [mu_r, q_r] = theta_reverse(g, mu, q);
    RateValue fwd = rate_I(p, mu, q, tol);
    RateValue lhs;
    double entropy_term = 0.0;
    switch (rel) {
    case GcRelation::uva1:
        lhs = rate_I(p, mu_r, q_r, tol);
        entropy_term = s_naive(p, mu, q);
        break;
    case GcRelation::uva2:
        lhs = rate_I(reversed_protocol(p), mu_r, q_r, tol);
        entropy_term = s_tot(p, q);
        break;
    case GcRelation::uva3: {
        PeriodicDensity w = accompanying_distribution(p);
        lhs = rate_I(dual_reversed_protocol(p, w), mu_r, q_r, tol);
        entropy_term = s_ex(p, mu, w);
        break;
    }
    default:
        throw std::invalid_argument("gc_check: flow overload handles uva relations only");
    }
    if (!lhs.is_finite || !fwd.is_finite)
        throw std::runtime_error("gc_check: rate functional infinite on admissible input (" +
                                 lhs.detail + fwd.detail + ")");
    GCReport rep_out;
    rep_out.relation = rel;
    rep_out.lhs = lhs.value;
    rep_out.rhs = fwd.value + entropy_term;
    rep_out.residual = std::abs(rep_out.lhs - rep_out.rhs);
    rep_out.inputs = std::move(inputs);
    return rep_out;
}

/// Current relations: residual of I-hat(theta) - I-hat = entropy term.
inline GCReport gc_check(GcRelation rel, const RateProtocol& p, const PeriodicDensity& mu,
                         const PeriodicCurrent& j, const MembershipTolerances& tol = {},
                         std::string inputs = {}) {
    const Graph& g = p.graph();
    if (!g.is_symmetric()) throw std::invalid_argument("gc_check: requires E = E_s");
    auto rep = lambda_a_membership(g, mu, j, tol);
    if (!rep.member)
        throw std::invalid_argument("gc_check: input pair not admissible: " +
                                    (rep.violations.empty() ? std::string{} : rep.violations[0]));

    auto [mu_r, j_r] = theta_reverse_current(mu, j);
    CurrentRateResult fwd = rate_I_hat(p, mu, j, tol);
    CurrentRateResult rev;
    double entropy_term = 0.0;
    switch (rel) {
    case GcRelation::luci1:
        rev = rate_I_hat(reversed_protocol(p), mu_r, j_r, tol);
        entropy_term = s_tot_current(p, j);
        break;
    case GcRelation::luci2: {
        PeriodicDensity w = accompanying_distribution(p);
        rev = rate_I_hat(dual_reversed_protocol(p, w), mu_r, j_r, tol);
        entropy_term = s_ex(p, mu, w);
        break;
    }
    default:
        throw std::invalid_argument("gc_check: current overload handles luci relations only");
    }
    if (!rev.value.is_finite || !fwd.value.is_finite)
        throw std::runtime_error("gc_check: rate functional infinite on admissible input");
    GCReport rep_out;
    rep_out.relation = rel;
    rep_out.lhs = rev.value.value;
    rep_out.rhs = fwd.value.value + entropy_term;
    rep_out.residual = std::abs(rep_out.lhs - rep_out.rhs);
    rep_out.inputs = std::move(inputs);
    return rep_out;
}

} // namespace pmc
