#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pmc/grid.hpp"
#include "pmc/ldp.hpp"
#include "pmc/linalg.hpp"
#include "pmc/steady.hpp"

namespace pmc {

struct OptimizerSettings {
    std::size_t max_outer = 40;
    std::size_t max_inner = 4000;
    double penalty_init = 10.0;
    double penalty_growth = 10.0;
    double penalty_max = 1e8;
    double tol_objective = 1e-10;
    double tol_constraint = 1e-8;
    double floor = 1e-10; // interior floor on mu and Q during optimization
};

/// Time-averaged targets for the contraction of the level 2.5 functional.
/// An empty target vector drops that family of constraints (e.g. empty
/// bar_mu contracts onto the flow alone).
struct ContractionProblem {
    RateProtocol protocol;
    std::vector<double> bar_mu; // probability vector on states, or empty
    std::vector<double> bar_q;  // nonnegative per edge, or empty
    OptimizerSettings settings;
};

struct ContractResult {
    RateValue value;          // integral over the period (not divided by T0)
    RateValue value_snapped;  // same objective with sub-floor entries snapped to 0
    PeriodicDensity mu;
    PeriodicFlow q;
    double constraint_residual = 0.0;
    bool converged = false;
    std::size_t outer_iters = 0;
    std::size_t inner_iters = 0;
};

namespace detail {

/// Euclidean projection onto { x >= floor, sum x = 1 }.
inline void project_simplex_floor(std::vector<double>& x, double floor) {
    const std::size_t n = x.size();
    double budget = 1.0 - floor * static_cast<double>(n);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - floor;
    std::vector<double> u = z;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cum += u[i];
        double t = (cum - budget) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            rho = i + 1;
            theta = t;
        }
    }
    (void)rho;
    for (std::size_t i = 0; i < n; ++i) x[i] = std::max(z[i] - theta, 0.0) + floor;
}

} // namespace detail

/// Divergence of a static edge vector.
inline std::vector<double> static_divergence(const Graph& g, const std::vector<double>& q_bar) {
    std::vector<double> div(g.num_states(), 0.0);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        div[y] += q_bar[e];
        div[z] -= q_bar[e];
    }
    return div;
}

/// Removes the divergence of a static target flow by a spanning-tree
/// correction. Time averages of gridded flows pick up O(1/M^2)
/// discretization dust; only divergence-free targets are feasible, so
/// callers building targets from gridded data should pass them through
/// here. Requires E = E_s so corrections can flow either way.
inline std::vector<double> repair_divergence(const Graph& g, std::vector<double> q_bar) {
    if (!g.is_symmetric())
        throw std::invalid_argument("repair_divergence: requires E = E_s");
    // leaf-to-root sweep over a BFS spanning tree of the support
    std::vector<StateId> parent(g.num_states(), Graph::npos);
    std::vector<StateId> order{0};
    parent[0] = 0;
    for (std::size_t head = 0; head < order.size(); ++head)
        for (const auto& [a, b] : g.sym_pairs()) {
            StateId y = order[head], other = Graph::npos;
            if (a == y) other = b;
            if (b == y) other = a;
            if (other != Graph::npos && parent[other] == Graph::npos) {
                parent[other] = y;
                order.push_back(other);
            }
        }
    auto div = static_divergence(g, q_bar);
    for (std::size_t i = order.size(); i-- > 1;) {
        StateId y = order[i], par = parent[y];
        double f = -div[y];
        if (f >= 0.0)
            q_bar[g.edge_index(y, par)] += f;
        else
            q_bar[g.edge_index(par, y)] += -f;
        div[par] -= f;
        div[y] = 0.0;
    }
    return q_bar;
}

/// Constrained minimization of the period integral of the Phi cost over
/// periodic (mu, Q) whose time averages match the targets. Augmented
/// Lagrangian on the linear constraints (continuity, bin mass, target
/// means) with a floored projected-Newton inner solve; the constraint
/// matrix is fixed, so A^T A is assembled once. The objective is jointly
/// convex, so the method converges to the global optimum of the discretized
/// problem. Infeasible targets (div bar_q != 0) give +infinity.
inline ContractResult contract(const ContractionProblem& prob) {
    const RateProtocol& p = prob.protocol;
    const Graph& g = p.graph();
    const std::size_t V = g.num_states(), E = g.num_edges(), M = p.bins();
    const double delta = p.bin_width();
    const double inv_m = 1.0 / static_cast<double>(M);
    const OptimizerSettings& st = prob.settings;

    const bool with_mu = !prob.bar_mu.empty();
    const bool with_q = !prob.bar_q.empty();
    if ((with_mu && prob.bar_mu.size() != V) || (with_q && prob.bar_q.size() != E))
        throw std::invalid_argument("contract: target size mismatch");
    if (with_mu) {
        double mass = std::accumulate(prob.bar_mu.begin(), prob.bar_mu.end(), 0.0);
        if (std::abs(mass - 1.0) > 1e-9)
            throw std::invalid_argument("contract: bar_mu must be a probability vector");
    }

    ContractResult res;
    if (with_q) {
        auto div_bar = static_divergence(g, prob.bar_q);
        for (double d : div_bar)
            if (std::abs(d) > 1e-10) {
                res.value = RateValue::infinite(InfinityReason::lambda_continuity,
                                                "div of target flow is nonzero");
                res.value_snapped = res.value;
                return res;
            }
    }

    // variable layout: mu(y,k) -> y*M + k, q(e,k) -> V*M + e*M + k
    const std::size_t n_mu = V * M, n = n_mu + E * M;
    auto idx_mu = [&](std::size_t y, std::size_t k) { return y * M + k; };
    auto idx_q = [&](std::size_t e, std::size_t k) { return n_mu + e * M + k; };

    // constraint rows as sparse (column, coefficient) lists:
    //   continuity per (state, bin), in density units;
    //   unit mass per bin; target means when requested
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;
    for (std::size_t y = 0; y < V; ++y)
        for (std::size_t k = 0; k < M; ++k) {
            std::vector<std::pair<std::size_t, double>> r;
            r.emplace_back(idx_mu(y, (k + 1) % M), 1.0);
            r.emplace_back(idx_mu(y, k), -1.0);
            for (std::size_t e : g.out_edges(y)) r.emplace_back(idx_q(e, k), delta);
            for (std::size_t e : g.in_edges(y)) r.emplace_back(idx_q(e, k), -delta);
            rows.push_back(std::move(r));
        }
    for (std::size_t k = 0; k < M; ++k) {
        std::vector<std::pair<std::size_t, double>> r;
        for (std::size_t y = 0; y < V; ++y) r.emplace_back(idx_mu(y, k), 1.0);
        rows.push_back(std::move(r));
    }
    std::vector<double> targets(rows.size(), 0.0);
    for (std::size_t k = 0; k < M; ++k) targets[V * M + k] = 1.0;
    if (with_mu)
        for (std::size_t y = 0; y < V; ++y) {
            std::vector<std::pair<std::size_t, double>> r;
            for (std::size_t k = 0; k < M; ++k) r.emplace_back(idx_mu(y, k), inv_m);
            rows.push_back(std::move(r));
            targets.push_back(prob.bar_mu[y]);
        }
    if (with_q)
        for (std::size_t e = 0; e < E; ++e) {
            std::vector<std::pair<std::size_t, double>> r;
            for (std::size_t k = 0; k < M; ++k) r.emplace_back(idx_q(e, k), inv_m);
            rows.push_back(std::move(r));
            targets.push_back(prob.bar_q[e]);
        }
    const std::size_t n_c = rows.size();

    Matrix ata(n);
    for (const auto& r : rows)
        for (const auto& [i, a] : r)
            for (const auto& [j, b] : r) ata(i, j) += a * b;

    // initial point: steady pair rescaled toward the targets
    SteadyState ss = oscillatory_state(p);
    std::vector<double> bar_pi = ss.pi.time_average();
    std::vector<double> bar_qpi = ss.q_pi.time_average();
    std::vector<double> x(n);
    for (std::size_t y = 0; y < V; ++y)
        for (std::size_t k = 0; k < M; ++k) {
            double scale = with_mu ? prob.bar_mu[y] / std::max(bar_pi[y], 1e-300) : 1.0;
            x[idx_mu(y, k)] = std::max(ss.pi.at(y, k) * scale, st.floor);
        }
    for (std::size_t e = 0; e < E; ++e)
        for (std::size_t k = 0; k < M; ++k) {
            double scale = with_q && bar_qpi[e] > 1e-300 ? prob.bar_q[e] / bar_qpi[e] : 1.0;
            x[idx_q(e, k)] = std::max(ss.q_pi.at(e, k) * scale, st.floor);
        }

    auto objective = [&](const std::vector<double>& xv) {
        double acc = 0.0;
        for (std::size_t e = 0; e < E; ++e) {
            StateId y = g.edges()[e].first;
            for (std::size_t k = 0; k < M; ++k) {
                double qv = xv[idx_q(e, k)], mv = xv[idx_mu(y, k)];
                double pv = mv * p.rate(e, k);
                acc += qv * std::log(qv / pv) - (qv - pv);
            }
        }
        return acc * delta;
    };

    std::vector<double> lam(n_c, 0.0), c(n_c, 0.0);
    double rho = st.penalty_init;

    auto eval_constraints = [&](const std::vector<double>& xv) {
        for (std::size_t i = 0; i < n_c; ++i) {
            double s = -targets[i];
            for (const auto& [j, a] : rows[i]) s += a * xv[j];
            c[i] = s;
        }
    };
    auto cnorm_inf = [&]() {
        double m = 0.0;
        for (double v : c) m = std::max(m, std::abs(v));
        return m;
    };
    auto augmented = [&](const std::vector<double>& xv) {
        eval_constraints(xv);
        double val = objective(xv);
        for (std::size_t i = 0; i < n_c; ++i) val += lam[i] * c[i] + 0.5 * rho * c[i] * c[i];
        return val;
    };

    std::vector<double> grad(n), d(n), xt(n);
    auto gradient = [&](const std::vector<double>& xv) {
        eval_constraints(xv);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t e = 0; e < E; ++e) {
            StateId y = g.edges()[e].first;
            for (std::size_t k = 0; k < M; ++k) {
                double qv = xv[idx_q(e, k)], mv = xv[idx_mu(y, k)];
                grad[idx_q(e, k)] += delta * std::log(qv / (mv * p.rate(e, k)));
                grad[idx_mu(y, k)] += delta * (p.rate(e, k) - qv / mv);
            }
        }
        for (std::size_t i = 0; i < n_c; ++i) {
            double w = lam[i] + rho * c[i];
            for (const auto& [j, a] : rows[i]) grad[j] += w * a;
        }
    };

    double prev_cnorm = 1e300, prev_obj = 1e300;
    std::size_t newton_total = 0;

    for (std::size_t outer = 0; outer < st.max_outer; ++outer) {
        res.outer_iters = outer + 1;
        double cur = augmented(x);
        for (std::size_t it = 0; it < 60; ++it) {
            ++newton_total;
            gradient(x);
            // Newton system: (hess F + rho A^T A) d = -grad, with floored
            // variables that push outward frozen out of the system
            Matrix H(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) H(i, j) = rho * ata(i, j);
            for (std::size_t e = 0; e < E; ++e) {
                StateId y = g.edges()[e].first;
                for (std::size_t k = 0; k < M; ++k) {
                    std::size_t iq = idx_q(e, k), im = idx_mu(y, k);
                    double qv = x[iq], mv = x[im];
                    H(iq, iq) += delta / qv;
                    H(iq, im) += -delta / mv;
                    H(im, iq) += -delta / mv;
                    H(im, im) += delta * qv / (mv * mv);
                }
            }
            for (std::size_t i = 0; i < n; ++i) H(i, i) += 1e-12;
            std::vector<double> rhs(n);
            for (std::size_t i = 0; i < n; ++i) {
                bool frozen = x[i] <= st.floor && grad[i] > 0.0;
                rhs[i] = frozen ? 0.0 : -grad[i];
                if (frozen) {
                    for (std::size_t j = 0; j < n; ++j) {
                        H(i, j) = 0.0;
                        H(j, i) = 0.0;
                    }
                    H(i, i) = 1.0;
                }
            }
            d = solve_linear(std::move(H), std::move(rhs));

            double step = 1.0;
            bool accepted = false;
            for (int bt = 0; bt < 50; ++bt) {
                double moved = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    xt[i] = std::max(x[i] + step * d[i], st.floor);
                    moved = std::max(moved, std::abs(xt[i] - x[i]));
                }
                double trial = augmented(xt);
                if (trial <= cur + 1e-30 || moved == 0.0) {
                    accepted = trial < cur;
                    bool tiny = (cur - trial) <= st.tol_objective * (1.0 + std::abs(cur));
                    x.swap(xt);
                    cur = trial;
                    if (!accepted || tiny) it = 60; // inner converged/stalled
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }

        eval_constraints(x);
        double cn = cnorm_inf();
        double obj = objective(x);
        res.constraint_residual = cn;
        if (cn < st.tol_constraint &&
            std::abs(obj - prev_obj) < st.tol_objective * (1.0 + std::abs(obj))) {
            res.converged = true;
            break;
        }
        prev_obj = obj;
        for (std::size_t i = 0; i < n_c; ++i) lam[i] += rho * c[i];
        if (cn > 0.25 * prev_cnorm) rho = std::min(rho * st.penalty_growth, st.penalty_max);
        prev_cnorm = cn;
    }
    res.inner_iters = newton_total;

    res.mu = PeriodicDensity(p.period(), M, V);
    res.q = PeriodicFlow(p.period(), M, E);
    for (std::size_t y = 0; y < V; ++y)
        for (std::size_t k = 0; k < M; ++k) res.mu.at(y, k) = x[idx_mu(y, k)];
    for (std::size_t e = 0; e < E; ++e)
        for (std::size_t k = 0; k < M; ++k) res.q.at(e, k) = x[idx_q(e, k)];

    res.value = RateValue::finite(objective(x));
    // snapped evaluation: entries at or below the floor treated as exact zeros
    {
        double acc = 0.0;
        bool finite = true;
        for (std::size_t e = 0; e < E && finite; ++e) {
            StateId y = g.edges()[e].first;
            for (std::size_t k = 0; k < M; ++k) {
                double qv = res.q.at(e, k) <= 2.0 * st.floor ? 0.0 : res.q.at(e, k);
                double mv = res.mu.at(y, k) <= 2.0 * st.floor ? 0.0 : res.mu.at(y, k);
                auto cost = detail::phi_branches(qv, mv * p.rate(e, k));
                if (!cost.finite) {
                    finite = false;
                    break;
                }
                acc += cost.value;
            }
        }
        res.value_snapped = finite ? RateValue::finite(acc * delta)
                                   : RateValue::infinite(InfinityReason::zero_rate_flow);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Two-state closed forms (symmetric protocol r_t(0,1) = r_t(1,0))

inline double symmetric_mean_rate(const RateProtocol& p) {
    const Graph& g = p.graph();
    if (g.num_states() != 2)
        throw std::invalid_argument("symmetric protocol: needs two states");
    std::size_t e01 = g.edge_index(0, 1), e10 = g.edge_index(1, 0);
    if (e01 == Graph::npos || e10 == Graph::npos)
        throw std::invalid_argument("symmetric protocol: needs both directed edges");
    double mean = 0.0;
    for (std::size_t k = 0; k < p.bins(); ++k) {
        if (std::abs(p.rate(e01, k) - p.rate(e10, k)) >
            1e-12 * std::max(1.0, std::abs(p.rate(e01, k))))
            throw std::invalid_argument("symmetric protocol: rates differ in some bin");
        mean += p.rate(e01, k);
    }
    return mean / static_cast<double>(p.bins());
}

struct TwoStateFlowRate {
    double value = 0.0;       // per-period rate of the empirical flow
    double mean_rate = 0.0;   // bar r
    PeriodicDensity candidate_mu; // the minimizing pair mu = 1/2, Q = r_t qbar / rbar
    PeriodicFlow candidate_q;
};

/// Closed-form flow rate function 2 qbar log(2 qbar / rbar) - 2 qbar + rbar
/// for the symmetric two-state protocol, plus the minimizing periodic pair.
inline TwoStateFlowRate two_state_flow_rate(const RateProtocol& p, double bar_q) {
    if (bar_q < 0.0) throw std::invalid_argument("two_state_flow_rate: bar_q must be >= 0");
    TwoStateFlowRate out;
    out.mean_rate = symmetric_mean_rate(p);
    double x = 2.0 * bar_q;
    out.value = (x == 0.0) ? out.mean_rate
                           : x * std::log(x / out.mean_rate) - x + out.mean_rate;

    out.candidate_mu = PeriodicDensity(p.period(), p.bins(), 2);
    out.candidate_q = PeriodicFlow(p.period(), p.bins(), 2);
    const Graph& g = p.graph();
    std::size_t e01 = g.edge_index(0, 1), e10 = g.edge_index(1, 0);
    for (std::size_t k = 0; k < p.bins(); ++k) {
        out.candidate_mu.at(0, k) = 0.5;
        out.candidate_mu.at(1, k) = 0.5;
        out.candidate_q.at(e01, k) = p.rate(e01, k) * bar_q / out.mean_rate;
        out.candidate_q.at(e10, k) = p.rate(e10, k) * bar_q / out.mean_rate;
    }
    return out;
}

/// Level 2.5 rate function of the time-homogeneous chain with both rates
/// equal to r_bar: qbar log[qbar^2/(mu0 mu1 rbar^2)] - 2 qbar + rbar.
inline double homogenized_rate(double bar_mu0, double bar_mu1, double bar_q, double r_bar) {
    if (bar_q == 0.0) return r_bar;
    return bar_q * std::log(bar_q * bar_q / (bar_mu0 * bar_mu1 * r_bar * r_bar)) - 2.0 * bar_q +
           r_bar;
}

struct BasketSample {
    double bar_mu0 = 0.5;
    double bar_q = 0.0;
    double upper_bound = 0.0;      // value of the explicit feasible pair / T0
    double homogenized = 0.0;      // I^rbar
    double optimizer_value = 0.0;  // contract value / T0 (only when run)
    bool optimizer_run = false;
    bool strict = false;
};

struct BasketReport {
    std::vector<BasketSample> samples;
    double max_violation = 0.0; // max over samples of upper_bound - homogenized
};

/// Comparison with the effective homogeneous chain: the explicit feasible
/// pair mu_t = bar_mu, Q_t = r_t bar_q / r_bar evaluates exactly to the
/// homogeneous rate, which upper-bounds the contracted value. Optionally
/// runs the optimizer on a subset to report strict inequality.
inline BasketReport basket_check(const RateProtocol& p, std::size_t samples, std::uint64_t seed,
                                 std::size_t optimizer_samples = 0) {
    BasketReport rep;
    double rbar = symmetric_mean_rate(p);
    const Graph& g = p.graph();
    std::size_t e01 = g.edge_index(0, 1), e10 = g.edge_index(1, 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < samples; ++i) {
        BasketSample s;
        s.bar_mu0 = 0.05 + 0.9 * rng.uniform();
        s.bar_q = rbar * (0.1 + 1.9 * rng.uniform());
        s.homogenized = homogenized_rate(s.bar_mu0, 1.0 - s.bar_mu0, s.bar_q, rbar);

        // explicit feasible pair, evaluated through the rate functional
        PeriodicDensity mu(p.period(), p.bins(), 2);
        PeriodicFlow q(p.period(), p.bins(), 2);
        for (std::size_t k = 0; k < p.bins(); ++k) {
            mu.at(0, k) = s.bar_mu0;
            mu.at(1, k) = 1.0 - s.bar_mu0;
            q.at(e01, k) = p.rate(e01, k) * s.bar_q / rbar;
            q.at(e10, k) = p.rate(e10, k) * s.bar_q / rbar;
        }
        MembershipTolerances tol;
        tol.cont = 1e-9;
        RateValue v = rate_I(p, mu, q, tol);
        if (!v.is_finite) throw std::runtime_error("basket_check: feasible pair rejected");
        s.upper_bound = v.value / p.period();

        if (i < optimizer_samples) {
            ContractionProblem prob{p, {s.bar_mu0, 1.0 - s.bar_mu0}, {s.bar_q, s.bar_q}, {}};
            ContractResult r = contract(prob);
            if (r.value.is_finite) {
                s.optimizer_value = r.value.value / p.period();
                s.optimizer_run = true;
                s.strict = s.optimizer_value < s.homogenized - 1e-6;
            }
        }
        rep.max_violation = std::max(rep.max_violation, s.upper_bound - s.homogenized);
        rep.samples.push_back(s);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Scaled cumulant generating function via the tilted monodromy

/// Per-period SCGF: log of the spectral radius of the one-period product of
/// exp(delta * L^F_k), where L^F has off-diagonal r e^F and the original
/// diagonal.
inline double scgf(const RateProtocol& p, const std::vector<std::vector<double>>& tilt) {
    const Graph& g = p.graph();
    if (tilt.size() != g.num_edges())
        throw std::invalid_argument("scgf: tilt must have one row per edge");
    Matrix mono = Matrix::identity(g.num_states());
    const double delta = p.bin_width();
    for (std::size_t k = 0; k < p.bins(); ++k) {
        Matrix A(g.num_states());
        for (std::size_t e = 0; e < g.num_edges(); ++e) {
            const auto& [y, z] = g.edges()[e];
            double r = p.rate(e, k);
            A(y, z) += r * std::exp(tilt[e][k]);
            A(y, y) -= r;
        }
        mono = mat_mul(mono, expm_metzler(A, delta));
    }
    return std::log(spectral_radius_positive(mono));
}

/// Uniform scalar tilt on every edge.
inline double scgf_uniform(const RateProtocol& p, double s) {
    std::vector<std::vector<double>> tilt(p.graph().num_edges(),
                                          std::vector<double>(p.bins(), s));
    return scgf(p, tilt);
}

/// sup_s [ s*x - scgf(s) ] over a bracket, golden section on the concave
/// objective.
inline double scgf_legendre(const RateProtocol& p, double x, double s_lo = -20.0,
                            double s_hi = 20.0) {
    const double invphi = 0.6180339887498949;
    auto f = [&](double s) { return s * x - scgf_uniform(p, s); };
    double lo = s_lo, hi = s_hi;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-11) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        }
    }
    return f(0.5 * (lo + hi));
}

} // namespace pmc
