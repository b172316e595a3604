#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pmc/grid.hpp"
#include "pmc/linalg.hpp"
#include "pmc/protocol.hpp"

namespace pmc {

/// Frozen generator of bin k: off-diagonal r(y,z;k), diagonal -r(y;k).
inline Matrix bin_generator(const RateProtocol& p, std::size_t k) {
    const Graph& g = p.graph();
    Matrix L(g.num_states());
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        double r = p.rate(e, k);
        L(y, z) += r;
        L(y, y) -= r;
    }
    return L;
}

/// Per-bin transition matrices and their ordered one-period product. Exact
/// for the piecewise-constant rate model: each factor is the matrix
/// exponential of the frozen generator over one bin.
struct Propagator {
    double period = 1.0;
    std::size_t bins = 0;
    std::vector<Matrix> over_bin;  // exp(delta * L_k)
    std::vector<Matrix> half_bin;  // exp(delta/2 * L_k), for midpoint values
    Matrix monodromy;

    /// Transition matrix from bin boundary k0 to bin boundary k1 (k0 <= k1).
    Matrix between(std::size_t k0, std::size_t k1) const {
        Matrix acc = Matrix::identity(monodromy.n);
        for (std::size_t k = k0; k < k1; ++k) acc = mat_mul(acc, over_bin[k]);
        return acc;
    }
};

inline Propagator propagator(const RateProtocol& p) {
    Propagator prop;
    prop.period = p.period();
    prop.bins = p.bins();
    const double delta = p.bin_width();
    prop.monodromy = Matrix::identity(p.graph().num_states());
    for (std::size_t k = 0; k < p.bins(); ++k) {
        Matrix L = bin_generator(p, k);
        prop.over_bin.push_back(expm_metzler(L, delta));
        prop.half_bin.push_back(expm_metzler(L, delta / 2.0));
        prop.monodromy = mat_mul(prop.monodromy, prop.over_bin[k]);
    }
    return prop;
}

/// Stationary row vector of a stochastic matrix, by a direct solve of
/// pi (P - I) = 0 with one equation replaced by the normalization.
inline std::vector<double> stationary_row(const Matrix& P) {
    const std::size_t n = P.n;
    Matrix A(n);
    // columns of P^T - I, with the last equation replaced by sum = 1
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            A(i, j) = P(j, i) - (i == j ? 1.0 : 0.0);
    std::vector<double> b(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) A(n - 1, j) = 1.0;
    b[n - 1] = 1.0;
    return solve_linear(std::move(A), std::move(b));
}

struct SteadyState {
    PeriodicDensity pi;   // midpoint values of pi_t
    PeriodicFlow q_pi;    // Q^pi(y,z;k) = pi(y;k) r(y,z;k)
    std::vector<double> pi0; // boundary value at t = 0
};

/// Oscillatory steady state: pi0 is the unique fixed point of the one-period
/// monodromy; bin values are pi0 propagated to each bin midpoint.
inline SteadyState oscillatory_state(const RateProtocol& p) {
    const Graph& g = p.graph();
    Propagator prop = propagator(p);
    std::vector<double> pi0 = stationary_row(prop.monodromy);

    // diagnostics: fixed point quality and positivity
    std::vector<double> back = vec_mat(pi0, prop.monodromy);
    double res = 0.0;
    for (std::size_t y = 0; y < g.num_states(); ++y) res = std::max(res, std::abs(back[y] - pi0[y]));
    if (res > 1e-10)
        throw std::runtime_error("oscillatory_state: monodromy fixed point residual too large");
    for (double v : pi0)
        if (!(v > 0.0)) throw std::runtime_error("oscillatory_state: nonpositive stationary entry");

    SteadyState s;
    s.pi0 = pi0;
    s.pi = PeriodicDensity(p.period(), p.bins(), g.num_states());
    s.q_pi = PeriodicFlow(p.period(), p.bins(), g.num_edges());

    std::vector<double> nu = pi0;
    for (std::size_t k = 0; k < p.bins(); ++k) {
        std::vector<double> mid = vec_mat(nu, prop.half_bin[k]);
        for (std::size_t y = 0; y < g.num_states(); ++y) s.pi.at(y, k) = mid[y];
        nu = vec_mat(nu, prop.over_bin[k]);
    }
    s.pi.normalize_bins();
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        StateId y = g.edges()[e].first;
        for (std::size_t k = 0; k < p.bins(); ++k)
            s.q_pi.at(e, k) = s.pi.at(y, k) * p.rate(e, k);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Two-state closed form
//
// pi_t(0) = e^{-G_t}/(1-e^{-G_T0}) [ int_0^t r_s(1,0) e^{G_s} ds
//            + e^{-G_T0} int_t^T0 r_s(1,0) e^{G_s} ds ],
// G_t = int_0^t [r_s(0,1)+r_s(1,0)] ds. With piecewise constant rates all
// integrals are exact sums; the evaluation keeps every exponent nonpositive.

namespace detail {

/// Integrals of the closed form, evaluated at time t inside bin kt with the
/// weight e^{G_s - G_t} (first part, s <= t) and e^{G_s - G_t - G_T0}
/// (second part, s >= t).
inline double two_state_pi_component(const std::vector<double>& coef,
                                     const std::vector<double>& gamma,
                                     const std::vector<double>& Gpref, double delta,
                                     std::size_t kt, double t_in_bin, double GT0) {
    const std::size_t m = gamma.size();
    const double Gt = Gpref[kt] + gamma[kt] * t_in_bin;
    double acc = 0.0;
    // s in [0, t]: full bins below kt, then the partial bin
    for (std::size_t j = 0; j < kt; ++j)
        acc += coef[j] / gamma[j] *
               (std::exp(Gpref[j + 1] - Gt) - std::exp(Gpref[j] - Gt));
    acc += coef[kt] / gamma[kt] * (1.0 - std::exp(Gpref[kt] - Gt));
    // s in [t, T0]: rest of bin kt, then full bins above
    acc += coef[kt] / gamma[kt] *
           (std::exp(Gpref[kt] + gamma[kt] * delta - Gt - GT0) - std::exp(-GT0));
    for (std::size_t j = kt + 1; j < m; ++j)
        acc += coef[j] / gamma[j] *
               (std::exp(Gpref[j + 1] - Gt - GT0) - std::exp(Gpref[j] - Gt - GT0));
    return acc / (1.0 - std::exp(-GT0));
}

} // namespace detail

/// Closed-form oscillatory state of a two-state chain, at bin midpoints.
inline PeriodicDensity two_state_pi(const RateProtocol& p) {
    const Graph& g = p.graph();
    if (g.num_states() != 2)
        throw std::invalid_argument("two_state_pi: needs exactly two states");
    std::size_t e01 = g.edge_index(0, 1), e10 = g.edge_index(1, 0);
    if (e01 == Graph::npos || e10 == Graph::npos)
        throw std::invalid_argument("two_state_pi: needs both directed edges");

    const std::size_t m = p.bins();
    const double delta = p.bin_width();
    std::vector<double> a(m), b(m), gamma(m), Gpref(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        a[k] = p.rate(e01, k);
        b[k] = p.rate(e10, k);
        gamma[k] = a[k] + b[k];
        Gpref[k + 1] = Gpref[k] + gamma[k] * delta;
    }
    const double GT0 = Gpref[m];

    PeriodicDensity pi(p.period(), m, 2);
    for (std::size_t k = 0; k < m; ++k) {
        double p0 = detail::two_state_pi_component(b, gamma, Gpref, delta, k, delta / 2.0, GT0);
        double p1 = detail::two_state_pi_component(a, gamma, Gpref, delta, k, delta / 2.0, GT0);
        pi.at(0, k) = p0;
        pi.at(1, k) = p1;
    }
    pi.normalize_bins();
    return pi;
}

// ---------------------------------------------------------------------------
// Accompanying distribution

/// w_t: per bin, the invariant law of the chain with rates frozen at that
/// bin, obtained from a direct null-space solve of the transposed generator.
inline PeriodicDensity accompanying_distribution(const RateProtocol& p) {
    const Graph& g = p.graph();
    const std::size_t n = g.num_states();
    PeriodicDensity w(p.period(), p.bins(), n);
    for (std::size_t k = 0; k < p.bins(); ++k) {
        Matrix L = bin_generator(p, k);
        Matrix A(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) A(i, j) = L(j, i);
        std::vector<double> b(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) A(n - 1, j) = 1.0;
        b[n - 1] = 1.0;
        std::vector<double> wk = solve_linear(std::move(A), std::move(b));
        for (std::size_t y = 0; y < n; ++y) {
            if (!(wk[y] > 0.0))
                throw std::runtime_error("accompanying_distribution: nonpositive entry");
            w.at(y, k) = wk[y];
        }
    }
    w.normalize_bins();
    return w;
}

} // namespace pmc
