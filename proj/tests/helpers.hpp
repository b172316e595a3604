#pragma once

// Shared protocol builders for the test suites.

#include <cmath>
#include <vector>

#include "pmc/grid.hpp"
#include "pmc/protocol.hpp"

namespace pmc::testing {

/// Membership tolerances for grid data whose continuity residual is O(1/M)
/// (steady pairs, theta-reversed pairs). Exactly-repaired sampler output
/// passes much tighter ones.
inline MembershipTolerances loose_tol(std::size_t bins) {
    MembershipTolerances tol;
    tol.mass = 1e-9;
    tol.cont = 50.0 / static_cast<double>(bins);
    return tol;
}

inline constexpr double two_pi = 6.283185307179586476925286766559;

inline RateProtocol constant_two_state(double r01, double r10, double period = 1.0,
                                       std::size_t bins = 16) {
    std::vector<double> a(bins, r01), b(bins, r10);
    return RateProtocol(two_state_graph(), period, bins, {a, b});
}

/// Symmetric two-state protocol with the stochastic-resonance rate shape on
/// both edges: r(0,1;t) = r(1,0;t) = exp(-k cos(2 pi t/T0)).
inline RateProtocol symmetric_sr_protocol(double k, double period, std::size_t bins) {
    std::vector<double> r(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        double t = (static_cast<double>(i) + 0.5) * period / static_cast<double>(bins);
        r[i] = std::exp(-k * std::cos(two_pi * t / period));
    }
    return RateProtocol(two_state_graph(), period, bins, {r, r});
}

/// Fully connected three-state graph with both orientations of every pair.
inline Graph three_state_graph() {
    return Graph({"0", "1", "2"}, {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 0}, {0, 2}});
}

/// Three-state protocol with E = E_s and sinusoidally modulated rates.
inline RateProtocol three_state_protocol(std::size_t bins, double amplitude = 0.3,
                                         double period = 1.0) {
    Graph g = three_state_graph();
    std::vector<double> base{1.0, 0.8, 1.3, 0.7, 1.1, 0.9};
    std::vector<std::vector<double>> rates(6, std::vector<double>(bins));
    for (std::size_t e = 0; e < 6; ++e)
        for (std::size_t k = 0; k < bins; ++k) {
            double t = (static_cast<double>(k) + 0.5) * period / static_cast<double>(bins);
            rates[e][k] = base[e] * (1.0 + amplitude * std::sin(two_pi * t / period +
                                                                0.7 * static_cast<double>(e)));
        }
    return RateProtocol(g, period, bins, std::move(rates));
}

} // namespace pmc::testing
