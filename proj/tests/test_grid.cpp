#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pmc/grid.hpp"
#include "pmc/protocol.hpp"
#include "pmc/rng.hpp"

using namespace pmc;

namespace {

constexpr double two_pi = 6.283185307179586476925286766559;

PeriodicFlow constant_flow(const Graph& g, std::size_t bins, std::vector<double> per_edge) {
    PeriodicFlow q(1.0, bins, g.num_edges());
    for (std::size_t e = 0; e < g.num_edges(); ++e)
        for (std::size_t k = 0; k < bins; ++k) q.at(e, k) = per_edge[e];
    return q;
}

} // namespace

TEST_CASE("divergence: balanced two-state flow") {
    Graph g = two_state_graph();
    auto q = constant_flow(g, 4, {0.8, 0.8});
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(divergence(g, q, 0, k) == 0.0);
        CHECK(divergence(g, q, 1, k) == 0.0);
    }
}

TEST_CASE("divergence: uniform cycle flow is divergence free") {
    Graph g({"0", "1", "2"}, {{0, 1}, {1, 2}, {2, 0}});
    auto q = constant_flow(g, 4, {0.3, 0.3, 0.3});
    for (StateId y = 0; y < 3; ++y) CHECK(divergence(g, q, y, 1) == doctest::Approx(0.0));
}

TEST_CASE("divergence: asymmetric two-state flow") {
    Graph g = two_state_graph();
    auto q = constant_flow(g, 4, {2.0, 1.0});
    CHECK(divergence(g, q, 0, 0) == doctest::Approx(1.0));
    CHECK(divergence(g, q, 1, 0) == doctest::Approx(-1.0));
}

TEST_CASE("divergence sums to zero over states") {
    Graph g({"0", "1", "2", "3"}, {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}, {3, 0}, {0, 3}});
    Rng rng(7);
    PeriodicFlow q(1.0, 8, g.num_edges());
    for (std::size_t e = 0; e < g.num_edges(); ++e)
        for (std::size_t k = 0; k < 8; ++k) q.at(e, k) = rng.uniform() * 3.0;
    for (std::size_t k = 0; k < 8; ++k) {
        auto div = divergence_column(g, q, k);
        double total = 0.0;
        for (double d : div) total += d;
        CHECK(std::abs(total) <= 1e-12);
    }
}

TEST_CASE("continuity residual of flow and of its current agree bitwise") {
    Graph g = two_state_graph();
    Rng rng(11);
    PeriodicDensity mu(1.0, 16, 2);
    PeriodicFlow q(1.0, 16, 2);
    for (std::size_t k = 0; k < 16; ++k) {
        double m0 = 0.2 + 0.6 * rng.uniform();
        mu.at(0, k) = m0;
        mu.at(1, k) = 1.0 - m0;
        q.at(0, k) = rng.uniform();
        q.at(1, k) = rng.uniform();
    }
    auto j = current_from_flow(g, q);
    CHECK(continuity_residual(g, mu, q) == continuity_residual(g, mu, j));
}

TEST_CASE("continuity: constant density with divergence-free flow is exact") {
    Graph g = two_state_graph();
    PeriodicDensity mu(1.0, 8, 2);
    for (std::size_t k = 0; k < 8; ++k) {
        mu.at(0, k) = 0.4;
        mu.at(1, k) = 0.6;
    }
    auto q = constant_flow(g, 8, {1.7, 1.7});
    CHECK(continuity_residual(g, mu, q) == 0.0);
}

TEST_CASE("continuity: discrete-difference current closes the equation to rounding") {
    Graph g = two_state_graph();
    const std::size_t m = 64;
    PeriodicDensity mu(1.0, m, 2);
    PeriodicCurrent j(1.0, m, 1);
    for (std::size_t k = 0; k < m; ++k) {
        double t = (k + 0.5) / static_cast<double>(m);
        mu.at(0, k) = 0.5 + 0.25 * std::sin(two_pi * t);
        mu.at(1, k) = 1.0 - mu.at(0, k);
    }
    for (std::size_t k = 0; k < m; ++k)
        j.at(0, k) = -(mu.at(0, (k + 1) % m) - mu.at(0, k)) * static_cast<double>(m);
    CHECK(continuity_residual(g, mu, j) <= 1e-12);
}

TEST_CASE("continuity: midpoint-tabulated derivative current has O(1/M) residual") {
    // mu_t(0) = 1/2 + 1/4 sin(2 pi t), J = -d/dt mu tabulated at midpoints.
    // The forward-difference residual is (pi^2/2)/M to leading order
    // (max |mu''| = pi^2, half-bin offset), so just under 5/M; it halves with M.
    Graph g = two_state_graph();
    double prev = 0.0;
    for (std::size_t m : {64, 128}) {
        PeriodicDensity mu(1.0, m, 2);
        PeriodicCurrent j(1.0, m, 1);
        for (std::size_t k = 0; k < m; ++k) {
            double t = (k + 0.5) / static_cast<double>(m);
            mu.at(0, k) = 0.5 + 0.25 * std::sin(two_pi * t);
            mu.at(1, k) = 1.0 - mu.at(0, k);
            j.at(0, k) = -0.25 * two_pi * std::cos(two_pi * t);
        }
        double res = continuity_residual(g, mu, j);
        CHECK(res <= 5.0 / static_cast<double>(m));
        CHECK(res >= 4.0 / static_cast<double>(m));
        if (prev > 0.0) CHECK(prev / res > 1.8);
        prev = res;
    }
}

TEST_CASE("lambda membership: mass defect is reported as item (i)") {
    Graph g = two_state_graph();
    PeriodicDensity mu(1.0, 4, 2);
    for (std::size_t k = 0; k < 4; ++k) {
        mu.at(0, k) = 0.5;
        mu.at(1, k) = (k == 2) ? 0.4 : 0.5;
    }
    auto q = constant_flow(g, 4, {0.0, 0.0});
    auto rep = lambda_membership(g, mu, q);
    CHECK(!rep.member);
    CHECK(rep.first_failed == LambdaItem::mass);
}

TEST_CASE("lambda membership: flow out of an empty state is item (iv)") {
    Graph g = two_state_graph();
    PeriodicDensity mu(1.0, 4, 2);
    for (std::size_t k = 0; k < 4; ++k) {
        mu.at(0, k) = 0.0;
        mu.at(1, k) = 1.0;
    }
    PeriodicFlow q(1.0, 4, 2);
    q.at(0, 1) = 0.5; // out of the empty state
    q.at(1, 1) = 0.5;
    MembershipTolerances tol;
    tol.cont = 10.0; // isolate item (iv)
    auto rep = lambda_membership(g, mu, q, tol);
    CHECK(!rep.member);
    CHECK(rep.first_failed == LambdaItem::support);
}

TEST_CASE("lambda_a membership: one-way sign constraint is item (v)") {
    Graph g({"0", "1", "2"}, {{0, 1}, {1, 0}, {1, 2}}); // (1,2) one-way
    PeriodicDensity mu(1.0, 4, 3);
    for (std::size_t k = 0; k < 4; ++k)
        for (StateId y = 0; y < 3; ++y) mu.at(y, k) = 1.0 / 3.0;
    PeriodicCurrent j(1.0, 4, g.num_sym_pairs());
    std::size_t s12 = g.sym_pair_index(1, 2);
    for (std::size_t k = 0; k < 4; ++k) j.at(s12, k) = -0.2; // against the only edge
    MembershipTolerances tol;
    tol.cont = 10.0;
    auto rep = lambda_a_membership(g, mu, j, tol);
    CHECK(!rep.member);
    CHECK(rep.first_failed == LambdaItem::sign);
}

TEST_CASE("current antisymmetry holds by construction") {
    Graph g = two_state_graph();
    Rng rng(3);
    PeriodicFlow q(1.0, 8, 2);
    for (std::size_t e = 0; e < 2; ++e)
        for (std::size_t k = 0; k < 8; ++k) q.at(e, k) = rng.uniform();
    auto j = current_from_flow(g, q);
    for (std::size_t k = 0; k < 8; ++k)
        CHECK(j.oriented(g, 0, 1, k) == -j.oriented(g, 1, 0, k));
}
