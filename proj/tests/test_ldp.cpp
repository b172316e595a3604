#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pmc/ldp.hpp"
#include "pmc/sampling.hpp"
#include "pmc/steady.hpp"

using namespace pmc;
using namespace pmc::testing;

TEST_CASE("phi: zero at the mean, boundary branches") {
    for (double p : {0.1, 1.0, 7.3}) {
        auto v = phi_fn(p, p);
        REQUIRE(v.is_finite);
        CHECK(std::abs(v.value) <= 1e-15);
    }
    auto zero_q = phi_fn(0.0, 3.5);
    REQUIRE(zero_q.is_finite);
    CHECK(zero_q.value == 3.5);

    auto direct = phi_fn(2.0, 1.0);
    REQUIRE(direct.is_finite);
    CHECK(direct.value == doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-15));

    auto inf = phi_fn(1.0, 0.0);
    CHECK(!inf.is_finite);
    CHECK(inf.reason == InfinityReason::zero_rate_flow);
    CHECK(phi_fn(0.0, 0.0).is_finite); // Phi(0,0) = 0
}

TEST_CASE("psi: zeros and the a=0 reduction") {
    for (double u : {-2.0, 0.0, 1.5})
        for (double a : {0.5, 2.0}) {
            auto v = psi_fn(u, u, a);
            REQUIRE(v.is_finite);
            CHECK(std::abs(v.value) <= 1e-14);
        }
    auto za = psi_fn(1.0, -3.0, 0.0);
    auto ph = phi_fn(1.0, 3.0);
    REQUIRE(za.is_finite);
    CHECK(za.value == doctest::Approx(ph.value).epsilon(1e-15));
    auto origin = psi_fn(0.0, 0.0, 2.0);
    REQUIRE(origin.is_finite);
    CHECK(origin.value == 0.0);
}

TEST_CASE("phi is convex in its first argument") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        double p = 0.1 + 10.0 * rng.uniform();
        double q1 = 10.0 * rng.uniform(), q2 = 10.0 * rng.uniform();
        double lam = rng.uniform();
        double lhs = phi_fn(lam * q1 + (1 - lam) * q2, p).value;
        double rhs = lam * phi_fn(q1, p).value + (1 - lam) * phi_fn(q2, p).value;
        CHECK(lhs <= rhs + 1e-12);
    }
}

TEST_CASE("phi is the Legendre transform of p(e^s - 1)") {
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        double q = 0.05 + 9.95 * rng.uniform();
        double p = 0.05 + 9.95 * rng.uniform();
        double sstar = std::log(q / p);
        double best = -1e300;
        for (int i = -100; i <= 100; ++i) {
            double s = sstar + 4e-4 * static_cast<double>(i);
            best = std::max(best, q * s - p * std::expm1(s));
        }
        CHECK(std::abs(best - phi_fn(q, p).value) <= 1e-6);
    }
}

TEST_CASE("rate_I vanishes on the steady pair") {
    auto p = three_state_protocol(128);
    auto ss = oscillatory_state(p);
    auto v = rate_I(p, ss.pi, ss.q_pi, loose_tol(128));
    REQUIRE(v.is_finite);
    CHECK(v.value <= 1e-8);
}

TEST_CASE("rate_I reports the failed admissibility item") {
    auto p = three_state_protocol(16);
    auto ss = oscillatory_state(p);
    PeriodicDensity bad = ss.pi;
    bad.at(0, 3) += 0.2; // break the bin mass
    auto v = rate_I(p, bad, ss.q_pi, loose_tol(16));
    CHECK(!v.is_finite);
    CHECK(v.reason == InfinityReason::lambda_mass);
}

TEST_CASE("rate_I: flat two-state density against its zero-current flow") {
    // with mu constant the contracted cost collapses to the frozen-rate form
    // integral of (sqrt(mu r01) - sqrt((1-mu) r10))^2
    ExampleParams prm;
    auto p = build_example(ExampleModel::defect_center, prm, 1.0, 64);
    std::size_t e01 = p.graph().edge_index(0, 1), e10 = p.graph().edge_index(1, 0);
    PeriodicDensity mu(1.0, 64, 2);
    PeriodicFlow q(1.0, 64, 2);
    double frozen = 0.0;
    for (std::size_t k = 0; k < 64; ++k) {
        mu.at(0, k) = 0.5;
        mu.at(1, k) = 0.5;
        double qv = std::sqrt(0.25 * p.rate(e01, k) * p.rate(e10, k));
        q.at(e01, k) = qv;
        q.at(e10, k) = qv;
        double d = std::sqrt(0.5 * p.rate(e01, k)) - std::sqrt(0.5 * p.rate(e10, k));
        frozen += d * d / 64.0;
    }
    auto v = rate_I(p, mu, q);
    REQUIRE(v.is_finite);
    CHECK(v.value == doctest::Approx(frozen).epsilon(1e-12));
}

TEST_CASE("q_from_current: balanced pair, one-way edges, two-state formula") {
    Graph g2 = two_state_graph();
    RateProtocol p2(g2, 1.0, 4, {std::vector<double>(4, 2.0), std::vector<double>(4, 2.0)});
    PeriodicDensity mu(1.0, 4, 2);
    PeriodicCurrent j(1.0, 4, 1);
    for (std::size_t k = 0; k < 4; ++k) {
        mu.at(0, k) = 0.5;
        mu.at(1, k) = 0.5;
    }
    auto q = q_from_current(p2, mu, j);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(q.at(0, k) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(q.at(1, k) == doctest::Approx(1.0).epsilon(1e-15));
    }

    // one-way edge: positive current passes through, negative current clips
    Graph g3({"0", "1", "2"}, {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 0}});
    RateProtocol p3(g3, 1.0, 2, std::vector<std::vector<double>>(5, std::vector<double>(2, 1.0)));
    PeriodicDensity mu3(1.0, 2, 3);
    for (std::size_t k = 0; k < 2; ++k)
        for (StateId y = 0; y < 3; ++y) mu3.at(y, k) = 1.0 / 3.0;
    PeriodicCurrent j3(1.0, 2, g3.num_sym_pairs());
    std::size_t s20 = g3.sym_pair_index(2, 0);
    j3.at(s20, 0) = -0.7; // oriented 0->2, so 0.7 along the (2,0) edge
    j3.at(s20, 1) = 0.7;
    auto q3 = q_from_current(p3, mu3, j3);
    std::size_t e20 = g3.edge_index(2, 0);
    CHECK(q3.at(e20, 0) == doctest::Approx(0.7));
    CHECK(q3.at(e20, 1) == 0.0);
}

TEST_CASE("q_from_current reproduces the two-state density-driven flow") {
    ExampleParams prm;
    auto p = build_example(ExampleModel::quantum_dot, prm, 1.0, 32);
    std::size_t e01 = p.graph().edge_index(0, 1);
    PeriodicDensity mu(1.0, 32, 2);
    PeriodicCurrent j(1.0, 32, 1);
    for (std::size_t k = 0; k < 32; ++k) {
        double t = (k + 0.5) / 32.0;
        mu.at(0, k) = 0.5 + 0.2 * std::sin(two_pi * t);
        mu.at(1, k) = 1.0 - mu.at(0, k);
    }
    for (std::size_t k = 0; k < 32; ++k) {
        double dmu = (mu.at(0, (k + 1) % 32) - mu.at(0, k)) * 32.0;
        j.at(0, k) = -dmu; // oriented 0->1
    }
    auto q = q_from_current(p, mu, j);
    for (std::size_t k = 0; k < 32; ++k) {
        double dmu = -j.at(0, k);
        double expect = 0.5 * (-dmu + std::sqrt(dmu * dmu + 4.0 * mu.at(0, k) * mu.at(1, k) *
                                                                p.rate(0, k) * p.rate(1, k)));
        CHECK(q.at(e01, k) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("rate_I_hat vanishes on the steady current") {
    auto p = three_state_protocol(128);
    auto ss = oscillatory_state(p);
    auto j = current_from_flow(p.graph(), ss.q_pi);
    auto r = rate_I_hat(p, ss.pi, j, loose_tol(128));
    REQUIRE(r.value.is_finite);
    CHECK(r.value.value <= 1e-8);
    CHECK(r.psi_form <= 1e-8);
}

TEST_CASE("rate_I_hat rejects a current against a one-way edge") {
    Graph g({"0", "1", "2"}, {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 0}});
    RateProtocol p(g, 1.0, 4, std::vector<std::vector<double>>(5, std::vector<double>(4, 1.0)));
    PeriodicDensity mu(1.0, 4, 3);
    for (std::size_t k = 0; k < 4; ++k)
        for (StateId y = 0; y < 3; ++y) mu.at(y, k) = 1.0 / 3.0;
    PeriodicCurrent j(1.0, 4, g.num_sym_pairs());
    std::size_t s20 = g.sym_pair_index(0, 2);
    for (std::size_t k = 0; k < 4; ++k) j.at(s20, k) = 0.4; // oriented 0->2: against (2,0)
    MembershipTolerances tol;
    tol.cont = 10.0;
    auto r = rate_I_hat(p, mu, j, tol);
    CHECK(!r.value.is_finite);
    CHECK(r.value.reason == InfinityReason::lambda_sign);
}

TEST_CASE("phi and psi forms of the current functional agree to 1e-10") {
    auto p = three_state_protocol(96, 0.25);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        LambdaSampleOptions opt;
        opt.mu_amplitude = 0.05;
        opt.q_amplitude = 0.05;
        auto sample = random_lambda_a_member(p, seed, opt);
        MembershipTolerances tol;
        tol.cont = 1e-8;
        auto r = rate_I_hat(p, sample.mu, sample.j, tol);
        REQUIRE(r.value.is_finite);
        CHECK(r.mismatch <= 1e-10);
    }
}

TEST_CASE("minimal flow oracle agrees with the closed form") {
    auto p = three_state_protocol(48, 0.25);
    for (std::uint64_t seed = 11; seed <= 14; ++seed) {
        LambdaSampleOptions opt;
        opt.mu_amplitude = 0.08;
        opt.q_amplitude = 0.08;
        auto sample = random_lambda_a_member(p, seed, opt);
        auto closed = q_from_current(p, sample.mu, sample.j);
        auto brute = minimal_flow_oracle(p, sample.mu, sample.j);
        for (std::size_t e = 0; e < 6; ++e)
            for (std::size_t k = 0; k < 48; ++k)
                CHECK(std::abs(closed.at(e, k) - brute.at(e, k)) <= 1e-8);
    }
}

TEST_CASE("minimal flow oracle: zero current on a symmetric pair gives sqrt(mu mu r r)") {
    Graph g = two_state_graph();
    RateProtocol p(g, 1.0, 4, {std::vector<double>(4, 1.5), std::vector<double>(4, 1.5)});
    PeriodicDensity mu(1.0, 4, 2);
    for (std::size_t k = 0; k < 4; ++k) {
        mu.at(0, k) = 0.5;
        mu.at(1, k) = 0.5;
    }
    PeriodicCurrent j(1.0, 4, 1);
    auto q = minimal_flow_oracle(p, mu, j);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(q.at(0, k) == doctest::Approx(std::sqrt(0.25 * 1.5 * 1.5)).epsilon(1e-10));
        CHECK(q.at(0, k) == doctest::Approx(q.at(1, k)).epsilon(1e-12));
    }
}

TEST_CASE("minimal flow oracle: empty states carry no symmetric excess") {
    auto g = three_state_graph();
    RateProtocol p(g, 1.0, 4, std::vector<std::vector<double>>(6, std::vector<double>(4, 1.0)));
    PeriodicDensity mu(1.0, 4, 3);
    for (std::size_t k = 0; k < 4; ++k) {
        mu.at(0, k) = 0.5;
        mu.at(1, k) = 0.5;
        mu.at(2, k) = 0.0;
    }
    PeriodicCurrent j(1.0, 4, g.num_sym_pairs());
    auto q = minimal_flow_oracle(p, mu, j);
    std::size_t e02 = g.edge_index(0, 2), e20 = g.edge_index(2, 0);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(q.at(e02, k) == 0.0);
        CHECK(q.at(e20, k) == 0.0);
    }
}

TEST_CASE("tilted functional: F = 0 reduces to the continuity pairing") {
    auto p = three_state_protocol(64, 0.2);
    auto sample = random_lambda_member(p, 21);
    TestFunctionPair tf = zero_test_pair(p.graph(), 64);
    Rng rng(5);
    for (auto& row : tf.phi)
        for (auto& v : row) v = 2.0 * rng.uniform() - 1.0;
    CHECK(std::abs(tilted_rate(p, sample.mu, sample.q, tf)) <= 1e-9);
}

TEST_CASE("tilted functional: analytic tilt attains the rate, trials stay below") {
    auto p = three_state_protocol(64, 0.2);
    for (std::uint64_t seed = 31; seed <= 35; ++seed) {
        LambdaSampleOptions opt;
        opt.mu_amplitude = 0.05;
        opt.q_amplitude = 0.1;
        auto sample = random_lambda_member(p, seed, opt);
        MembershipTolerances tol;
        tol.cont = 1e-8;
        auto v = rate_I(p, sample.mu, sample.q, tol);
        REQUIRE(v.is_finite);
        auto bound = variational_lower_bound(p, sample.mu, sample.q, 40, seed);
        CHECK(std::abs(bound.analytic - v.value) <= 1e-6);
        CHECK(bound.best <= v.value + 1e-8);
    }
}

TEST_CASE("theta reversal is a bit-exact involution preserving membership") {
    auto p = three_state_protocol(32, 0.2);
    auto sample = random_lambda_member(p, 41);
    auto [mu_r, q_r] = theta_reverse(p.graph(), sample.mu, sample.q);
    auto [mu_rr, q_rr] = theta_reverse(p.graph(), mu_r, q_r);
    CHECK(mu_rr.values == sample.mu.values);
    CHECK(q_rr.values == sample.q.values);
    auto rep = lambda_membership(p.graph(), mu_r, q_r, loose_tol(32));
    CHECK(rep.member);

    auto j = current_from_flow(p.graph(), sample.q);
    auto [mu_c, j_c] = theta_reverse_current(sample.mu, j);
    auto [mu_cc, j_cc] = theta_reverse_current(mu_c, j_c);
    CHECK(j_cc.values == j.values);
    CHECK(lambda_a_membership(p.graph(), mu_c, j_c, loose_tol(32)).member);
}

TEST_CASE("theta fixes time-constant symmetric data") {
    Graph g = two_state_graph();
    PeriodicDensity mu(1.0, 8, 2);
    PeriodicFlow q(1.0, 8, 2);
    for (std::size_t k = 0; k < 8; ++k) {
        mu.at(0, k) = 0.5;
        mu.at(1, k) = 0.5;
        q.at(0, k) = 0.3;
        q.at(1, k) = 0.3;
    }
    auto [mu_r, q_r] = theta_reverse(g, mu, q);
    CHECK(mu_r.values == mu.values);
    CHECK(q_r.values == q.values);
}

TEST_CASE("contracted current functional lower-bounds every realizing flow") {
    auto p = three_state_protocol(48, 0.2);
    Rng rng(55);
    for (std::uint64_t seed = 61; seed <= 64; ++seed) {
        auto sample = random_lambda_member(p, seed);
        auto j = current_from_flow(p.graph(), sample.q);
        MembershipTolerances tol;
        tol.cont = 1e-8;
        auto ihat = rate_I_hat(p, sample.mu, j, tol);
        auto direct = rate_I(p, sample.mu, sample.q, tol);
        REQUIRE(ihat.value.is_finite);
        REQUIRE(direct.is_finite);
        CHECK(ihat.value.value <= direct.value + 1e-12);

        // symmetric excess keeps the current, can only raise the cost
        PeriodicFlow bumped = sample.q;
        for (std::size_t s = 0; s < p.graph().num_sym_pairs(); ++s) {
            const auto& [y, z] = p.graph().sym_pairs()[s];
            double add = 0.2 * rng.uniform();
            for (std::size_t k = 0; k < 48; ++k) {
                bumped.at(p.graph().edge_index(y, z), k) += add;
                bumped.at(p.graph().edge_index(z, y), k) += add;
            }
        }
        auto vb = rate_I(p, sample.mu, bumped, tol);
        REQUIRE(vb.is_finite);
        CHECK(ihat.value.value <= vb.value + 1e-12);
    }
}

TEST_CASE("five-state graph: functionals behave away from the toy sizes") {
    Graph g({"0", "1", "2", "3", "4"},
            {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}, {3, 4}, {4, 3}, {4, 0}, {0, 4},
             {0, 2}, {2, 0}});
    std::vector<std::vector<double>> rates;
    for (std::size_t e = 0; e < 12; ++e) {
        std::vector<double> row(128);
        for (std::size_t k = 0; k < 128; ++k) {
            double t = (k + 0.5) / 128.0;
            row[k] = (0.6 + 0.13 * static_cast<double>(e)) *
                     (1.0 + 0.05 * std::sin(two_pi * t + 0.5 * static_cast<double>(e)));
        }
        rates.push_back(std::move(row));
    }
    RateProtocol p(g, 1.0, 128, std::move(rates));
    CHECK(validate_protocol(p).empty());

    auto ss = oscillatory_state(p);
    auto v = rate_I(p, ss.pi, ss.q_pi, loose_tol(128));
    REQUIRE(v.is_finite);
    CHECK(v.value <= 1e-10);

    auto sa = random_lambda_a_member(p, 4);
    MembershipTolerances tol;
    tol.cont = 1e-3;
    auto r = rate_I_hat(p, sa.mu, sa.j, tol);
    REQUIRE(r.value.is_finite);
    CHECK(r.mismatch <= 1e-10);
    auto brute = minimal_flow_oracle(p, sa.mu, sa.j);
    for (std::size_t e = 0; e < 12; ++e)
        for (std::size_t k = 0; k < 128; ++k)
            CHECK(std::abs(brute.at(e, k) - r.minimal_flow.at(e, k)) <= 1e-8);
}

TEST_CASE("rate_I is convex along segments and contracts toward the steady pair") {
    auto p = three_state_protocol(64, 0.2);
    auto a = random_lambda_member(p, 71);
    auto b = random_lambda_member(p, 72);
    MembershipTolerances tol;
    tol.cont = 1e-8;
    double ia = rate_I(p, a.mu, a.q, tol).value;
    double ib = rate_I(p, b.mu, b.q, tol).value;
    for (double lam : {0.25, 0.5, 0.75}) {
        PeriodicDensity mu(1.0, 64, 3);
        PeriodicFlow q(1.0, 64, 6);
        for (StateId y = 0; y < 3; ++y)
            for (std::size_t k = 0; k < 64; ++k)
                mu.at(y, k) = lam * a.mu.at(y, k) + (1 - lam) * b.mu.at(y, k);
        for (std::size_t e = 0; e < 6; ++e)
            for (std::size_t k = 0; k < 64; ++k)
                q.at(e, k) = lam * a.q.at(e, k) + (1 - lam) * b.q.at(e, k);
        double mid = rate_I(p, mu, q, tol).value;
        CHECK(mid <= lam * ia + (1 - lam) * ib + 1e-10);
    }

    auto ss = oscillatory_state(p);
    for (double n : {2.0, 4.0, 8.0}) {
        PeriodicDensity mu(1.0, 64, 3);
        PeriodicFlow q(1.0, 64, 6);
        for (StateId y = 0; y < 3; ++y)
            for (std::size_t k = 0; k < 64; ++k)
                mu.at(y, k) = (1 - 1 / n) * a.mu.at(y, k) + ss.pi.at(y, k) / n;
        for (std::size_t e = 0; e < 6; ++e)
            for (std::size_t k = 0; k < 64; ++k)
                q.at(e, k) = (1 - 1 / n) * a.q.at(e, k) + ss.q_pi.at(e, k) / n;
        double mixed = rate_I(p, mu, q, loose_tol(64)).value;
        CHECK(mixed <= (1 - 1 / n) * ia + 1e-8);
    }
}
