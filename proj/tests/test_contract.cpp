#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pmc/contract.hpp"
#include "pmc/steady.hpp"

using namespace pmc;
using namespace pmc::testing;

TEST_CASE("two_state_flow_rate: typical value, doubled value, rejection") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 64);
    double rbar = symmetric_mean_rate(p);

    auto typical = two_state_flow_rate(p, rbar / 2.0);
    CHECK(std::abs(typical.value) <= 1e-14);

    auto doubled = two_state_flow_rate(p, rbar);
    CHECK(doubled.value ==
          doctest::Approx(2.0 * rbar * std::log(2.0) - rbar).epsilon(1e-13));

    ExampleParams prm;
    auto asym = build_example(ExampleModel::defect_center, prm, 1.0, 64);
    CHECK_THROWS(two_state_flow_rate(asym, 0.5));
}

TEST_CASE("contract: steady targets give zero") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 32);
    auto ss = oscillatory_state(p);
    ContractionProblem prob{p, ss.pi.time_average(), ss.q_pi.time_average(), {}};
    auto res = contract(prob);
    REQUIRE(res.value.is_finite);
    CHECK(res.converged);
    CHECK(std::abs(res.value.value) <= 1e-6);
}

TEST_CASE("contract: three-state steady targets give zero") {
    auto p = three_state_protocol(24, 0.2);
    auto ss = oscillatory_state(p);
    // gridded time averages carry O(1/M^2) divergence dust; scrub it
    auto bar_q = repair_divergence(p.graph(), ss.q_pi.time_average());
    ContractionProblem prob{p, ss.pi.time_average(), bar_q, {}};
    auto res = contract(prob);
    REQUIRE(res.value.is_finite);
    CHECK(res.converged);
    CHECK(std::abs(res.value.value) <= 1e-6);
}

TEST_CASE("contract matches the symmetric closed form") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 64);
    double rbar = symmetric_mean_rate(p);
    for (double frac : {0.25, 1.0, 2.0}) {
        double qbar = frac * rbar;
        auto closed = two_state_flow_rate(p, qbar);
        ContractionProblem prob{p, {}, {qbar, qbar}, {}};
        auto res = contract(prob);
        REQUIRE(res.value.is_finite);
        CHECK(res.converged);
        double rel = std::abs(res.value.value / p.period() - closed.value) /
                     (1.0 + std::abs(closed.value));
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("contract: non-divergence-free targets are infeasible") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 16);
    ContractionProblem prob{p, {0.5, 0.5}, {0.8, 0.3}, {}};
    auto res = contract(prob);
    CHECK(!res.value.is_finite);
    CHECK(res.value.reason == InfinityReason::lambda_continuity);
}

TEST_CASE("contract value never exceeds the candidate minimizer") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 48);
    double rbar = symmetric_mean_rate(p);
    double qbar = 0.8 * rbar;
    auto closed = two_state_flow_rate(p, qbar);
    MembershipTolerances tol;
    tol.cont = 1e-9;
    auto cand = rate_I(p, closed.candidate_mu, closed.candidate_q, tol);
    REQUIRE(cand.is_finite);
    ContractionProblem prob{p, {0.5, 0.5}, {qbar, qbar}, {}};
    auto res = contract(prob);
    REQUIRE(res.value.is_finite);
    CHECK(res.value.value <= cand.value + 1e-6);
}

TEST_CASE("contract is monotone under constraint relaxation") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 32);
    double rbar = symmetric_mean_rate(p);
    std::vector<double> bar_mu{0.65, 0.35};
    std::vector<double> bar_q{0.9 * rbar, 0.9 * rbar};
    auto full = contract({p, bar_mu, bar_q, {}});
    auto no_q = contract({p, bar_mu, {}, {}});
    auto no_mu = contract({p, {}, bar_q, {}});
    REQUIRE(full.value.is_finite);
    CHECK(no_q.value.value <= full.value.value + 1e-8);
    CHECK(no_mu.value.value <= full.value.value + 1e-8);
}

TEST_CASE("contract is deterministic") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 32);
    double rbar = symmetric_mean_rate(p);
    ContractionProblem prob{p, {0.6, 0.4}, {rbar, rbar}, {}};
    auto a = contract(prob);
    auto b = contract(prob);
    CHECK(a.value.value == b.value.value);
    CHECK(a.mu.values == b.mu.values);
    CHECK(a.q.values == b.q.values);
}

TEST_CASE("homogenized rate: flat density minimizes to the flow rate function") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 64);
    double rbar = symmetric_mean_rate(p);
    for (double frac : {0.3, 0.7, 1.5}) {
        double qbar = frac * rbar;
        // golden-section over bar_mu(0)
        const double invphi = 0.6180339887498949;
        double lo = 1e-6, hi = 1.0 - 1e-6;
        auto f = [&](double m) { return homogenized_rate(m, 1.0 - m, qbar, rbar); };
        double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
        double f1 = f(x1), f2 = f(x2);
        while (hi - lo > 1e-12) {
            if (f1 < f2) {
                hi = x2; x2 = x1; f2 = f1; x1 = hi - invphi * (hi - lo); f1 = f(x1);
            } else {
                lo = x1; x1 = x2; f1 = f2; x2 = lo + invphi * (hi - lo); f2 = f(x2);
            }
        }
        double inf_mu = f(0.5 * (lo + hi));
        CHECK(std::abs(inf_mu - two_state_flow_rate(p, qbar).value) <= 1e-6);
    }
}

TEST_CASE("basket comparison: homogeneous chain upper-bounds the contraction") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 48);
    auto rep = basket_check(p, 50, 2024, 3);
    CHECK(rep.max_violation <= 1e-8);
    for (const auto& s : rep.samples)
        if (s.optimizer_run) CHECK(s.optimizer_value <= s.homogenized + 1e-6);
}

TEST_CASE("basket comparison is strict away from the symmetric target") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 48);
    double rbar = symmetric_mean_rate(p);
    double qbar = 0.6 * rbar;
    ContractionProblem prob{p, {0.7, 0.3}, {qbar, qbar}, {}};
    auto res = contract(prob);
    REQUIRE(res.value.is_finite);
    double hom = homogenized_rate(0.7, 0.3, qbar, rbar);
    CHECK(res.value.value / p.period() < hom - 1e-4);
}

TEST_CASE("scgf: zero tilt, uniform tilt closed form, Legendre duality") {
    auto p = symmetric_sr_protocol(1.0, 1.0, 64);
    double rbar = symmetric_mean_rate(p);
    CHECK(std::abs(scgf_uniform(p, 0.0)) <= 1e-12);
    for (double s : {-1.0, -0.5, 0.5, 1.0})
        CHECK(std::abs(scgf_uniform(p, s) - rbar * std::expm1(s)) <= 1e-8);

    for (double frac : {0.5, 1.0, 2.0}) {
        double qbar = frac * rbar;
        double legendre = scgf_legendre(p, 2.0 * qbar);
        CHECK(std::abs(legendre - two_state_flow_rate(p, qbar).value) <= 1e-4);
    }
}

TEST_CASE("scgf is convex along one-parameter tilt families") {
    auto p = three_state_protocol(32, 0.2);
    Rng rng(2025);
    std::vector<std::vector<double>> dir(6, std::vector<double>(32));
    for (auto& row : dir)
        for (auto& v : row) v = 2.0 * rng.uniform() - 1.0;
    auto at = [&](double t) {
        std::vector<std::vector<double>> tilt(6, std::vector<double>(32));
        for (std::size_t e = 0; e < 6; ++e)
            for (std::size_t k = 0; k < 32; ++k) tilt[e][k] = t * dir[e][k];
        return scgf(p, tilt);
    };
    for (double t : {-0.8, -0.2, 0.4}) {
        double mid = at(t), lo = at(t - 0.3), hi = at(t + 0.3);
        CHECK(mid <= 0.5 * (lo + hi) + 1e-10);
    }
}
