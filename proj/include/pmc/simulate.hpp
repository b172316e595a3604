#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pmc/grid.hpp"
#include "pmc/protocol.hpp"
#include "pmc/rng.hpp"

namespace pmc {

struct JumpEvent {
    double time; // absolute time in (0, n*T0]
    StateId from;
    StateId to;
};

/// One sampled trajectory over n periods.
struct Path {
    StateId initial_state = 0;
    std::vector<JumpEvent> events;
    std::size_t n_periods = 1;
    std::uint64_t seed = 0;

    StateId final_state() const { return events.empty() ? initial_state : events.back().to; }

    /// State just before absolute time t (cadlag: a jump at t is not yet seen).
    StateId state_before(double t) const {
        StateId s = initial_state;
        for (const auto& ev : events) {
            if (ev.time >= t) break;
            s = ev.to;
        }
        return s;
    }
};

struct ThinningStats {
    std::vector<std::size_t> candidates; // per edge
    std::vector<std::size_t> accepted;   // per edge
};

/// Thinning sampler with per-edge envelopes lambda(y,z) = sup_t r(y,z;t).
/// Per step: draw the candidate waiting time from Exp(sum_z lambda(y,z)),
/// pick the target with probability lambda(y,z)/lambda(y), then accept with
/// probability r(y,z;s)/lambda(y,z) at the candidate time s. The three draws
/// happen in exactly that order, which pins the trajectory for a given seed.
inline Path sample_path(const RateProtocol& p, StateId x0, std::size_t n_periods,
                        std::uint64_t seed, ThinningStats* stats = nullptr) {
    const Graph& g = p.graph();
    if (x0 >= g.num_states()) throw std::invalid_argument("sample_path: bad initial state");
    if (n_periods == 0) throw std::invalid_argument("sample_path: need at least one period");

    std::vector<double> env_edge(g.num_edges());
    for (std::size_t e = 0; e < g.num_edges(); ++e) env_edge[e] = p.sup_rate(e);
    std::vector<double> env_state(g.num_states(), 0.0);
    for (StateId y = 0; y < g.num_states(); ++y)
        for (std::size_t e : g.out_edges(y)) env_state[y] += env_edge[e];

    Path path;
    path.initial_state = x0;
    path.n_periods = n_periods;
    path.seed = seed;
    if (stats) {
        stats->candidates.assign(g.num_edges(), 0);
        stats->accepted.assign(g.num_edges(), 0);
    }

    Rng rng(seed);
    const double horizon = p.period() * static_cast<double>(n_periods);
    double t = 0.0;
    StateId y = x0;
    while (true) {
        double lam = env_state[y];
        double s = t + rng.exponential(lam);
        if (s > horizon) break;
        // pick candidate target proportionally to the edge envelopes
        double u = rng.uniform() * lam;
        std::size_t chosen = g.out_edges(y).back();
        double acc = 0.0;
        for (std::size_t e : g.out_edges(y)) {
            acc += env_edge[e];
            if (u < acc) {
                chosen = e;
                break;
            }
        }
        double accept = p.rate(chosen, p.bin_of(s)) / env_edge[chosen];
        if (stats) ++stats->candidates[chosen];
        if (rng.uniform() < accept) {
            StateId z = g.edges()[chosen].second;
            path.events.push_back({s, y, z});
            y = z;
            if (stats) ++stats->accepted[chosen];
        }
        t = s;
    }
    return path;
}

// ---------------------------------------------------------------------------
// Empirical measure / flow / current extraction

struct EmpiricalTriple {
    PeriodicDensity mu;  // occupation fraction per (state, bin)
    PeriodicFlow q;      // jumps per unit time per (edge, bin)
    PeriodicCurrent j;   // antisymmetrized q
    std::vector<double> bar_mu;
    std::vector<double> bar_q;
    std::vector<double> bar_j;
    std::size_t total_jumps = 0;
};

namespace detail {

/// Adds the sojourn [a,b) at state x to the per-bin occupancy table. Whole
/// periods and whole bins are counted arithmetically, so the walk cannot
/// stall on bin edges.
inline void add_occupancy(std::vector<std::vector<double>>& occ, StateId x, double a, double b,
                          double period, std::size_t bins) {
    if (b <= a) return;
    const double delta = period / static_cast<double>(bins);
    double len = b - a;
    double full = std::floor(len / period);
    if (full >= 1.0) {
        for (std::size_t k = 0; k < bins; ++k) occ[x][k] += full * delta;
        len -= full * period;
        if (len <= 0.0) return;
    }
    double u = std::fmod(a, period);
    if (u < 0.0) u += period;
    auto k0 = static_cast<std::size_t>(u / delta);
    if (k0 >= bins) k0 = bins - 1;
    double head = (static_cast<double>(k0) + 1.0) * delta - u;
    head = std::max(head, 0.0);
    if (len <= head) {
        occ[x][k0] += len;
        return;
    }
    occ[x][k0] += head;
    len -= head;
    auto whole = static_cast<std::size_t>(std::floor(len / delta));
    if (whole > bins) whole = bins; // rounding guard; len < period here
    for (std::size_t i = 1; i <= whole; ++i) occ[x][(k0 + i) % bins] += delta;
    len -= static_cast<double>(whole) * delta;
    if (len > 0.0) occ[x][(k0 + whole + 1) % bins] += len;
}

} // namespace detail

/// Bins a path into its empirical triple. Occupation times are computed
/// exactly from the event times; each bin column of mu is normalized to unit
/// mass; q counts jumps per unit time, with boundary-sitting jumps assigned
/// to the bin on the right.
inline EmpiricalTriple accumulate(const Path& path, const RateProtocol& p, std::size_t bins) {
    const Graph& g = p.graph();
    const double period = p.period();
    const double n = static_cast<double>(path.n_periods);
    const double horizon = period * n;
    const double delta = period / static_cast<double>(bins);

    EmpiricalTriple t;
    t.mu = PeriodicDensity(period, bins, g.num_states());
    t.q = PeriodicFlow(period, bins, g.num_edges());

    std::vector<std::vector<double>> occ(g.num_states(), std::vector<double>(bins, 0.0));
    double prev_time = 0.0;
    StateId state = path.initial_state;
    for (const auto& ev : path.events) {
        if (ev.from != state)
            throw std::invalid_argument("accumulate: events do not chain");
        detail::add_occupancy(occ, state, prev_time, ev.time, period, bins);
        double u = std::fmod(ev.time, period);
        if (u < 0.0) u += period;
        auto k = static_cast<std::size_t>(u / delta);
        if (k >= bins) k = bins - 1;
        std::size_t e = g.edge_index(ev.from, ev.to);
        if (e == Graph::npos) throw std::invalid_argument("accumulate: event on a non-edge");
        t.q.at(e, k) += 1.0;
        state = ev.to;
        prev_time = ev.time;
    }
    detail::add_occupancy(occ, state, prev_time, horizon, period, bins);

    for (StateId y = 0; y < g.num_states(); ++y)
        for (std::size_t k = 0; k < bins; ++k) t.mu.at(y, k) = occ[y][k] / (n * delta);
    t.mu.normalize_bins();
    for (std::size_t e = 0; e < g.num_edges(); ++e)
        for (std::size_t k = 0; k < bins; ++k) t.q.at(e, k) /= n * delta;

    t.j = current_from_flow(g, t.q);
    t.bar_mu = t.mu.time_average();
    t.bar_q = t.q.time_average();
    t.bar_j.assign(g.num_sym_pairs(), 0.0);
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        for (std::size_t k = 0; k < bins; ++k) t.bar_j[s] += t.j.at(s, k);
        t.bar_j[s] /= static_cast<double>(bins);
    }
    t.total_jumps = path.events.size();
    return t;
}

/// Boundary occupancy eta[x][k] = (1/n) sum_j 1(X_{jT0 + k*delta} = x),
/// sampled just after each bin boundary (cadlag).
inline std::vector<std::vector<double>> boundary_occupancy(const Path& path, double period,
                                                           std::size_t bins) {
    const double delta = period / static_cast<double>(bins);
    const double n = static_cast<double>(path.n_periods);
    std::vector<std::vector<double>> eta(0);
    eta.clear();
    std::size_t num_states = 0;
    num_states = std::max<std::size_t>(path.initial_state + 1, 1);
    for (const auto& ev : path.events)
        num_states = std::max({num_states, static_cast<std::size_t>(ev.from) + 1,
                               static_cast<std::size_t>(ev.to) + 1});
    eta.assign(num_states, std::vector<double>(bins, 0.0));

    std::size_t next_event = 0;
    StateId state = path.initial_state;
    for (std::size_t j = 0; j < path.n_periods; ++j)
        for (std::size_t k = 0; k < bins; ++k) {
            double t = (static_cast<double>(j) * static_cast<double>(bins) +
                        static_cast<double>(k)) * delta;
            while (next_event < path.events.size() && path.events[next_event].time <= t)
                state = path.events[next_event++].to;
            eta[state][k] += 1.0 / n;
        }
    return eta;
}

/// Exact binned conservation identity: per (state, bin), net jump count into
/// the state during the bin equals the boundary-occupancy increment, with the
/// single initial/final boundary term closing the period wrap. Returns the
/// max-norm residual, which is zero up to rounding for any path.
inline double conservation_residual(const Path& path, const RateProtocol& p, std::size_t bins) {
    const Graph& g = p.graph();
    const double n = static_cast<double>(path.n_periods);
    const double period = p.period();
    const double delta = period / static_cast<double>(bins);

    std::vector<std::vector<double>> net(g.num_states(), std::vector<double>(bins, 0.0));
    for (const auto& ev : path.events) {
        double u = std::fmod(ev.time, period);
        if (u < 0.0) u += period;
        auto k = static_cast<std::size_t>(u / delta);
        if (k >= bins) k = bins - 1;
        net[ev.to][k] += 1.0 / n;
        net[ev.from][k] -= 1.0 / n;
    }
    auto eta = boundary_occupancy(path, period, bins);
    double worst = 0.0;
    for (StateId x = 0; x < g.num_states(); ++x)
        for (std::size_t k = 0; k < bins; ++k) {
            double eta_next = (k + 1 < bins)
                                  ? eta[x][k + 1]
                                  : eta[x][0] + ((path.final_state() == x ? 1.0 : 0.0) -
                                                 (path.initial_state == x ? 1.0 : 0.0)) / n;
            worst = std::max(worst, std::abs(net[x][k] - (eta_next - eta[x][k])));
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Path-level entropy flows (per period, boundary terms excluded)

struct PathEntropyFlows {
    double naive = 0.0; // backward rates r(.,.;T0-t)
    double tot = 0.0;   // reversed protocol; time integral cancels exactly
    double ex = 0.0;    // dual reversed protocol, jump form in w
    StateId first = 0, last = 0;
};

/// Evaluates the three entropy flows along a path, each divided by the number
/// of periods. Requires E = E_s and a strictly positive weight field w (the
/// accompanying distribution for the excess flow).
inline PathEntropyFlows path_entropy_flows(const Path& path, const RateProtocol& p,
                                           const PeriodicDensity& w) {
    const Graph& g = p.graph();
    if (!g.is_symmetric())
        throw std::invalid_argument("path_entropy_flows: requires E = E_s");
    if (w.bins != p.bins() || w.num_states() != g.num_states())
        throw std::invalid_argument("path_entropy_flows: weight grid mismatch");
    for (StateId y = 0; y < g.num_states(); ++y)
        for (std::size_t k = 0; k < w.bins; ++k)
            if (!(w.at(y, k) > 0.0))
                throw std::invalid_argument("path_entropy_flows: weight must be positive");

    const std::size_t m = p.bins();
    const double n = static_cast<double>(path.n_periods);

    PathEntropyFlows out;
    out.first = path.initial_state;
    out.last = path.final_state();

    for (const auto& ev : path.events) {
        std::size_t k = p.bin_of(ev.time);
        std::size_t kr = m - 1 - k; // bin of T0 - t
        std::size_t e_fwd = g.edge_index(ev.from, ev.to);
        std::size_t e_bwd = g.edge_index(ev.to, ev.from);
        out.naive += std::log(p.rate(e_fwd, k) / p.rate(e_bwd, kr));
        out.tot += std::log(p.rate(e_fwd, k) / p.rate(e_bwd, k));
        out.ex += std::log(w.at(ev.to, k) / w.at(ev.from, k));
    }

    // time-integral term of the naive flow; occupancy times are exact
    std::vector<std::vector<double>> occ(g.num_states(), std::vector<double>(m, 0.0));
    double prev_time = 0.0;
    StateId state = path.initial_state;
    for (const auto& ev : path.events) {
        detail::add_occupancy(occ, state, prev_time, ev.time, p.period(), m);
        state = ev.to;
        prev_time = ev.time;
    }
    detail::add_occupancy(occ, state, prev_time, p.period() * n, p.period(), m);
    for (StateId y = 0; y < g.num_states(); ++y)
        for (std::size_t k = 0; k < m; ++k)
            out.naive -= occ[y][k] * (p.exit_rate(y, k) - p.exit_rate(y, m - 1 - k));

    out.naive /= n;
    out.tot /= n;
    out.ex /= n;
    return out;
}

} // namespace pmc
