#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pmc/grid.hpp"
#include "pmc/protocol.hpp"
#include "pmc/rng.hpp"

namespace pmc {

/// Amplitudes of the random admissible pairs. The duality residuals of the
/// discretization scale like amplitude^2 / M, so these defaults keep the
/// checks well inside their tolerances at M = 256 while staying far above
/// roundoff.
struct LambdaSampleOptions {
    double mu_amplitude = 2e-3;
    double q_amplitude = 2e-3;
    std::size_t harmonics = 2;
};

struct LambdaSample {
    PeriodicDensity mu;
    PeriodicFlow q;
};

namespace detail {

struct HarmonicField {
    std::vector<double> amp, phase; // one entry per harmonic

    static HarmonicField draw(Rng& rng, std::size_t harmonics, double amplitude) {
        HarmonicField f;
        for (std::size_t h = 0; h < harmonics; ++h) {
            f.amp.push_back(amplitude * (2.0 * rng.uniform() - 1.0) /
                            static_cast<double>(h + 1));
            f.phase.push_back(2.0 * 3.14159265358979323846 * rng.uniform());
        }
        return f;
    }

    double at(double t, double period) const {
        double v = 0.0;
        for (std::size_t h = 0; h < amp.size(); ++h)
            v += amp[h] * std::sin(2.0 * 3.14159265358979323846 *
                                       static_cast<double>(h + 1) * t / period +
                                   phase[h]);
        return v;
    }
};

/// BFS spanning tree over the symmetrized support; parent[root] = root.
inline std::vector<StateId> spanning_tree(const Graph& g) {
    std::vector<StateId> parent(g.num_states(), Graph::npos);
    std::vector<StateId> order{0};
    parent[0] = 0;
    for (std::size_t head = 0; head < order.size(); ++head) {
        StateId y = order[head];
        for (const auto& [a, b] : g.sym_pairs()) {
            StateId other = Graph::npos;
            if (a == y) other = b;
            if (b == y) other = a;
            if (other != Graph::npos && parent[other] == Graph::npos) {
                parent[other] = y;
                order.push_back(other);
            }
        }
    }
    for (StateId y = 0; y < g.num_states(); ++y)
        if (parent[y] == Graph::npos)
            throw std::runtime_error("spanning_tree: graph support not connected");
    return parent;
}

} // namespace detail

/// Constructive draw of an interior admissible pair: a gently modulated
/// density (normalized per bin), a flow near mu*r with symmetric noise, and
/// a spanning-tree correction that enforces the discrete continuity equation
/// exactly. Requires E = E_s so tree corrections can flow both ways.
inline LambdaSample random_lambda_member(const RateProtocol& p, std::uint64_t seed,
                                         const LambdaSampleOptions& opt = {}) {
    const Graph& g = p.graph();
    if (!g.is_symmetric())
        throw std::invalid_argument("random_lambda_member: requires E = E_s");
    const std::size_t V = g.num_states(), M = p.bins();
    const double period = p.period();
    Rng rng(seed);

    LambdaSample s;
    s.mu = PeriodicDensity(period, M, V);
    s.q = PeriodicFlow(period, M, g.num_edges());

    std::vector<detail::HarmonicField> mu_fields, q_fields;
    for (std::size_t y = 0; y < V; ++y)
        mu_fields.push_back(detail::HarmonicField::draw(rng, opt.harmonics, opt.mu_amplitude));
    for (std::size_t e = 0; e < g.num_edges(); ++e)
        q_fields.push_back(detail::HarmonicField::draw(rng, opt.harmonics, opt.q_amplitude));

    for (std::size_t k = 0; k < M; ++k) {
        double t = p.bin_midpoint(k);
        for (std::size_t y = 0; y < V; ++y) s.mu.at(y, k) = 1.0 + mu_fields[y].at(t, period);
    }
    s.mu.normalize_bins();

    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        StateId y = g.edges()[e].first;
        for (std::size_t k = 0; k < M; ++k) {
            double t = p.bin_midpoint(k);
            s.q.at(e, k) = s.mu.at(y, k) * p.rate(e, k) * (1.0 + q_fields[e].at(t, period));
        }
    }

    // tree repair: force div Q[.,k] = -(mu[.,k+1]-mu[.,k]) M/T0 exactly
    auto parent = detail::spanning_tree(g);
    std::vector<StateId> order;
    {
        // children-before-parents: repeatedly peel leaves
        std::vector<std::size_t> child_count(V, 0);
        for (StateId y = 0; y < V; ++y)
            if (parent[y] != y) ++child_count[parent[y]];
        std::vector<StateId> stack;
        for (StateId y = 0; y < V; ++y)
            if (child_count[y] == 0) stack.push_back(y);
        while (!stack.empty()) {
            StateId y = stack.back();
            stack.pop_back();
            if (parent[y] == y) continue;
            order.push_back(y);
            if (--child_count[parent[y]] == 0) stack.push_back(parent[y]);
        }
    }
    const double scale_t = static_cast<double>(M) / period;
    for (std::size_t k = 0; k < M; ++k) {
        auto div = divergence_column(g, s.q, k);
        std::vector<double> deficit(V);
        for (std::size_t y = 0; y < V; ++y) {
            double target = -(s.mu.at(y, (k + 1) % M) - s.mu.at(y, k)) * scale_t;
            deficit[y] = target - div[y];
        }
        for (StateId y : order) {
            StateId par = parent[y];
            double f = deficit[y];
            if (f >= 0.0)
                s.q.at(g.edge_index(y, par), k) += f;
            else
                s.q.at(g.edge_index(par, y), k) += -f;
            deficit[par] += f;
        }
    }

    for (std::size_t e = 0; e < g.num_edges(); ++e)
        for (std::size_t k = 0; k < M; ++k)
            if (!(s.q.at(e, k) > 0.0))
                throw std::runtime_error(
                    "random_lambda_member: repair pushed a flow nonpositive; lower the amplitudes");
    return s;
}

struct LambdaASample {
    PeriodicDensity mu;
    PeriodicCurrent j;
};

/// Admissible (mu, J): antisymmetrization of a flow draw.
inline LambdaASample random_lambda_a_member(const RateProtocol& p, std::uint64_t seed,
                                            const LambdaSampleOptions& opt = {}) {
    LambdaSample s = random_lambda_member(p, seed, opt);
    return {std::move(s.mu), current_from_flow(p.graph(), s.q)};
}

} // namespace pmc
