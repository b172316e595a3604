#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmc/graph.hpp"

namespace pmc {

/// Periodic jump-rate field r(y,z;t), piecewise constant on M uniform bins
/// of [0,T0). Bin k covers [k*T0/M, (k+1)*T0/M); tabulated values are taken
/// at bin midpoints when built from a closed form.
class RateProtocol {
public:
    RateProtocol(Graph graph, double period, std::size_t bins,
                 std::vector<std::vector<double>> rates,
                 std::vector<double> breakpoints = {})
        : graph_(std::move(graph)), period_(period), bins_(bins),
          rates_(std::move(rates)), breakpoints_(std::move(breakpoints)) {
        if (!(period_ > 0.0)) throw std::invalid_argument("protocol: period must be positive");
        if (bins_ == 0) throw std::invalid_argument("protocol: bins must be positive");
        if (rates_.size() != graph_.num_edges())
            throw std::invalid_argument("protocol: rate table must have one row per edge");
        for (const auto& row : rates_)
            if (row.size() != bins_)
                throw std::invalid_argument("protocol: rate row must have one entry per bin");
    }

    const Graph& graph() const { return graph_; }
    double period() const { return period_; }
    std::size_t bins() const { return bins_; }
    double bin_width() const { return period_ / static_cast<double>(bins_); }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<std::vector<double>>& rate_table() const { return rates_; }

    double rate(std::size_t edge, std::size_t bin) const { return rates_[edge][bin]; }

    /// r(y,z; bin), zero if (y,z) is not an edge.
    double rate(StateId y, StateId z, std::size_t bin) const {
        std::size_t e = graph_.edge_index(y, z);
        return e == Graph::npos ? 0.0 : rates_[e][bin];
    }

    /// Total exit rate r(y; bin) = sum_z r(y,z; bin).
    double exit_rate(StateId y, std::size_t bin) const {
        double s = 0.0;
        for (std::size_t e : graph_.out_edges(y)) s += rates_[e][bin];
        return s;
    }

    /// sup_t r(y,z;t) over the tabulated field (per-edge thinning envelope).
    double sup_rate(std::size_t edge) const {
        double m = 0.0;
        for (double v : rates_[edge]) m = std::max(m, v);
        return m;
    }

    double max_rate() const {
        double m = 0.0;
        for (std::size_t e = 0; e < graph_.num_edges(); ++e) m = std::max(m, sup_rate(e));
        return m;
    }

    double max_exit_rate() const {
        double m = 0.0;
        for (StateId y = 0; y < graph_.num_states(); ++y)
            for (std::size_t k = 0; k < bins_; ++k) m = std::max(m, exit_rate(y, k));
        return m;
    }

    /// Bin containing time t (taken mod T0); boundary times go to the right bin.
    std::size_t bin_of(double t) const {
        double u = std::fmod(t, period_);
        if (u < 0.0) u += period_;
        auto k = static_cast<std::size_t>(u / bin_width());
        return k >= bins_ ? bins_ - 1 : k;
    }

    double bin_midpoint(std::size_t k) const {
        return (static_cast<double>(k) + 0.5) * bin_width();
    }

private:
    Graph graph_;
    double period_;
    std::size_t bins_;
    std::vector<std::vector<double>> rates_; // [edge][bin]
    std::vector<double> breakpoints_;        // protocol discontinuities in [0,T0)
};

// ---------------------------------------------------------------------------
// Validation of the standing assumptions

struct Violation {
    std::string assumption; // "A1", "A2", "A3", "A4"
    std::string detail;
};

/// Returns every violated assumption; empty result means the protocol is valid.
/// A1/A3-lower: all tabulated rates strictly positive on every bin;
/// A3-upper: all rates finite; A2: strong connectivity;
/// A4: breakpoints, if given, lie on bin boundaries.
inline std::vector<Violation> validate_protocol(const RateProtocol& p) {
    std::vector<Violation> out;
    const Graph& g = p.graph();
    if (!g.strongly_connected())
        out.push_back({"A2", "directed graph is not strongly connected"});
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        for (std::size_t k = 0; k < p.bins(); ++k) {
            double r = p.rate(e, k);
            if (!(r > 0.0)) {
                std::ostringstream os;
                os << "rate(" << g.name_of(y) << "," << g.name_of(z) << ") nonpositive in bin " << k;
                out.push_back({"A1/A3", os.str()});
                break;
            }
            if (!std::isfinite(r)) {
                std::ostringstream os;
                os << "rate(" << g.name_of(y) << "," << g.name_of(z) << ") not finite in bin " << k;
                out.push_back({"A3", os.str()});
                break;
            }
        }
    }
    const double dt = p.bin_width();
    for (double b : p.breakpoints()) {
        if (b < 0.0 || b >= p.period()) {
            out.push_back({"A4", "breakpoint outside [0,T0)"});
            continue;
        }
        double q = b / dt;
        if (std::abs(q - std::round(q)) > 1e-9 * static_cast<double>(p.bins()))
            out.push_back({"A4", "breakpoint not aligned with a bin boundary"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shipped two-state example protocols

enum class ExampleModel { quantum_dot, defect_center, stochastic_resonance, piecewise };

/// Parameter bundle for the named two-state models. Only the fields used by
/// the chosen model are read.
struct ExampleParams {
    // quantum_dot: r(0,1) = gamma/(1+e^{x_t}), r(1,0) = gamma e^{x_t}/(1+e^{x_t}),
    // x_t = x_offset + x_amplitude * sin(2 pi t / T0)
    double gamma = 1.0;
    double x_amplitude = 1.0;
    double x_offset = 0.0;
    // defect_center: r(0,1) = a0 (1 + gamma_mod sin(2 pi t/T0)), r(1,0) = b0
    double a0 = 1.0;
    double gamma_mod = 0.5;
    double b0 = 2.0;
    // stochastic_resonance: r(0,1) = e^{-k cos(2 pi t/T0)}, r(1,0) = e^{k cos(2 pi t/T0)}
    double k = 1.0;
    // piecewise: h_t = h0 - a on [0, alpha T0), h0 + a after; r(0,1)=e^{-h_t}, r(1,0)=e^{h_t}
    double h0 = 0.0;
    double a = 1.0;
    double alpha = 0.5;
};

inline ExampleModel example_model_from_name(const std::string& name) {
    if (name == "quantum_dot") return ExampleModel::quantum_dot;
    if (name == "defect_center") return ExampleModel::defect_center;
    if (name == "stochastic_resonance") return ExampleModel::stochastic_resonance;
    if (name == "piecewise") return ExampleModel::piecewise;
    throw std::invalid_argument("unknown example model: " + name);
}

inline Graph two_state_graph() {
    return Graph({"0", "1"}, {{0, 1}, {1, 0}});
}

/// Tabulates one of the four shipped models at bin midpoints. For the
/// piecewise model alpha is rounded to the nearest bin boundary; the value
/// actually used is written back to effective_alpha when given.
inline RateProtocol build_example(ExampleModel model, const ExampleParams& prm,
                                  double period, std::size_t bins,
                                  double* effective_alpha = nullptr) {
    if (!(period > 0.0)) throw std::invalid_argument("build_example: period must be positive");
    if (bins < 2) throw std::invalid_argument("build_example: need at least 2 bins");

    std::vector<double> r01(bins), r10(bins);
    std::vector<double> breakpoints;
    constexpr double two_pi = 6.283185307179586476925286766559;

    switch (model) {
    case ExampleModel::quantum_dot: {
        if (!(prm.gamma > 0.0)) throw std::invalid_argument("quantum_dot: gamma must be positive");
        for (std::size_t k = 0; k < bins; ++k) {
            double t = (static_cast<double>(k) + 0.5) * period / static_cast<double>(bins);
            double x = prm.x_offset + prm.x_amplitude * std::sin(two_pi * t / period);
            double ex = std::exp(x);
            r01[k] = prm.gamma / (1.0 + ex);
            r10[k] = prm.gamma * ex / (1.0 + ex);
        }
        break;
    }
    case ExampleModel::defect_center: {
        if (!(prm.a0 > 0.0) || !(prm.b0 > 0.0))
            throw std::invalid_argument("defect_center: a0 and b0 must be positive");
        if (!(std::abs(prm.gamma_mod) < 1.0))
            throw std::invalid_argument("defect_center: |gamma| must be < 1 to keep rates positive");
        for (std::size_t k = 0; k < bins; ++k) {
            double t = (static_cast<double>(k) + 0.5) * period / static_cast<double>(bins);
            r01[k] = prm.a0 * (1.0 + prm.gamma_mod * std::sin(two_pi * t / period));
            r10[k] = prm.b0;
        }
        break;
    }
    case ExampleModel::stochastic_resonance: {
        for (std::size_t k = 0; k < bins; ++k) {
            double t = (static_cast<double>(k) + 0.5) * period / static_cast<double>(bins);
            double c = std::cos(two_pi * t / period);
            r01[k] = std::exp(-prm.k * c);
            r10[k] = std::exp(prm.k * c);
        }
        break;
    }
    case ExampleModel::piecewise: {
        if (!(prm.alpha > 0.0 && prm.alpha < 1.0))
            throw std::invalid_argument("piecewise: alpha must lie in (0,1)");
        // snap alpha to the bin grid so the jump sits on a bin boundary
        double cut = std::round(prm.alpha * static_cast<double>(bins));
        cut = std::min(std::max(cut, 1.0), static_cast<double>(bins) - 1.0);
        double alpha_eff = cut / static_cast<double>(bins);
        if (effective_alpha) *effective_alpha = alpha_eff;
        for (std::size_t k = 0; k < bins; ++k) {
            double h = (static_cast<double>(k) < cut) ? prm.h0 - prm.a : prm.h0 + prm.a;
            r01[k] = std::exp(-h);
            r10[k] = std::exp(h);
        }
        breakpoints = {0.0, alpha_eff * period};
        break;
    }
    }

    return RateProtocol(two_state_graph(), period, bins, {std::move(r01), std::move(r10)},
                        std::move(breakpoints));
}

// ---------------------------------------------------------------------------
// Protocol reversal

/// r^R(y,z;t) = r(y,z;T0-t): time reflection maps bin k to bin M-1-k,
/// an exact involution on the tables.
inline RateProtocol reversed_protocol(const RateProtocol& p) {
    const std::size_t m = p.bins();
    std::vector<std::vector<double>> rates(p.graph().num_edges(), std::vector<double>(m));
    for (std::size_t e = 0; e < rates.size(); ++e)
        for (std::size_t k = 0; k < m; ++k)
            rates[e][k] = p.rate(e, m - 1 - k);
    std::vector<double> bps;
    for (double b : p.breakpoints()) {
        double rb = std::fmod(p.period() - b, p.period());
        bps.push_back(rb < 0 ? rb + p.period() : rb);
    }
    return RateProtocol(p.graph(), p.period(), m, std::move(rates), std::move(bps));
}

} // namespace pmc
