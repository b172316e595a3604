#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmc/protocol.hpp"

namespace pmc {

inline constexpr double tol_mass_default = 1e-12;
inline constexpr double tol_zero_default = 1e-12;

/// Grid representation of mu_t: values[state][bin], each bin a probability
/// vector over states.
struct PeriodicDensity {
    double period = 1.0;
    std::size_t bins = 0;
    std::vector<std::vector<double>> values; // [state][bin]

    PeriodicDensity() = default;
    PeriodicDensity(double period_, std::size_t bins_, std::size_t num_states)
        : period(period_), bins(bins_),
          values(num_states, std::vector<double>(bins_, 0.0)) {}

    std::size_t num_states() const { return values.size(); }
    double& at(StateId y, std::size_t k) { return values[y][k]; }
    double at(StateId y, std::size_t k) const { return values[y][k]; }

    double bin_mass(std::size_t k) const {
        double s = 0.0;
        for (const auto& row : values) s += row[k];
        return s;
    }

    /// Rescales every bin column to unit mass.
    void normalize_bins() {
        for (std::size_t k = 0; k < bins; ++k) {
            double s = bin_mass(k);
            if (s > 0.0)
                for (auto& row : values) row[k] /= s;
        }
    }

    /// Time average over the period, a probability vector on states.
    std::vector<double> time_average() const {
        std::vector<double> avg(num_states(), 0.0);
        for (std::size_t y = 0; y < num_states(); ++y) {
            for (std::size_t k = 0; k < bins; ++k) avg[y] += values[y][k];
            avg[y] /= static_cast<double>(bins);
        }
        return avg;
    }
};

/// Grid representation of a nonnegative flow Q_t: values[edge][bin],
/// edge indexing follows Graph::edges().
struct PeriodicFlow {
    double period = 1.0;
    std::size_t bins = 0;
    std::vector<std::vector<double>> values; // [edge][bin]

    PeriodicFlow() = default;
    PeriodicFlow(double period_, std::size_t bins_, std::size_t num_edges)
        : period(period_), bins(bins_),
          values(num_edges, std::vector<double>(bins_, 0.0)) {}

    std::size_t num_edges() const { return values.size(); }
    double& at(std::size_t e, std::size_t k) { return values[e][k]; }
    double at(std::size_t e, std::size_t k) const { return values[e][k]; }

    std::vector<double> time_average() const {
        std::vector<double> avg(num_edges(), 0.0);
        for (std::size_t e = 0; e < num_edges(); ++e) {
            for (std::size_t k = 0; k < bins; ++k) avg[e] += values[e][k];
            avg[e] /= static_cast<double>(bins);
        }
        return avg;
    }
};

/// Antisymmetric current J_t on the symmetrized edge set, stored once per
/// unordered pair with the orientation of Graph::sym_pairs() (low -> high).
struct PeriodicCurrent {
    double period = 1.0;
    std::size_t bins = 0;
    std::vector<std::vector<double>> values; // [sym_pair][bin], oriented low->high

    PeriodicCurrent() = default;
    PeriodicCurrent(double period_, std::size_t bins_, std::size_t num_pairs)
        : period(period_), bins(bins_),
          values(num_pairs, std::vector<double>(bins_, 0.0)) {}

    std::size_t num_pairs() const { return values.size(); }
    double& at(std::size_t s, std::size_t k) { return values[s][k]; }
    double at(std::size_t s, std::size_t k) const { return values[s][k]; }

    /// Signed value J(y,z) at a bin; antisymmetry holds by construction.
    double oriented(const Graph& g, StateId y, StateId z, std::size_t k) const {
        std::size_t s = g.sym_pair_index(y, z);
        if (s == Graph::npos) throw std::invalid_argument("current: not a symmetrized edge");
        return y < z ? values[s][k] : -values[s][k];
    }
};

/// Flow -> current map (antisymmetrization), J(y,z) = Q(y,z) - Q(z,y).
inline PeriodicCurrent current_from_flow(const Graph& g, const PeriodicFlow& q) {
    PeriodicCurrent j(q.period, q.bins, g.num_sym_pairs());
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [y, z] = g.sym_pairs()[s];
        std::size_t ef = g.edge_index(y, z), eb = g.edge_index(z, y);
        for (std::size_t k = 0; k < q.bins; ++k) {
            double fwd = ef == Graph::npos ? 0.0 : q.at(ef, k);
            double bwd = eb == Graph::npos ? 0.0 : q.at(eb, k);
            j.at(s, k) = fwd - bwd;
        }
    }
    return j;
}

// ---------------------------------------------------------------------------
// Divergence and the continuity equation
//
// Flows and currents share one accumulation order (per symmetrized pair), so
// div Q and div J(Q) agree bitwise.

inline std::vector<double> divergence_column(const Graph& g, const PeriodicFlow& q,
                                             std::size_t k) {
    std::vector<double> div(g.num_states(), 0.0);
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [y, z] = g.sym_pairs()[s];
        std::size_t ef = g.edge_index(y, z), eb = g.edge_index(z, y);
        double net = (ef == Graph::npos ? 0.0 : q.at(ef, k)) -
                     (eb == Graph::npos ? 0.0 : q.at(eb, k));
        div[y] += net;
        div[z] -= net;
    }
    return div;
}

inline std::vector<double> divergence_column(const Graph& g, const PeriodicCurrent& j,
                                             std::size_t k) {
    std::vector<double> div(g.num_states(), 0.0);
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [y, z] = g.sym_pairs()[s];
        double net = j.at(s, k); // oriented y->z with y<z
        div[y] += net;
        div[z] -= net;
    }
    return div;
}

template <typename FlowOrCurrent>
double divergence(const Graph& g, const FlowOrCurrent& q, StateId y, std::size_t k) {
    return divergence_column(g, q, k)[y];
}

/// max over (state,bin) of |d/dt mu + div Q| with the periodic forward
/// difference d/dt mu[y][k] = (mu[y][k+1 mod M] - mu[y][k]) * M/T0.
template <typename FlowOrCurrent>
double continuity_residual(const Graph& g, const PeriodicDensity& mu, const FlowOrCurrent& q) {
    if (mu.bins != q.bins) throw std::invalid_argument("continuity_residual: bin mismatch");
    const std::size_t m = mu.bins;
    const double scale = static_cast<double>(m) / mu.period;
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        auto div = divergence_column(g, q, k);
        for (std::size_t y = 0; y < g.num_states(); ++y) {
            double dmu = (mu.at(y, (k + 1) % m) - mu.at(y, k)) * scale;
            worst = std::max(worst, std::abs(dmu + div[y]));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Membership in the admissible sets

struct MembershipTolerances {
    double mass = tol_mass_default;
    double cont = 1e-8;  // continuity residual; O(1/M) data needs a looser value
    double zero = tol_zero_default;
};

/// Which admissibility item failed (numbering follows the set definitions:
/// mass per bin, continuity, support compatibility, one-way sign constraint).
enum class LambdaItem { none, shape, mass, continuity, support, sign };

struct MembershipReport {
    bool member = true;
    LambdaItem first_failed = LambdaItem::none;
    std::vector<std::string> violations;

    void fail(LambdaItem item, std::string what) {
        if (member) first_failed = item;
        member = false;
        violations.push_back(std::move(what));
    }
};

/// Checks items (i), (iii), (iv) of the flow admissibility set plus
/// nonnegativity. Absolute continuity in time (item (ii)) is built into the
/// grid representation and is not checkable here.
inline MembershipReport lambda_membership(const Graph& g, const PeriodicDensity& mu,
                                          const PeriodicFlow& q,
                                          const MembershipTolerances& tol = {}) {
    MembershipReport rep;
    if (mu.bins != q.bins || mu.num_states() != g.num_states() || q.num_edges() != g.num_edges()) {
        rep.fail(LambdaItem::shape, "shape mismatch");
        return rep;
    }
    for (std::size_t k = 0; k < mu.bins; ++k) {
        if (std::abs(mu.bin_mass(k) - 1.0) > tol.mass) {
            std::ostringstream os;
            os << "(i) bin " << k << " mass " << mu.bin_mass(k) << " != 1";
            rep.fail(LambdaItem::mass, os.str());
            break;
        }
    }
    for (std::size_t y = 0; y < g.num_states(); ++y)
        for (std::size_t k = 0; k < mu.bins; ++k)
            if (mu.at(y, k) < -tol.zero) {
                rep.fail(LambdaItem::mass, "(i) negative density entry");
                y = g.num_states();
                break;
            }
    for (std::size_t e = 0; e < q.num_edges(); ++e)
        for (std::size_t k = 0; k < q.bins; ++k)
            if (q.at(e, k) < -tol.zero) {
                rep.fail(LambdaItem::mass, "negative flow entry");
                e = q.num_edges();
                break;
            }
    double res = continuity_residual(g, mu, q);
    if (res > tol.cont) {
        std::ostringstream os;
        os << "(iii) continuity residual " << res << " > " << tol.cont;
        rep.fail(LambdaItem::continuity, os.str());
    }
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        StateId y = g.edges()[e].first;
        for (std::size_t k = 0; k < q.bins; ++k)
            if (mu.at(y, k) < tol.zero && q.at(e, k) > tol.zero) {
                std::ostringstream os;
                os << "(iv) flow out of empty state " << g.name_of(y) << " in bin " << k;
                rep.fail(LambdaItem::support, os.str());
                e = g.num_edges();
                break;
            }
    }
    return rep;
}

/// Items (i), (iii), (iv), (v) of the current admissibility set.
inline MembershipReport lambda_a_membership(const Graph& g, const PeriodicDensity& mu,
                                            const PeriodicCurrent& j,
                                            const MembershipTolerances& tol = {}) {
    MembershipReport rep;
    if (mu.bins != j.bins || mu.num_states() != g.num_states() ||
        j.num_pairs() != g.num_sym_pairs()) {
        rep.fail(LambdaItem::shape, "shape mismatch");
        return rep;
    }
    for (std::size_t k = 0; k < mu.bins; ++k) {
        if (std::abs(mu.bin_mass(k) - 1.0) > tol.mass) {
            std::ostringstream os;
            os << "(i) bin " << k << " mass " << mu.bin_mass(k) << " != 1";
            rep.fail(LambdaItem::mass, os.str());
            break;
        }
    }
    double res = continuity_residual(g, mu, j);
    if (res > tol.cont) {
        std::ostringstream os;
        os << "(iii) continuity residual " << res << " > " << tol.cont;
        rep.fail(LambdaItem::continuity, os.str());
    }
    // (iv): an empty state supports no outgoing current
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [y, z] = g.sym_pairs()[s];
        for (std::size_t k = 0; k < j.bins; ++k) {
            if (mu.at(y, k) < tol.zero && j.at(s, k) > tol.zero)
                rep.fail(LambdaItem::support, "(iv) positive current out of empty state " + g.name_of(y));
            if (mu.at(z, k) < tol.zero && -j.at(s, k) > tol.zero)
                rep.fail(LambdaItem::support, "(iv) positive current out of empty state " + g.name_of(z));
            if (!rep.member) break;
        }
        if (!rep.member) break;
    }
    // (v): one-way edges fix the sign
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [y, z] = g.sym_pairs()[s];
        bool fwd = g.has_edge(y, z), bwd = g.has_edge(z, y);
        if (fwd && bwd) continue;
        for (std::size_t k = 0; k < j.bins; ++k) {
            double oriented = fwd ? j.at(s, k) : -j.at(s, k); // along the existing edge
            if (oriented < -tol.zero) {
                std::ostringstream os;
                os << "(v) current against one-way edge " << g.name_of(y) << "," << g.name_of(z)
                   << " in bin " << k;
                rep.fail(LambdaItem::sign, os.str());
                break;
            }
        }
        if (!rep.member) break;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Dual reversed protocol r^DR(y,z;t) = w_{T0-t}^{-1}(y) r(z,y;T0-t) w_{T0-t}(z).
// Lives here because it conjugates a protocol by a periodic density.

inline RateProtocol dual_reversed_protocol(const RateProtocol& p, const PeriodicDensity& w) {
    const Graph& g = p.graph();
    if (!g.is_symmetric())
        throw std::invalid_argument("dual_reversed_protocol: requires E = E_s");
    if (w.bins != p.bins() || w.num_states() != g.num_states())
        throw std::invalid_argument("dual_reversed_protocol: weight grid mismatch");
    for (std::size_t y = 0; y < g.num_states(); ++y)
        for (std::size_t k = 0; k < w.bins; ++k)
            if (!(w.at(y, k) > 0.0))
                throw std::invalid_argument("dual_reversed_protocol: weight must be strictly positive");

    const std::size_t m = p.bins();
    std::vector<std::vector<double>> rates(g.num_edges(), std::vector<double>(m));
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        std::size_t erev = g.edge_index(z, y);
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t kr = m - 1 - k; // bin of T0 - t
            rates[e][k] = p.rate(erev, kr) * w.at(z, kr) / w.at(y, kr);
        }
    }
    std::vector<double> bps;
    for (double b : p.breakpoints()) {
        double rb = std::fmod(p.period() - b, p.period());
        bps.push_back(rb < 0 ? rb + p.period() : rb);
    }
    return RateProtocol(g, p.period(), m, std::move(rates), std::move(bps));
}

} // namespace pmc
