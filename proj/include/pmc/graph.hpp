#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pmc {

using StateId = std::size_t;

/// Directed graph on a finite state set, no self-loops.
/// sym_edges is the symmetrization: every edge plus its transpose,
/// stored as ordered pairs so that both orientations appear.
class Graph {
public:
    Graph(std::vector<std::string> states,
          std::vector<std::pair<StateId, StateId>> edges)
        : states_(std::move(states)), edges_(std::move(edges)) {
        const std::size_t v = states_.size();
        if (v == 0) throw std::invalid_argument("graph: empty state set");
        for (const auto& [y, z] : edges_) {
            if (y >= v || z >= v) throw std::invalid_argument("graph: edge endpoint out of range");
            if (y == z) throw std::invalid_argument("graph: self-loop not allowed");
        }
        std::vector<std::pair<StateId, StateId>> sorted = edges_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("graph: duplicate edge");
        build_indices();
    }

    std::size_t num_states() const { return states_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    const std::vector<std::string>& states() const { return states_; }
    const std::vector<std::pair<StateId, StateId>>& edges() const { return edges_; }

    /// Symmetrized edge set as canonically oriented unordered pairs (y < z).
    const std::vector<std::pair<StateId, StateId>>& sym_pairs() const { return sym_pairs_; }
    std::size_t num_sym_pairs() const { return sym_pairs_.size(); }

    bool has_edge(StateId y, StateId z) const { return edge_index(y, z) != npos; }

    /// Index into edges() or npos.
    std::size_t edge_index(StateId y, StateId z) const {
        for (std::size_t e : out_[y])
            if (edges_[e].second == z) return e;
        return npos;
    }

    /// Index into sym_pairs() or npos (order-insensitive).
    std::size_t sym_pair_index(StateId y, StateId z) const {
        if (y > z) std::swap(y, z);
        for (std::size_t s = 0; s < sym_pairs_.size(); ++s)
            if (sym_pairs_[s] == std::make_pair(y, z)) return s;
        return npos;
    }

    const std::vector<std::size_t>& out_edges(StateId y) const { return out_[y]; }
    const std::vector<std::size_t>& in_edges(StateId y) const { return in_[y]; }

    /// E == E_s: every edge has its transpose.
    bool is_symmetric() const {
        for (const auto& [y, z] : edges_)
            if (!has_edge(z, y)) return false;
        return true;
    }

    bool strongly_connected() const {
        return reaches_all(false) && reaches_all(true);
    }

    std::string name_of(StateId y) const { return states_[y]; }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    void build_indices() {
        out_.assign(states_.size(), {});
        in_.assign(states_.size(), {});
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            out_[edges_[e].first].push_back(e);
            in_[edges_[e].second].push_back(e);
        }
        sym_pairs_.clear();
        for (const auto& [y, z] : edges_) {
            auto p = std::minmax(y, z);
            std::pair<StateId, StateId> c{p.first, p.second};
            if (std::find(sym_pairs_.begin(), sym_pairs_.end(), c) == sym_pairs_.end())
                sym_pairs_.push_back(c);
        }
        std::sort(sym_pairs_.begin(), sym_pairs_.end());
    }

    bool reaches_all(bool reversed) const {
        std::vector<char> seen(states_.size(), 0);
        std::vector<StateId> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            StateId y = stack.back();
            stack.pop_back();
            const auto& nbr = reversed ? in_[y] : out_[y];
            for (std::size_t e : nbr) {
                StateId z = reversed ? edges_[e].first : edges_[e].second;
                if (!seen[z]) {
                    seen[z] = 1;
                    stack.push_back(z);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    }

    std::vector<std::string> states_;
    std::vector<std::pair<StateId, StateId>> edges_;
    std::vector<std::pair<StateId, StateId>> sym_pairs_;
    std::vector<std::vector<std::size_t>> out_, in_;
};

} // namespace pmc
