#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "pmc/entropy.hpp"
#include "pmc/grid.hpp"

namespace pmc {

inline constexpr const char* tool_version = "pmc 0.1.0";

/// Metadata stamped into every CSV: tool version, config hash, seed, grid.
struct CsvMeta {
    std::string config_hash = "-";
    std::uint64_t seed = 0;
    std::size_t bins = 0;
    std::size_t periods = 0;
};

namespace detail {

/// 17 significant digits, scientific, locale independent; round-trips
/// doubles exactly.
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{})
        throw std::runtime_error("csv: bad numeric field '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline void write_meta(std::ostream& os, const CsvMeta& meta, const char* kind) {
    os << "# " << tool_version << " kind=" << kind << " config=" << meta.config_hash
       << " seed=" << meta.seed << " bins=" << meta.bins << " periods=" << meta.periods << "\n";
}

} // namespace detail

inline std::string csv_format_double(double v) { return detail::format_double(v); }
inline double csv_parse_double(const std::string& s) { return detail::parse_double(s); }

inline void write_csv_meta(std::ostream& os, const CsvMeta& meta, const char* kind) {
    detail::write_meta(os, meta, kind);
}

// ---------------------------------------------------------------------------
// Grid object export/import: (state|edge, bin, value) triples

inline void write_density(std::ostream& os, const Graph& g, const PeriodicDensity& mu,
                          const CsvMeta& meta) {
    detail::write_meta(os, meta, "density");
    os << "state,bin,value\n";
    for (std::size_t y = 0; y < g.num_states(); ++y)
        for (std::size_t k = 0; k < mu.bins; ++k)
            os << g.name_of(y) << "," << k << "," << detail::format_double(mu.at(y, k)) << "\n";
}

inline void write_flow(std::ostream& os, const Graph& g, const PeriodicFlow& q,
                       const CsvMeta& meta) {
    detail::write_meta(os, meta, "flow");
    os << "from,to,bin,value\n";
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto& [y, z] = g.edges()[e];
        for (std::size_t k = 0; k < q.bins; ++k)
            os << g.name_of(y) << "," << g.name_of(z) << "," << k << ","
               << detail::format_double(q.at(e, k)) << "\n";
    }
}

inline void write_current(std::ostream& os, const Graph& g, const PeriodicCurrent& j,
                          const CsvMeta& meta) {
    detail::write_meta(os, meta, "current");
    os << "from,to,bin,value\n";
    for (std::size_t s = 0; s < g.num_sym_pairs(); ++s) {
        const auto& [y, z] = g.sym_pairs()[s];
        for (std::size_t k = 0; k < j.bins; ++k)
            os << g.name_of(y) << "," << g.name_of(z) << "," << k << ","
               << detail::format_double(j.at(s, k)) << "\n";
    }
}

namespace detail {

inline StateId state_by_name(const Graph& g, const std::string& name) {
    for (StateId y = 0; y < g.num_states(); ++y)
        if (g.name_of(y) == name) return y;
    throw std::runtime_error("csv: unknown state '" + name + "'");
}

template <typename Fn>
void read_rows(std::istream& is, std::size_t expected_fields, Fn&& fn) {
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (!header_seen) { // column header row
            header_seen = true;
            continue;
        }
        if (fields.size() != expected_fields)
            throw std::runtime_error("csv: wrong field count in row '" + line + "'");
        fn(fields);
    }
}

} // namespace detail

inline PeriodicDensity read_density(std::istream& is, const Graph& g, double period,
                                    std::size_t bins) {
    PeriodicDensity mu(period, bins, g.num_states());
    detail::read_rows(is, 3, [&](const std::vector<std::string>& f) {
        StateId y = detail::state_by_name(g, f[0]);
        std::size_t k = std::stoul(f[1]);
        if (k >= bins) throw std::runtime_error("csv: bin index out of range");
        mu.at(y, k) = detail::parse_double(f[2]);
    });
    return mu;
}

inline PeriodicFlow read_flow(std::istream& is, const Graph& g, double period, std::size_t bins) {
    PeriodicFlow q(period, bins, g.num_edges());
    detail::read_rows(is, 4, [&](const std::vector<std::string>& f) {
        StateId y = detail::state_by_name(g, f[0]);
        StateId z = detail::state_by_name(g, f[1]);
        std::size_t e = g.edge_index(y, z);
        if (e == Graph::npos) throw std::runtime_error("csv: row on a non-edge");
        std::size_t k = std::stoul(f[2]);
        if (k >= bins) throw std::runtime_error("csv: bin index out of range");
        q.at(e, k) = detail::parse_double(f[3]);
    });
    return q;
}

inline PeriodicCurrent read_current(std::istream& is, const Graph& g, double period,
                                    std::size_t bins) {
    PeriodicCurrent j(period, bins, g.num_sym_pairs());
    detail::read_rows(is, 4, [&](const std::vector<std::string>& f) {
        StateId y = detail::state_by_name(g, f[0]);
        StateId z = detail::state_by_name(g, f[1]);
        std::size_t s = g.sym_pair_index(y, z);
        if (s == Graph::npos) throw std::runtime_error("csv: row on a non-sym-edge");
        std::size_t k = std::stoul(f[2]);
        if (k >= bins) throw std::runtime_error("csv: bin index out of range");
        double v = detail::parse_double(f[3]);
        j.at(s, k) = (y < z) ? v : -v;
    });
    return j;
}

// ---------------------------------------------------------------------------
// Reports

inline void write_gc_reports(std::ostream& os, const std::vector<GCReport>& reports,
                             const CsvMeta& meta) {
    detail::write_meta(os, meta, "gc");
    os << "relation,lhs,rhs,residual,bins,seed\n";
    for (const auto& r : reports)
        os << to_string(r.relation) << "," << detail::format_double(r.lhs) << ","
           << detail::format_double(r.rhs) << "," << detail::format_double(r.residual) << ","
           << meta.bins << "," << r.inputs << "\n";
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << contents;
}

} // namespace pmc
