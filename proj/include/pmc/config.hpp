#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmc/protocol.hpp"

namespace pmc {

/// FNV-1a 64 over the raw config bytes; stamped into every output CSV.
inline std::string config_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ModelFile {
    RateProtocol protocol;
    std::string hash;
    std::string example_note; // e.g. rounded piecewise switching fraction
};

namespace detail {

inline ExampleParams params_from_json(const nlohmann::json& j) {
    ExampleParams prm;
    auto get = [&](const char* key, double& slot) {
        if (j.contains(key)) slot = j.at(key).get<double>();
    };
    get("gamma", prm.gamma);
    get("x_amplitude", prm.x_amplitude);
    get("x_offset", prm.x_offset);
    get("a0", prm.a0);
    get("gamma_mod", prm.gamma_mod);
    get("b0", prm.b0);
    get("k", prm.k);
    get("h0", prm.h0);
    get("a", prm.a);
    get("alpha", prm.alpha);
    return prm;
}

} // namespace detail

/// Parses a model description. Schema (JSON):
///
///   { "period": 1.0, "bins": 64,
///     "rates": { "example": { "name": "defect_center",
///                             "params": { "a0": 1.0, "gamma_mod": 0.5, "b0": 2.0 } } } }
///
/// or an explicit graph with a tabulated or harmonic rate field:
///
///   { "states": ["a","b","c"],
///     "edges": [["a","b"], ["b","a"], ...],
///     "period": 1.0, "bins": 256,
///     "rates": { "table": [[.. bins values per edge ..], ...] },
///     "breakpoints": [0.0, 0.5] }            // optional
///
///   "harmonic": [ { "base": 1.0,
///                   "terms": [ { "amplitude": 0.01, "harmonic": 1, "phase": 0.0 } ] }, ... ]
///     tabulates base * (1 + sum_i amplitude_i sin(2 pi harmonic_i t/T0 + phase_i))
///     at bin midpoints, one entry per edge.
inline ModelFile parse_model(const std::string& text, std::size_t bins_override = 0) {
    nlohmann::json j = nlohmann::json::parse(text);
    double period = j.at("period").get<double>();
    std::size_t bins = bins_override ? bins_override : j.at("bins").get<std::size_t>();
    if (bins_override && j.at("rates").contains("table") &&
        bins_override != j.at("bins").get<std::size_t>())
        throw std::invalid_argument("model: cannot re-bin an explicit rate table");
    const auto& rates = j.at("rates");

    std::string note;
    if (rates.contains("example")) {
        const auto& ex = rates.at("example");
        ExampleModel model = example_model_from_name(ex.at("name").get<std::string>());
        ExampleParams prm = ex.contains("params") ? detail::params_from_json(ex.at("params"))
                                                  : ExampleParams{};
        double alpha_eff = prm.alpha;
        RateProtocol p = build_example(model, prm, period, bins, &alpha_eff);
        if (model == ExampleModel::piecewise && std::abs(alpha_eff - prm.alpha) > 1e-15) {
            std::ostringstream os;
            os << "piecewise switching fraction rounded to " << alpha_eff;
            note = os.str();
        }
        return {std::move(p), config_hash(text), note};
    }

    std::vector<std::string> states;
    for (const auto& s : j.at("states")) states.push_back(s.get<std::string>());
    for (const auto& s : states)
        if (s.find(',') != std::string::npos || s.empty())
            throw std::invalid_argument("model: state names must be nonempty and comma-free");
    auto index_of = [&](const std::string& name) -> StateId {
        for (StateId y = 0; y < states.size(); ++y)
            if (states[y] == name) return y;
        throw std::invalid_argument("model: unknown state '" + name + "' in edge list");
    };
    std::vector<std::pair<StateId, StateId>> edges;
    for (const auto& e : j.at("edges"))
        edges.emplace_back(index_of(e.at(0).get<std::string>()),
                           index_of(e.at(1).get<std::string>()));
    Graph g(std::move(states), std::move(edges));

    std::vector<std::vector<double>> table;
    if (rates.contains("table")) {
        for (const auto& row : rates.at("table"))
            table.push_back(row.get<std::vector<double>>());
    } else if (rates.contains("harmonic")) {
        constexpr double two_pi = 6.283185307179586476925286766559;
        for (const auto& entry : rates.at("harmonic")) {
            double base = entry.at("base").get<double>();
            std::vector<double> row(bins);
            for (std::size_t k = 0; k < bins; ++k) {
                double t = (static_cast<double>(k) + 0.5) * period / static_cast<double>(bins);
                double v = 1.0;
                if (entry.contains("terms"))
                    for (const auto& term : entry.at("terms"))
                        v += term.at("amplitude").get<double>() *
                             std::sin(two_pi * term.at("harmonic").get<double>() * t / period +
                                      (term.contains("phase") ? term.at("phase").get<double>()
                                                              : 0.0));
                row[k] = base * v;
            }
            table.push_back(std::move(row));
        }
    } else {
        throw std::invalid_argument("model: rates must contain 'example', 'table' or 'harmonic'");
    }

    std::vector<double> breakpoints;
    if (j.contains("breakpoints"))
        breakpoints = j.at("breakpoints").get<std::vector<double>>();

    return {RateProtocol(std::move(g), period, bins, std::move(table), std::move(breakpoints)),
            config_hash(text), note};
}

inline ModelFile load_model(const std::string& path, std::size_t bins_override = 0) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_model(buf.str(), bins_override);
}

} // namespace pmc
