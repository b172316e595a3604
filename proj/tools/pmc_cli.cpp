// Command-line front end: validate models, simulate, compute steady states,
// evaluate rate functionals, run duality checks, contract onto targets.
// All numeric output is fixed-format and locale independent; a given seed
// and config reproduce output files byte for byte.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pmc/pmc.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 1;
constexpr int exit_runtime = 2;

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(pmc::csv_parse_double(item));
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << contents;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

int cmd_validate(const std::string& model_path) {
    auto model = pmc::load_model(model_path);
    auto violations = pmc::validate_protocol(model.protocol);
    if (!model.example_note.empty()) std::cout << "note: " << model.example_note << "\n";
    if (violations.empty()) {
        std::cout << "valid: " << model.protocol.graph().num_states() << " states, "
                  << model.protocol.graph().num_edges() << " edges, "
                  << model.protocol.bins() << " bins, period " << model.protocol.period()
                  << "\n";
        return exit_ok;
    }
    for (const auto& v : violations)
        std::cout << "violation " << v.assumption << ": " << v.detail << "\n";
    return exit_invalid;
}

int cmd_simulate(const std::string& model_path, std::size_t bins, std::size_t periods,
                 std::uint64_t seed, std::size_t replicas, const std::string& x0,
                 const std::string& out_dir, bool dump_paths) {
    auto model = pmc::load_model(model_path, bins);
    const pmc::RateProtocol& p = model.protocol;
    if (!pmc::validate_protocol(p).empty()) {
        std::cerr << "model violates the standing assumptions; run validate\n";
        return exit_invalid;
    }
    pmc::StateId start = 0;
    if (!x0.empty()) {
        bool found = false;
        for (pmc::StateId y = 0; y < p.graph().num_states(); ++y)
            if (p.graph().name_of(y) == x0) {
                start = y;
                found = true;
            }
        if (!found) {
            std::cerr << "unknown initial state: " << x0 << "\n";
            return exit_invalid;
        }
    }

    const std::size_t m = p.bins();
    pmc::CsvMeta meta{model.hash, seed, m, periods};
    pmc::PeriodicDensity mu(p.period(), m, p.graph().num_states());
    pmc::PeriodicFlow q(p.period(), m, p.graph().num_edges());
    auto w = pmc::accompanying_distribution(p);
    const bool flows_defined = p.graph().is_symmetric();

    std::ostringstream paths;
    pmc::write_csv_meta(paths, meta, "paths");
    paths << "replica,seed,jumps,sigma_naive,sigma_tot,sigma_ex\n";

    std::filesystem::create_directories(out_dir);
    for (std::size_t r = 0; r < replicas; ++r) {
        std::uint64_t rs = pmc::replica_seed(seed, r);
        pmc::Path path = pmc::sample_path(p, start, periods, rs);
        auto triple = pmc::accumulate(path, p, m);
        for (pmc::StateId y = 0; y < p.graph().num_states(); ++y)
            for (std::size_t k = 0; k < m; ++k) mu.at(y, k) += triple.mu.at(y, k) / replicas;
        for (std::size_t e = 0; e < p.graph().num_edges(); ++e)
            for (std::size_t k = 0; k < m; ++k) q.at(e, k) += triple.q.at(e, k) / replicas;
        paths << r << "," << rs << "," << path.events.size();
        if (flows_defined) {
            auto fl = pmc::path_entropy_flows(path, p, w);
            paths << "," << pmc::csv_format_double(fl.naive) << ","
                  << pmc::csv_format_double(fl.tot) << "," << pmc::csv_format_double(fl.ex);
        } else {
            paths << ",,,";
        }
        paths << "\n";
        if (dump_paths) {
            std::ostringstream ev;
            pmc::write_csv_meta(ev, meta, "events");
            ev << "time,from,to\n";
            for (const auto& e : path.events)
                ev << pmc::csv_format_double(e.time) << "," << p.graph().name_of(e.from) << ","
                   << p.graph().name_of(e.to) << "\n";
            write_text(std::filesystem::path(out_dir) / ("path_" + std::to_string(r) + ".csv"),
                       ev.str());
        }
    }
    auto j = pmc::current_from_flow(p.graph(), q);

    std::ostringstream os;
    pmc::write_density(os, p.graph(), mu, meta);
    write_text(std::filesystem::path(out_dir) / "mu.csv", os.str());
    os.str("");
    pmc::write_flow(os, p.graph(), q, meta);
    write_text(std::filesystem::path(out_dir) / "q.csv", os.str());
    os.str("");
    pmc::write_current(os, p.graph(), j, meta);
    write_text(std::filesystem::path(out_dir) / "j.csv", os.str());
    write_text(std::filesystem::path(out_dir) / "paths.csv", paths.str());
    std::cout << "wrote mu.csv q.csv j.csv paths.csv to " << out_dir << "\n";
    return exit_ok;
}

int cmd_steady(const std::string& model_path, std::size_t bins, const std::string& out_dir) {
    auto model = pmc::load_model(model_path, bins);
    const pmc::RateProtocol& p = model.protocol;
    auto ss = pmc::oscillatory_state(p);
    auto w = pmc::accompanying_distribution(p);
    pmc::CsvMeta meta{model.hash, 0, p.bins(), 0};

    std::filesystem::create_directories(out_dir);
    std::ostringstream os;
    pmc::write_density(os, p.graph(), ss.pi, meta);
    write_text(std::filesystem::path(out_dir) / "pi.csv", os.str());
    os.str("");
    pmc::write_flow(os, p.graph(), ss.q_pi, meta);
    write_text(std::filesystem::path(out_dir) / "q_pi.csv", os.str());
    os.str("");
    pmc::write_density(os, p.graph(), w, meta);
    write_text(std::filesystem::path(out_dir) / "w.csv", os.str());

    if (p.graph().num_states() == 2 && p.graph().has_edge(0, 1) && p.graph().has_edge(1, 0)) {
        auto closed = pmc::two_state_pi(p);
        double worst = 0.0;
        std::ostringstream cmp;
        pmc::write_csv_meta(cmp, meta, "steady_compare");
        cmp << "state,bin,monodromy,closed_form,abs_diff\n";
        for (pmc::StateId y = 0; y < 2; ++y)
            for (std::size_t k = 0; k < p.bins(); ++k) {
                double d = std::abs(ss.pi.at(y, k) - closed.at(y, k));
                worst = std::max(worst, d);
                cmp << p.graph().name_of(y) << "," << k << ","
                    << pmc::csv_format_double(ss.pi.at(y, k)) << ","
                    << pmc::csv_format_double(closed.at(y, k)) << ","
                    << pmc::csv_format_double(d) << "\n";
            }
        write_text(std::filesystem::path(out_dir) / "steady_compare.csv", cmp.str());
        std::cout << "two-state closed form max abs diff: " << worst << "\n";
    }
    std::cout << "wrote pi.csv q_pi.csv w.csv to " << out_dir << "\n";
    return exit_ok;
}

int cmd_rate(const std::string& model_path, const std::string& mu_path,
             const std::string& q_path, const std::string& j_path, double tol_cont) {
    auto model = pmc::load_model(model_path);
    const pmc::RateProtocol& p = model.protocol;
    pmc::MembershipTolerances tol;
    if (tol_cont > 0.0) tol.cont = tol_cont;

    std::istringstream mu_in(slurp(mu_path));
    auto mu = pmc::read_density(mu_in, p.graph(), p.period(), p.bins());

    if (!q_path.empty()) {
        std::istringstream q_in(slurp(q_path));
        auto q = pmc::read_flow(q_in, p.graph(), p.period(), p.bins());
        auto rep = pmc::lambda_membership(p.graph(), mu, q, tol);
        auto v = pmc::rate_I(p, mu, q, tol);
        if (v.is_finite)
            std::cout << "I(mu,Q) = " << pmc::csv_format_double(v.value) << "\n";
        else
            std::cout << "I(mu,Q) = +inf (" << v.detail << ")\n";
        for (const auto& viol : rep.violations) std::cout << "  membership: " << viol << "\n";
    }
    if (!j_path.empty()) {
        std::istringstream j_in(slurp(j_path));
        auto j = pmc::read_current(j_in, p.graph(), p.period(), p.bins());
        auto rep = pmc::lambda_a_membership(p.graph(), mu, j, tol);
        auto r = pmc::rate_I_hat(p, mu, j, tol);
        if (r.value.is_finite) {
            std::cout << "I^(mu,J) = " << pmc::csv_format_double(r.value.value)
                      << " (phi form)\n";
            std::cout << "I^(mu,J) = " << pmc::csv_format_double(r.psi_form)
                      << " (psi form), |difference| = " << pmc::csv_format_double(r.mismatch)
                      << "\n";
        } else {
            std::cout << "I^(mu,J) = +inf (" << r.value.detail << ")\n";
        }
        for (const auto& viol : rep.violations) std::cout << "  membership: " << viol << "\n";
    }
    return exit_ok;
}

int cmd_gc(const std::string& model_path, const std::string& relation, std::size_t replicas,
           std::size_t bins, std::uint64_t seed, const std::string& out_dir, double tol_cont) {
    auto model = pmc::load_model(model_path, bins);
    const pmc::RateProtocol& p = model.protocol;
    if (!p.graph().is_symmetric()) {
        std::cerr << "gc requires a model with E = E_s\n";
        return exit_invalid;
    }
    pmc::GcRelation rel;
    if (relation == "uva1") rel = pmc::GcRelation::uva1;
    else if (relation == "uva2") rel = pmc::GcRelation::uva2;
    else if (relation == "uva3") rel = pmc::GcRelation::uva3;
    else if (relation == "luci1") rel = pmc::GcRelation::luci1;
    else if (relation == "luci2") rel = pmc::GcRelation::luci2;
    else {
        std::cerr << "unknown relation: " << relation << "\n";
        return exit_invalid;
    }
    const bool flow_relation =
        rel == pmc::GcRelation::uva1 || rel == pmc::GcRelation::uva2 || rel == pmc::GcRelation::uva3;

    pmc::MembershipTolerances tol;
    tol.cont = tol_cont > 0.0 ? tol_cont : 1e-3;
    pmc::MembershipTolerances steady_tol = tol;
    steady_tol.mass = 1e-9;
    steady_tol.cont = std::max(tol.cont, 100.0 / static_cast<double>(p.bins()));

    std::vector<pmc::GCReport> reports;
    auto ss = pmc::oscillatory_state(p);
    double worst = 0.0;
    try {
        if (flow_relation) {
            reports.push_back(pmc::gc_check(rel, p, ss.pi, ss.q_pi, steady_tol, "steady"));
            for (std::size_t i = 0; i < replicas; ++i) {
                auto s = pmc::random_lambda_member(p, pmc::replica_seed(seed, i));
                reports.push_back(
                    pmc::gc_check(rel, p, s.mu, s.q, tol, std::to_string(seed) + "/" + std::to_string(i)));
            }
        } else {
            auto j_pi = pmc::current_from_flow(p.graph(), ss.q_pi);
            reports.push_back(pmc::gc_check(rel, p, ss.pi, j_pi, steady_tol, "steady"));
            for (std::size_t i = 0; i < replicas; ++i) {
                auto s = pmc::random_lambda_a_member(p, pmc::replica_seed(seed, i));
                reports.push_back(
                    pmc::gc_check(rel, p, s.mu, s.j, tol, std::to_string(seed) + "/" + std::to_string(i)));
            }
        }
    } catch (const std::exception& ex) {
        std::cerr << "gc batch failed: " << ex.what() << "\n";
        return exit_runtime;
    }
    for (const auto& r : reports) worst = std::max(worst, r.residual);

    std::filesystem::create_directories(out_dir);
    pmc::CsvMeta meta{model.hash, seed, p.bins(), 0};
    std::ostringstream os;
    pmc::write_gc_reports(os, reports, meta);
    write_text(std::filesystem::path(out_dir) / "gc.csv", os.str());
    std::cout << relation << ": " << reports.size() << " checks, max residual "
              << pmc::csv_format_double(worst) << "\n";
    return exit_ok;
}

int cmd_contract(const std::string& model_path, const std::string& target_mu,
                 const std::string& target_q, std::size_t bins, const std::string& out_dir) {
    auto model = pmc::load_model(model_path, bins);
    const pmc::RateProtocol& p = model.protocol;
    pmc::ContractionProblem prob{p, {}, {}, {}};
    if (!target_mu.empty()) prob.bar_mu = parse_list(target_mu);
    if (!target_q.empty()) prob.bar_q = parse_list(target_q);
    if (prob.bar_mu.empty() && prob.bar_q.empty()) {
        std::cerr << "contract needs --target-mu and/or --target-q\n";
        return exit_invalid;
    }
    auto res = pmc::contract(prob);
    if (!res.value.is_finite) {
        std::cout << "value = +inf (" << res.value.detail << ")\n";
        return exit_ok;
    }
    std::cout << "value (period integral) = " << pmc::csv_format_double(res.value.value) << "\n";
    std::cout << "value / T0              = "
              << pmc::csv_format_double(res.value.value / p.period()) << "\n";
    std::cout << "constraint residual     = "
              << pmc::csv_format_double(res.constraint_residual) << "\n";

    // closed-form comparison for symmetric two-state flow targets
    if (p.graph().num_states() == 2 && !prob.bar_q.empty()) {
        try {
            auto closed = pmc::two_state_flow_rate(p, prob.bar_q[0]);
            std::cout << "symmetric closed form   = " << pmc::csv_format_double(closed.value)
                      << " (|diff|/T0 = "
                      << pmc::csv_format_double(
                             std::abs(res.value.value / p.period() - closed.value))
                      << ")\n";
        } catch (const std::exception&) {
            // not a symmetric protocol; nothing to compare
        }
    }

    std::filesystem::create_directories(out_dir);
    pmc::CsvMeta meta{model.hash, 0, p.bins(), 0};
    std::ostringstream os;
    pmc::write_density(os, p.graph(), res.mu, meta);
    write_text(std::filesystem::path(out_dir) / "contract_mu.csv", os.str());
    os.str("");
    pmc::write_flow(os, p.graph(), res.q, meta);
    write_text(std::filesystem::path(out_dir) / "contract_q.csv", os.str());

    os.str("");
    pmc::write_csv_meta(os, meta, "contract_summary");
    os << "key,value\n";
    for (std::size_t y = 0; y < prob.bar_mu.size(); ++y)
        os << "target_mu." << p.graph().name_of(y) << ","
           << pmc::csv_format_double(prob.bar_mu[y]) << "\n";
    for (std::size_t e = 0; e < prob.bar_q.size(); ++e)
        os << "target_q." << p.graph().name_of(p.graph().edges()[e].first) << "->"
           << p.graph().name_of(p.graph().edges()[e].second) << ","
           << pmc::csv_format_double(prob.bar_q[e]) << "\n";
    os << "floor," << pmc::csv_format_double(prob.settings.floor) << "\n";
    os << "penalty_max," << pmc::csv_format_double(prob.settings.penalty_max) << "\n";
    os << "tol_constraint," << pmc::csv_format_double(prob.settings.tol_constraint) << "\n";
    os << "value," << pmc::csv_format_double(res.value.value) << "\n";
    os << "value_snapped,"
       << (res.value_snapped.is_finite ? pmc::csv_format_double(res.value_snapped.value)
                                       : std::string("inf"))
       << "\n";
    os << "constraint_residual," << pmc::csv_format_double(res.constraint_residual) << "\n";
    os << "converged," << (res.converged ? 1 : 0) << "\n";
    write_text(std::filesystem::path(out_dir) / "contract_summary.csv", os.str());
    if (!res.converged) {
        std::cerr << "optimizer did not reach its tolerances (residual "
                  << res.constraint_residual << ")\n";
        return exit_runtime;
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"periodic Markov chains: simulation, rate functionals, duality checks"};
    app.require_subcommand(1);

    std::string model_path, out_dir = ".", x0, mu_path, q_path, j_path;
    std::string relation = "uva2", target_mu, target_q;
    std::size_t bins = 0, periods = 100, replicas = 1;
    std::uint64_t seed = 1;
    double tol_cont = 0.0;

    auto* validate = app.add_subcommand("validate", "check a model against the assumptions");
    validate->add_option("model", model_path)->required();

    auto* simulate = app.add_subcommand("simulate", "sample trajectories, bin the empirics");
    simulate->add_option("model", model_path)->required();
    simulate->add_option("--bins", bins);
    simulate->add_option("--periods", periods);
    simulate->add_option("--seed", seed);
    simulate->add_option("--replicas", replicas);
    simulate->add_option("--x0", x0);
    simulate->add_option("--out", out_dir);
    bool dump_paths = false;
    simulate->add_flag("--dump-paths", dump_paths);

    auto* steady = app.add_subcommand("steady", "oscillatory steady state and accompanying law");
    steady->add_option("model", model_path)->required();
    steady->add_option("--bins", bins);
    steady->add_option("--out", out_dir);

    auto* rate = app.add_subcommand("rate", "evaluate the rate functionals on CSV data");
    rate->add_option("model", model_path)->required();
    rate->add_option("--mu", mu_path)->required();
    rate->add_option("--q", q_path);
    rate->add_option("--j", j_path);
    rate->add_option("--tol-cont", tol_cont);

    auto* gc = app.add_subcommand("gc", "duality-relation residuals on sampled inputs");
    gc->add_option("model", model_path)->required();
    gc->add_option("--relation", relation);
    gc->add_option("--replicas", replicas);
    gc->add_option("--bins", bins);
    gc->add_option("--seed", seed);
    gc->add_option("--out", out_dir);
    gc->add_option("--tol-cont", tol_cont);

    auto* contract = app.add_subcommand("contract", "contract the functional onto targets");
    contract->add_option("model", model_path)->required();
    contract->add_option("--target-mu", target_mu);
    contract->add_option("--target-q", target_q);
    contract->add_option("--bins", bins);
    contract->add_option("--out", out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(model_path);
        if (simulate->parsed())
            return cmd_simulate(model_path, bins, periods, seed, replicas, x0, out_dir,
                                dump_paths);
        if (steady->parsed()) return cmd_steady(model_path, bins, out_dir);
        if (rate->parsed()) return cmd_rate(model_path, mu_path, q_path, j_path, tol_cont);
        if (gc->parsed())
            return cmd_gc(model_path, relation, replicas, bins, seed, out_dir, tol_cont);
        if (contract->parsed()) return cmd_contract(model_path, target_mu, target_q, bins, out_dir);
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_invalid;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_runtime;
    }
    return exit_invalid;
}
