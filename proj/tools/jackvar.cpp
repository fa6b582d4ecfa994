// jackvar: jackknife variance estimation, asymptotic oracles, and Monte Carlo experiments.
//
// Exit codes: 0 success, 2 input/config error, 3 numerical failure, 4 usage error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "jackvar/jackvar.hpp"
#include "jackvar/report_json.hpp"

namespace {

constexpr int exit_input = 2;
constexpr int exit_numerical = 3;
constexpr int exit_usage = 4;

using nlohmann::json;

void emit(const json& doc, const std::string& out_path) {
    const std::string text = doc.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw jackvar::input_error("cannot write '" + out_path + "'");
    out << text;
}

struct EstimateArgs {
    std::string data_path;
    std::string functional;
    bool tau2 = false;
    std::size_t bootstrap = 0;
    std::string bound = "default";
    std::string population;
    std::uint64_t seed = 1;
};

double resolve_bound(const EstimateArgs& a, const jackvar::Functional& f, const jackvar::Sample& data) {
    std::string mode = a.bound;
    if (mode == "default") mode = f.is_trimmed_l() ? "auto" : "inf";
    if (mode == "inf") return std::numeric_limits<double>::infinity();
    if (mode == "auto") {
        if (!f.is_trimmed_l()) throw jackvar::input_error("--bound auto requires a trimmed_l functional (the influence of a smooth function of the mean is unbounded)");
        double sup = 0.0;
        if (!a.population.empty()) {
            sup = jackvar::influence_sup_norm(f, jackvar::parse_population_key(a.population).resolve());
        } else {
            for (double v : jackvar::influence_at_data(f, data)) sup = std::max(sup, std::abs(v));
        }
        return sup * sup;
    }
    const double b = jackvar::detail::parse_double(mode, "--bound");
    if (b < 0.0) throw jackvar::input_error("--bound must be nonnegative");
    return b;
}

json cmd_estimate(const EstimateArgs& a) {
    const jackvar::Functional f = jackvar::parse_functional(a.functional);
    const jackvar::Sample data = jackvar::read_sample_csv(a.data_path);
    if (data.size() < 2) throw jackvar::input_error(a.data_path + ": at least two observations are required");
    const jackvar::PseudovalueSet ps = jackvar::pseudovalues(f, data);
    const double vj = jackvar::v_jack(ps);
    const double ij = jackvar::infinitesimal_jackknife(f, data);
    if (!std::isfinite(ps.t_full) || !std::isfinite(vj) || !std::isfinite(ij))
        throw jackvar::numerical_error("non-finite estimate (T = " + std::to_string(ps.t_full) +
                                       ", v_jack = " + std::to_string(vj) + ", ij = " + std::to_string(ij) + ")");
    json out = {{"schema_version", jackvar::report_schema_version},
                {"kind", "estimate"},
                {"functional", a.functional},
                {"n", data.size()},
                {"t_full", ps.t_full},
                {"v_jack", vj},
                {"ij", ij}};
    if (a.tau2 || a.bootstrap > 0) {
        const double bound = resolve_bound(a, f, data);
        out["bound"] = jackvar::detail::number(bound);
        if (a.tau2) out["tau2"] = jackvar::tau2(ps, bound);
        if (a.bootstrap > 0) {
            const auto stats = jackvar::pseudovalue_bootstrap(ps, bound, a.seed, a.bootstrap);
            out["bootstrap_reps"] = a.bootstrap;
            out["bootstrap_variance"] = a.bootstrap > 1 ? jackvar::unbiased_variance(stats) : 0.0;
            out["seed"] = a.seed;
        }
    }
    return out;
}

json cmd_oracle(const std::string& functional, const std::string& population) {
    const jackvar::Functional f = jackvar::parse_functional(functional);
    const jackvar::PopulationKey key = jackvar::parse_population_key(population);
    const jackvar::Population p = key.resolve();
    const jackvar::Oracles o = jackvar::compute_oracles(f, p);
    json params = json::object();
    for (const auto& [k, v] : key.params) params[k] = v;
    json method = {{"sigma2_rel_tol", 1e-8}};
    if (f.is_trimmed_l()) {
        method["sigma2_nodes_per_axis"] = o.sigma2_nodes;
        method["bridge_nodes"] = o.bridge_nodes;
        method["bridge_rel_tol"] = 1e-4;
        method["influence_quadrature_tol"] = 1e-10;
        method["weight_quadrature_tol"] = f.weight().has_exact_integral() ? 0.0 : f.weight().quad_tol();
    } else {
        method["avar"] = "closed-form central moments";
    }
    json out = {{"schema_version", jackvar::report_schema_version},
                {"kind", "oracle"},
                {"functional", functional},
                {"population", {{"name", key.name}, {"params", params}}},
                {"sigma2", o.sigma2},
                {"avar_vjack", o.avar_vjack},
                {"var_phi2", o.var_phi2},
                {"method", method}};
    if (f.is_trimmed_l()) out["influence_sup_norm"] = o.influence_sup_norm;
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Jackknife and infinitesimal-jackknife variance estimation"};
    app.require_subcommand(1);

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Estimate the variance of a plug-in functional from data");
    estimate->add_option("data", est.data_path, "CSV file, one real per line ('#' lines skipped)")->required();
    estimate->add_option("-f,--functional", est.functional, "mean | square_of_mean | exp_of_mean | trimmed_l:raised_cosine:alpha=<a>")->required();
    estimate->add_flag("--tau2", est.tau2, "Also report tau^2, the variance of truncated squared pseudovalues");
    estimate->add_option("--bootstrap", est.bootstrap, "Bootstrap the pseudovalues with this many rounds");
    estimate->add_option("--bound", est.bound, "Truncation bound for squares: auto | inf | <number>");
    estimate->add_option("--population", est.population, "Population key used by --bound auto, e.g. normal:mu=0,sigma=1");
    estimate->add_option("--seed", est.seed, "Bootstrap seed");

    std::string oracle_functional;
    std::string oracle_population;
    auto* oracle = app.add_subcommand("oracle", "Print asymptotic oracle values as JSON");
    oracle->add_option("-f,--functional", oracle_functional, "Functional key")->required();
    oracle->add_option("-p,--population", oracle_population, "Population key, e.g. normal:mu=1,sigma=1")->required();

    std::string config_path;
    std::string out_path;
    std::string raw_path;
    auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment from a TOML config");
    experiment->add_option("config", config_path, "TOML config")->required();
    experiment->add_option("--out", out_path, "Write the JSON report here instead of stdout");
    experiment->add_option("--raw", raw_path, "Write per-replicate statistics as CSV");

    std::string sweep_config;
    std::string sweep_out;
    auto* sweep = app.add_subcommand("sweep", "Run a convergence sweep over several n");
    sweep->add_option("config", sweep_config, "TOML config with at least two n_values")->required();
    sweep->add_option("--out", sweep_out, "Write the JSON table here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (*estimate) {
            emit(cmd_estimate(est), "");
        } else if (*oracle) {
            emit(cmd_oracle(oracle_functional, oracle_population), "");
        } else if (*experiment) {
            const auto cfg = jackvar::load_experiment_config(config_path);
            const auto report = jackvar::run_experiment(cfg, jackvar::threads_from_env());
            if (!raw_path.empty()) {
                std::ofstream raw(raw_path);
                if (!raw) throw jackvar::input_error("cannot write '" + raw_path + "'");
                jackvar::write_raw_csv(raw, report);
            }
            emit(jackvar::to_json(report), out_path);
        } else if (*sweep) {
            const auto cfg = jackvar::load_experiment_config(sweep_config);
            if (cfg.n_values.size() < 2) throw jackvar::input_error("a sweep needs at least two values of n");
            const auto report = jackvar::run_experiment(cfg, jackvar::threads_from_env());
            emit(jackvar::to_json(jackvar::convergence_sweep(report), report), sweep_out);
        }
    } catch (const jackvar::input_error& e) {
        std::cerr << "jackvar: " << e.what() << "\n";
        return exit_input;
    } catch (const jackvar::numerical_error& e) {
        std::cerr << "jackvar: numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "jackvar: " << e.what() << "\n";
        return exit_numerical;
    }
    return 0;
}
