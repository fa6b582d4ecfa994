#pragma once

// Replication engine: draws seeded samples from a built-in population, computes the
// jackknife and infinitesimal-jackknife estimates, and aggregates the sqrt(n)-scaled
// fluctuations against the analytic oracles.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "jackvar/asymptotics.hpp"
#include "jackvar/errors.hpp"
#include "jackvar/functionals.hpp"
#include "jackvar/jackknife.hpp"
#include "jackvar/population.hpp"
#include "jackvar/random.hpp"
#include "jackvar/toml_lite.hpp"

namespace jackvar {

// ---------------------------------------------------------------------------
// Population keys

struct PopulationKey {
    std::string name;
    std::map<std::string, double> params;

    Population resolve() const {
        auto get = [&](const char* k, double def) {
            const auto it = params.find(k);
            return it == params.end() ? def : it->second;
        };
        auto allow = [&](std::initializer_list<std::string_view> names) {
            for (const auto& [k, v] : params) {
                if (std::find(names.begin(), names.end(), k) == names.end())
                    throw input_error("unknown parameter '" + k + "' for population '" + name + "'");
            }
        };
        if (name == "normal") {
            allow({"mu", "sigma"});
            return Population::normal(get("mu", 0.0), get("sigma", 1.0));
        }
        if (name == "uniform") {
            allow({"a", "b"});
            return Population::uniform(get("a", 0.0), get("b", 1.0));
        }
        if (name == "exponential") {
            allow({"lambda"});
            return Population::exponential(get("lambda", 1.0));
        }
        throw input_error("unknown population '" + name + "'");
    }
};

/// "normal:mu=1,sigma=1", "uniform:a=0,b=1", "exponential:lambda=2", or a bare name.
inline PopulationKey parse_population_key(std::string_view text) {
    PopulationKey key;
    const auto colon = text.find(':');
    key.name = std::string(text.substr(0, colon));
    if (colon != std::string_view::npos) {
        std::string_view rest = text.substr(colon + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = rest.substr(0, comma);
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) throw input_error("population parameter '" + std::string(item) + "' lacks '='");
            key.params[std::string(item.substr(0, eq))] = detail::parse_double(item.substr(eq + 1), text);
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
    }
    key.resolve();
    return key;
}

// ---------------------------------------------------------------------------
// Configuration

inline const std::set<std::string, std::less<>>& known_estimators() {
    static const std::set<std::string, std::less<>> names{"v_jack", "ij", "tau2", "bootstrap", "pushforward_ks"};
    return names;
}

struct ExperimentConfig {
    std::string functional;
    PopulationKey population;
    std::vector<std::size_t> n_values;
    std::size_t replications = 0;
    std::uint64_t master_seed = 0;
    std::vector<std::string> estimators{"v_jack", "ij"};
    std::size_t bootstrap_reps = 1000;

    bool wants(std::string_view name) const {
        return std::find(estimators.begin(), estimators.end(), name) != estimators.end();
    }

    void validate() const {
        parse_functional(functional);
        population.resolve();
        if (replications < 2) throw input_error("replications must be at least 2");
        if (n_values.empty()) throw input_error("n_values must not be empty");
        for (std::size_t k = 0; k < n_values.size(); ++k) {
            if (n_values[k] < 2) throw input_error("every n must be at least 2");
            if (k > 0 && n_values[k] <= n_values[k - 1]) throw input_error("n_values must be strictly increasing");
        }
        for (const auto& e : estimators)
            if (!known_estimators().count(e)) throw input_error("unknown estimator '" + e + "'");
        if (wants("bootstrap") && bootstrap_reps < 1) throw input_error("bootstrap_reps must be at least 1");
    }
};

namespace detail {

inline std::int64_t toml_int(const toml::Value& v, const char* key) {
    if (!v.is_integer()) throw input_error("config line " + std::to_string(v.line) + ": '" + key + "' must be an integer");
    return std::get<std::int64_t>(v.data);
}

inline std::size_t toml_count(const toml::Value& v, const char* key) {
    const auto i = toml_int(v, key);
    if (i < 0) throw input_error("config line " + std::to_string(v.line) + ": '" + key + "' must be nonnegative");
    return static_cast<std::size_t>(i);
}

inline double toml_real(const toml::Value& v, const std::string& key) {
    if (v.is_float()) return std::get<double>(v.data);
    if (v.is_integer()) return static_cast<double>(std::get<std::int64_t>(v.data));
    throw input_error("config line " + std::to_string(v.line) + ": '" + key + "' must be a number");
}

inline std::string toml_string(const toml::Value& v, const char* key) {
    if (!v.is_string()) throw input_error("config line " + std::to_string(v.line) + ": '" + key + "' must be a string");
    return std::get<std::string>(v.data);
}

} // namespace detail

/// Parses an experiment config:
///
///     functional = "square_of_mean"
///     n_values = [100, 400]
///     replications = 2000
///     master_seed = 20240101
///     estimators = ["v_jack", "ij"]      # optional
///     bootstrap_reps = 1000              # optional
///     [population]
///     name = "normal"
///     mu = 1.0
///     sigma = 1.0
inline ExperimentConfig parse_experiment_config(std::string_view text) {
    const toml::Document doc = toml::parse(text);
    for (const auto& [name, tbl] : doc.tables)
        if (name != "" && name != "population") throw input_error("unknown config table [" + name + "]");
    const toml::Table& top = *doc.table("");
    const toml::Table* pop = doc.table("population");
    if (!pop) throw input_error("config lacks a [population] table");

    auto require = [&](const toml::Table& t, const char* key) -> const toml::Value& {
        const auto it = t.find(key);
        if (it == t.end()) throw input_error(std::string("config lacks required key '") + key + "'");
        return it->second;
    };

    ExperimentConfig cfg;
    for (const auto& [key, value] : top) {
        if (key == "functional") cfg.functional = detail::toml_string(value, "functional");
        else if (key == "replications") cfg.replications = detail::toml_count(value, "replications");
        else if (key == "master_seed") cfg.master_seed = static_cast<std::uint64_t>(detail::toml_int(value, "master_seed"));
        else if (key == "bootstrap_reps") cfg.bootstrap_reps = detail::toml_count(value, "bootstrap_reps");
        else if (key == "n_values") {
            if (!value.is_array()) throw input_error("config line " + std::to_string(value.line) + ": 'n_values' must be an array");
            for (const auto& item : std::get<toml::Array>(value.data)) cfg.n_values.push_back(detail::toml_count(item, "n_values"));
        } else if (key == "estimators") {
            if (!value.is_array()) throw input_error("config line " + std::to_string(value.line) + ": 'estimators' must be an array");
            cfg.estimators.clear();
            for (const auto& item : std::get<toml::Array>(value.data)) cfg.estimators.push_back(detail::toml_string(item, "estimators"));
        } else {
            throw input_error("config line " + std::to_string(value.line) + ": unknown key '" + key + "'");
        }
    }
    require(top, "functional");
    require(top, "n_values");
    require(top, "replications");
    require(top, "master_seed");
    cfg.population.name = detail::toml_string(require(*pop, "name"), "name");
    for (const auto& [key, value] : *pop)
        if (key != "name") cfg.population.params[key] = detail::toml_real(value, key);
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_experiment_config(buf.str());
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Report

struct StatisticSummary {
    double mean = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
    double mean_square = 0.0;
};

struct ReplicateRow {
    std::size_t n = 0;
    std::size_t rep = 0;
    double vjack = 0.0;
    double ij = 0.0;
    double tau2 = std::numeric_limits<double>::quiet_NaN();
    double bootstrap_variance = std::numeric_limits<double>::quiet_NaN();
    double pushforward_ks = std::numeric_limits<double>::quiet_NaN();
};

struct SizeSummary {
    std::size_t n = 0;
    std::size_t replications = 0;
    StatisticSummary vjack_minus_sigma2; // sqrt(n)(v_jack - sigma^2)
    StatisticSummary ij_minus_sigma2;    // sqrt(n)(IJ - sigma^2)
    StatisticSummary vjack_minus_ij;     // sqrt(n)(v_jack - IJ)
    double ks_to_normal = 0.0;
    std::map<std::string, StatisticSummary> estimators; // tau2, bootstrap_variance, pushforward_ks
    std::map<std::string, double> medians;
};

struct Oracles {
    double sigma2 = 0.0;
    double avar_vjack = 0.0;
    double var_phi2 = 0.0;
    double influence_sup_norm = std::numeric_limits<double>::infinity();
    std::size_t bridge_nodes = 0;
    std::size_t sigma2_nodes = 0;
};

struct ExperimentReport {
    ExperimentConfig config;
    Oracles oracles;
    std::vector<SizeSummary> sizes;
    std::vector<ReplicateRow> rows; // ordered by (n, rep)
    double wall_clock_seconds = 0.0;
};

/// Unbiased variance with a standard error from the replicate fourth central moment.
inline StatisticSummary summarize(std::span<const double> v) {
    StatisticSummary s;
    const double R = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / R;
    double m2 = 0.0;
    double m4 = 0.0;
    double sq = 0.0;
    for (double x : v) {
        const double d = x - s.mean;
        m2 += d * d;
        m4 += d * d * d * d;
        sq += x * x;
    }
    s.mean_square = sq / R;
    s.variance = v.size() > 1 ? m2 / (R - 1.0) : 0.0;
    m4 /= R;
    const double s4 = s.variance * s.variance;
    const double var_of_var = v.size() > 3 ? (m4 - (R - 3.0) / (R - 1.0) * s4) / R : 0.0;
    s.variance_se = std::sqrt(std::max(var_of_var, 0.0));
    return s;
}

/// KS distance between the standardized values and N(0,1).
inline double ks_to_normal(std::span<const double> v) {
    const StatisticSummary s = summarize(v);
    const double sd = std::sqrt(s.variance);
    if (!(sd > 0.0)) return 1.0;
    std::vector<double> z(v.begin(), v.end());
    for (double& x : z) x = (x - s.mean) / sd;
    std::sort(z.begin(), z.end());
    const double R = static_cast<double>(z.size());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double F = 0.5 * std::erfc(-z[i] / std::numbers::sqrt2);
        d = std::max({d, std::abs(static_cast<double>(i + 1) / R - F), std::abs(static_cast<double>(i) / R - F)});
    }
    return d;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

inline Oracles compute_oracles(const Functional& f, const Population& p) {
    Oracles o;
    const Sigma2Trace s2 = sigma2_population_trace(f, p);
    o.sigma2 = s2.value;
    o.sigma2_nodes = s2.nodes_per_axis;
    if (f.is_trimmed_l()) {
        const BridgeRefinement br = refine_bridge(p, f.weight());
        o.avar_vjack = br.value.var_y_plus_z;
        o.bridge_nodes = br.nodes;
        o.var_phi2 = var_phi2_trimmed_L(p, f.weight());
        o.influence_sup_norm = influence_sup_norm(f, p);
    } else {
        o.avar_vjack = avar_vjack_smooth_mean(f.smooth_mean(), p);
        o.var_phi2 = var_phi2_smooth_mean(f.smooth_mean(), p);
    }
    return o;
}

/// Stream tag for replicate samples in the child-seed derivation.
inline constexpr std::uint64_t sample_stream = 0x73616d70; // "samp"

/// Worker count from JACKVAR_THREADS, defaulting to the machine's parallelism.
inline std::size_t threads_from_env() {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("JACKVAR_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return std::min<std::size_t>(static_cast<std::size_t>(v), hw * 4);
    }
    return hw;
}

namespace detail {

/// Runs body(k) for k in [0, count) on up to `threads` workers.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t k = next.fetch_add(1);
                if (k >= count) return;
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(count);
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    const Functional f = parse_functional(cfg.functional);
    const Population p = cfg.population.resolve();

    ExperimentReport report;
    report.config = cfg;
    try {
        report.oracles = compute_oracles(f, p);
    } catch (const numerical_error& e) {
        throw numerical_error(std::string("oracle evaluation failed for '") + cfg.functional + "' under " + p.name() +
                              ": " + e.what());
    }
    const Oracles& o = report.oracles;
    const double bound = f.is_trimmed_l() ? o.influence_sup_norm * o.influence_sup_norm
                                          : std::numeric_limits<double>::infinity();

    const std::size_t R = cfg.replications;
    report.rows.resize(cfg.n_values.size() * R);
    detail::parallel_for(report.rows.size(), threads, [&](std::size_t k) {
        const std::size_t n = cfg.n_values[k / R];
        const std::size_t r = k % R;
        const Sample x = sample(p, n, derive_seed(cfg.master_seed, n, r, sample_stream));
        const PseudovalueSet ps = pseudovalues(f, x);
        ReplicateRow row;
        row.n = n;
        row.rep = r;
        row.vjack = v_jack(ps);
        row.ij = infinitesimal_jackknife(f, x);
        if (cfg.wants("tau2")) row.tau2 = tau2(ps, bound);
        if (cfg.wants("bootstrap")) {
            const auto stats = pseudovalue_bootstrap(ps, bound, derive_seed(cfg.master_seed, n, r, bootstrap_stream),
                                                     cfg.bootstrap_reps);
            row.bootstrap_variance = cfg.bootstrap_reps > 1 ? unbiased_variance(stats) : 0.0;
        }
        if (cfg.wants("pushforward_ks")) row.pushforward_ks = pushforward_ks(ps, f, p, x);
        report.rows[k] = row;
    });

    for (std::size_t a = 0; a < cfg.n_values.size(); ++a) {
        SizeSummary s;
        s.n = cfg.n_values[a];
        s.replications = R;
        const double root_n = std::sqrt(static_cast<double>(s.n));
        std::vector<double> d1(R), d2(R), d3(R);
        std::map<std::string, std::vector<double>> extra;
        for (std::size_t r = 0; r < R; ++r) {
            const ReplicateRow& row = report.rows[a * R + r];
            d1[r] = root_n * (row.vjack - o.sigma2);
            d2[r] = root_n * (row.ij - o.sigma2);
            d3[r] = root_n * (row.vjack - row.ij);
            if (cfg.wants("tau2")) extra["tau2"].push_back(row.tau2);
            if (cfg.wants("bootstrap")) extra["bootstrap_variance"].push_back(row.bootstrap_variance);
            if (cfg.wants("pushforward_ks")) extra["pushforward_ks"].push_back(row.pushforward_ks);
        }
        s.vjack_minus_sigma2 = summarize(d1);
        s.ij_minus_sigma2 = summarize(d2);
        s.vjack_minus_ij = summarize(d3);
        s.ks_to_normal = ks_to_normal(d1);
        for (auto& [name, values] : extra) {
            s.estimators[name] = summarize(values);
            s.medians[name] = median(values);
        }
        report.sizes.push_back(std::move(s));
    }
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

struct SweepRow {
    std::size_t n = 0;
    std::string statistic;
    double empirical_variance = 0.0;
    double oracle = 0.0;
    double ratio = 0.0; // NaN when the oracle is zero
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<std::pair<std::size_t, double>> mean_square_vjack_minus_ij;
    bool mean_square_nonincreasing = true;
};

inline SweepTable convergence_sweep(const ExperimentReport& report) {
    if (report.sizes.size() < 2) throw input_error("a sweep needs at least two values of n");
    SweepTable t;
    const double avar = report.oracles.avar_vjack;
    auto ratio = [](double v, double oracle) {
        return oracle != 0.0 ? v / oracle : std::numeric_limits<double>::quiet_NaN();
    };
    for (const SizeSummary& s : report.sizes) {
        t.rows.push_back({s.n, "vjack_minus_sigma2", s.vjack_minus_sigma2.variance, avar,
                          ratio(s.vjack_minus_sigma2.variance, avar)});
        t.rows.push_back({s.n, "ij_minus_sigma2", s.ij_minus_sigma2.variance, avar,
                          ratio(s.ij_minus_sigma2.variance, avar)});
        t.rows.push_back({s.n, "vjack_minus_ij", s.vjack_minus_ij.variance, 0.0,
                          std::numeric_limits<double>::quiet_NaN()});
        if (!t.mean_square_vjack_minus_ij.empty() && s.vjack_minus_ij.mean_square > t.mean_square_vjack_minus_ij.back().second)
            t.mean_square_nonincreasing = false;
        t.mean_square_vjack_minus_ij.emplace_back(s.n, s.vjack_minus_ij.mean_square);
    }
    return t;
}

inline SweepTable convergence_sweep(const ExperimentConfig& cfg, std::size_t threads = 1) {
    if (cfg.n_values.size() < 2) throw input_error("a sweep needs at least two values of n");
    return convergence_sweep(run_experiment(cfg, threads));
}

} // namespace jackvar
