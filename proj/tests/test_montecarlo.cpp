#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "jackvar/montecarlo.hpp"
#include "jackvar/report_json.hpp"

using namespace jackvar;

namespace {

ExperimentConfig small_config(const std::string& functional, std::vector<std::size_t> ns, std::size_t R) {
    ExperimentConfig cfg;
    cfg.functional = functional;
    cfg.population = parse_population_key("normal:mu=1,sigma=1");
    cfg.n_values = std::move(ns);
    cfg.replications = R;
    cfg.master_seed = 31;
    return cfg;
}

} // namespace

TEST(PopulationKey, Parsing) {
    const auto k = parse_population_key("normal:mu=1,sigma=2");
    EXPECT_EQ(k.name, "normal");
    EXPECT_EQ(k.resolve().param1(), 1.0);
    EXPECT_EQ(k.resolve().param2(), 2.0);
    EXPECT_EQ(parse_population_key("exponential").resolve().param1(), 1.0);
    EXPECT_EQ(parse_population_key("uniform:b=3").resolve().param2(), 3.0);
    EXPECT_THROW(parse_population_key("cauchy"), input_error);
    EXPECT_THROW(parse_population_key("normal:mu"), input_error);
    EXPECT_THROW(parse_population_key("normal:lambda=2"), input_error);
    EXPECT_THROW(parse_population_key("normal:sigma=x"), input_error);
    EXPECT_THROW(parse_population_key("uniform:a=2,b=1"), input_error);
}

TEST(Summaries, KnownValues) {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto s = summarize(v);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.mean_square, 7.5);
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Summaries, VarianceStandardErrorIsCalibrated) {
    // Spread of sample variances over many batches vs the reported per-batch standard error.
    std::mt19937_64 g(40);
    std::exponential_distribution<double> e(1.0);
    const std::size_t R = 200, batches = 3000;
    std::vector<double> vars;
    double se_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
        std::vector<double> v(R);
        for (auto& x : v) x = e(g);
        const auto s = summarize(v);
        vars.push_back(s.variance);
        se_sum += s.variance_se;
    }
    const double empirical_sd = std::sqrt(summarize(vars).variance);
    EXPECT_NEAR(se_sum / batches, empirical_sd, 0.1 * empirical_sd);
}

TEST(Summaries, KsToNormal) {
    std::mt19937_64 g(41);
    std::normal_distribution<double> z(3.0, 2.0);
    std::uniform_real_distribution<double> u;
    std::vector<double> a(20000), b(20000);
    for (auto& x : a) x = z(g);
    for (auto& x : b) x = u(g);
    EXPECT_LT(ks_to_normal(a), 0.015);
    EXPECT_GT(ks_to_normal(b), 0.04);
    EXPECT_EQ(ks_to_normal(std::vector<double>{1.0, 1.0, 1.0}), 1.0);
}

TEST(Oracles, SmoothAndTrimmed) {
    const auto o = compute_oracles(parse_functional("square_of_mean"), Population::normal(1.0, 1.0));
    EXPECT_DOUBLE_EQ(o.sigma2, 4.0);
    EXPECT_DOUBLE_EQ(o.avar_vjack, 96.0);
    EXPECT_DOUBLE_EQ(o.var_phi2, 32.0);
    EXPECT_TRUE(std::isinf(o.influence_sup_norm));
    const auto t = compute_oracles(parse_functional("trimmed_l:raised_cosine:alpha=0.2"), Population::uniform(0.0, 1.0));
    EXPECT_NEAR(t.influence_sup_norm, 0.5, 1e-10);
    EXPECT_GT(t.avar_vjack, t.var_phi2);
    EXPECT_GT(t.bridge_nodes, 0u);
    const auto z = compute_oracles(parse_functional("trimmed_l:zero:alpha=0.2"), Population::normal(0.0, 1.0));
    EXPECT_EQ(z.sigma2, 0.0);
    EXPECT_EQ(z.avar_vjack, 0.0);
    EXPECT_EQ(z.var_phi2, 0.0);
}

TEST(RunExperiment, MeanFunctionalIdentity) {
    auto cfg = small_config("mean", {5, 40}, 50);
    const auto rep = run_experiment(cfg, 2);
    ASSERT_EQ(rep.rows.size(), 100u);
    for (const auto& row : rep.rows) {
        // v_jack = s^2 and IJ = (n-1)/n s^2, so sqrt(n)(v_jack - IJ) = s^2 / sqrt(n).
        const double n = static_cast<double>(row.n);
        EXPECT_NEAR(std::sqrt(n) * (row.vjack - row.ij), row.vjack / std::sqrt(n), 1e-12 * row.vjack);
        EXPECT_TRUE(std::isnan(row.tau2));
    }
}

TEST(RunExperiment, DeterministicAcrossThreadCounts) {
    auto cfg = small_config("trimmed_l:raised_cosine:alpha=0.2", {30, 60}, 40);
    cfg.population = parse_population_key("normal");
    cfg.estimators = {"v_jack", "ij", "tau2", "bootstrap", "pushforward_ks"};
    cfg.bootstrap_reps = 50;
    const auto a = run_experiment(cfg, 1);
    const auto b = run_experiment(cfg, 7);
    EXPECT_EQ(to_json(a, false).dump(), to_json(b, false).dump());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].vjack, b.rows[k].vjack);
        EXPECT_EQ(a.rows[k].bootstrap_variance, b.rows[k].bootstrap_variance);
    }
}

TEST(RunExperiment, SeedIsolation) {
    const auto small = run_experiment(small_config("square_of_mean", {50}, 10));
    const auto large = run_experiment(small_config("square_of_mean", {20, 50, 80}, 30), 3);
    for (std::size_t r = 0; r < 10; ++r) {
        const auto& a = small.rows[r];
        const auto& b = large.rows[30 + r];
        ASSERT_EQ(b.n, 50u);
        ASSERT_EQ(b.rep, r);
        EXPECT_EQ(a.vjack, b.vjack);
        EXPECT_EQ(a.ij, b.ij);
    }
}

TEST(RunExperiment, InvalidConfig) {
    auto cfg = small_config("mean", {10}, 1);
    EXPECT_THROW(run_experiment(cfg), input_error);
    cfg = small_config("mean", {1}, 5);
    EXPECT_THROW(run_experiment(cfg), input_error);
}

TEST(Sweep, Table) {
    const auto rep = run_experiment(small_config("square_of_mean", {25, 100}, 100));
    const auto t = convergence_sweep(rep);
    ASSERT_EQ(t.rows.size(), 6u);
    EXPECT_EQ(t.rows[0].statistic, "vjack_minus_sigma2");
    EXPECT_DOUBLE_EQ(t.rows[0].oracle, 96.0);
    EXPECT_DOUBLE_EQ(t.rows[0].ratio, t.rows[0].empirical_variance / 96.0);
    EXPECT_TRUE(std::isnan(t.rows[2].ratio));
    ASSERT_EQ(t.mean_square_vjack_minus_ij.size(), 2u);
    EXPECT_THROW(convergence_sweep(run_experiment(small_config("mean", {25}, 10))), input_error);
}

TEST(ReportJson, Shape) {
    auto cfg = small_config("square_of_mean", {10, 20}, 5);
    const auto rep = run_experiment(cfg);
    const auto j = to_json(rep);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["kind"], "experiment");
    EXPECT_TRUE(j["oracles"]["influence_sup_norm"].is_null());
    EXPECT_EQ(j["results"].size(), 2u);
    EXPECT_TRUE(j.contains("wall_clock_seconds"));
    EXPECT_FALSE(to_json(rep, false).contains("wall_clock_seconds"));
    const auto s = to_json(convergence_sweep(rep), rep);
    EXPECT_EQ(s["kind"], "sweep");
    std::ostringstream csv;
    write_raw_csv(csv, rep);
    const std::string text = csv.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "n,rep,vjack,ij,scaled_diff");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 10);
}

TEST(ThreadsFromEnv, Parses) {
    setenv("JACKVAR_THREADS", "1", 1);
    EXPECT_EQ(threads_from_env(), 1u);
    setenv("JACKVAR_THREADS", "junk", 1);
    EXPECT_GE(threads_from_env(), 1u);
    unsetenv("JACKVAR_THREADS");
    EXPECT_GE(threads_from_env(), 1u);
}
