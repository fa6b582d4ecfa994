#pragma once

// JSON encodings of reports. Every document carries "schema_version" and "kind";
// see schemas/report.schema.json.

#include <cmath>
#include <ostream>
#include <string>

#include "json.hpp" // nlohmann/json

#include "jackvar/montecarlo.hpp"

namespace jackvar {

inline constexpr int report_schema_version = 1;

namespace detail {

/// NaN and infinities become null.
inline nlohmann::json number(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

inline nlohmann::json to_json(const StatisticSummary& s) {
    return {{"mean", number(s.mean)},
            {"variance", number(s.variance)},
            {"variance_se", number(s.variance_se)},
            {"mean_square", number(s.mean_square)}};
}

} // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : cfg.population.params) params[k] = v;
    return {{"functional", cfg.functional},
            {"population", {{"name", cfg.population.name}, {"params", params}}},
            {"n_values", cfg.n_values},
            {"replications", cfg.replications},
            {"master_seed", cfg.master_seed},
            {"estimators", cfg.estimators},
            {"bootstrap_reps", cfg.bootstrap_reps}};
}

inline nlohmann::json to_json(const Oracles& o) {
    return {{"sigma2", detail::number(o.sigma2)},
            {"avar_vjack", detail::number(o.avar_vjack)},
            {"var_phi2", detail::number(o.var_phi2)},
            {"influence_sup_norm", detail::number(o.influence_sup_norm)},
            {"bridge_nodes", o.bridge_nodes},
            {"sigma2_nodes", o.sigma2_nodes}};
}

inline nlohmann::json to_json(const ExperimentReport& r, bool include_wall_clock = true) {
    nlohmann::json sizes = nlohmann::json::array();
    for (const SizeSummary& s : r.sizes) {
        nlohmann::json est = nlohmann::json::object();
        for (const auto& [name, summary] : s.estimators) {
            est[name] = detail::to_json(summary);
            est[name]["median"] = detail::number(s.medians.at(name));
        }
        sizes.push_back({{"n", s.n},
                         {"replications", s.replications},
                         {"statistics",
                          {{"vjack_minus_sigma2", detail::to_json(s.vjack_minus_sigma2)},
                           {"ij_minus_sigma2", detail::to_json(s.ij_minus_sigma2)},
                           {"vjack_minus_ij", detail::to_json(s.vjack_minus_ij)}}},
                         {"ks_to_normal", detail::number(s.ks_to_normal)},
                         {"estimators", est}});
    }
    nlohmann::json j = {{"schema_version", report_schema_version},
                        {"kind", "experiment"},
                        {"config", to_json(r.config)},
                        {"master_seed", r.config.master_seed},
                        {"oracles", to_json(r.oracles)},
                        {"results", sizes}};
    if (include_wall_clock) j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

inline nlohmann::json to_json(const SweepTable& t, const ExperimentReport& r, bool include_wall_clock = true) {
    nlohmann::json rows = nlohmann::json::array();
    for (const SweepRow& row : t.rows)
        rows.push_back({{"n", row.n},
                        {"statistic", row.statistic},
                        {"empirical_variance", detail::number(row.empirical_variance)},
                        {"oracle", detail::number(row.oracle)},
                        {"ratio", detail::number(row.ratio)}});
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& [n, v] : t.mean_square_vjack_minus_ij) ms.push_back({{"n", n}, {"mean_square", detail::number(v)}});
    nlohmann::json j = {{"schema_version", report_schema_version},
                        {"kind", "sweep"},
                        {"config", to_json(r.config)},
                        {"master_seed", r.config.master_seed},
                        {"oracles", to_json(r.oracles)},
                        {"rows", rows},
                        {"mean_square_vjack_minus_ij", ms},
                        {"mean_square_nonincreasing", t.mean_square_nonincreasing}};
    if (include_wall_clock) j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

/// Per-replicate CSV with header n,rep,vjack,ij,scaled_diff (scaled_diff = sqrt(n)(vjack - ij)).
inline void write_raw_csv(std::ostream& out, const ExperimentReport& r) {
    out << "n,rep,vjack,ij,scaled_diff\n";
    out.precision(17);
    for (const ReplicateRow& row : r.rows) {
        out << row.n << ',' << row.rep << ',' << row.vjack << ',' << row.ij << ','
            << std::sqrt(static_cast<double>(row.n)) * (row.vjack - row.ij) << '\n';
    }
}

} // namespace jackvar
