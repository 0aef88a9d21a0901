#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fuelrec/explain.hpp"
#include "fuelrec/gam.hpp"
#include "fuelrec/metrics.hpp"
#include "fuelrec/model.hpp"
#include "fuelrec/synth.hpp"
#include "fuelrec/telemetry.hpp"

namespace fuelrec {

enum class SplitKind { temporal, random };
// Which retained rows feed the explaining phase; accuracy metrics always use the test split.
enum class ExplainScope { test, all };

struct PipelineConfig {
    RouteThresholds route;  // th_kms, low_th_time, high_th_time
    std::size_t th_ebm_var = 100;
    double min_day_km = 5.0;
    std::size_t min_days_anomalies = 3;
    double min_dev_total_avg_fuel = 1.0;
    double corr_threshold = 0.7;
    std::size_t min_points_per_key = 8;

    ModelMode model_mode = ModelMode::plain;
    std::vector<ModelMode> modes = {ModelMode::plain, ModelMode::monotone, ModelMode::ebm_var};
    std::map<std::string, Monotone> monotone;
    GamConfig gam;
    std::vector<std::string> subgroup_keys = {"vehicle_group"};

    double train_fraction = 0.9;
    SplitKind split = SplitKind::temporal;
    std::uint64_t seed = 7;
    ExplainScope explain_scope = ExplainScope::all;

    bool monotonicity_filter_enabled = true;
    MonotoneFilterMode monotonicity_filter_mode = MonotoneFilterMode::by_direction;
    bool filter_before_rules = false;
    RuleOptions rules;

    std::string registry_path;
    std::string vin_table_path;
    std::string catalog_path;
    std::string input_path;
    std::string output_dir = "out";

    // Applies one `key = value` setting; throws ConfigError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    // Overrides every known key from FUELREC_<KEY> environment variables (upper case).
    void apply_env();
    void validate() const;
    // Canonical `key=value` dump; hash() covers everything except output_dir.
    std::string to_text() const;
    std::string hash() const;
    std::string header_line() const;

    static PipelineConfig from_lines(const std::vector<std::string>& lines);
};

// Defaults, then the file (if any), then environment overrides.
PipelineConfig load_config(const std::optional<std::string>& path, bool use_env = true);

// Output locations inside output_dir.
struct PipelinePaths {
    std::string dir;
    explicit PipelinePaths(std::string output_dir) : dir(std::move(output_dir)) {}

    std::string file(const std::string& name) const { return dir + "/" + name; }
    std::string mode_file(ModelMode m, const std::string& name) const {
        return dir + "/" + std::string(to_string(m)) + "/" + name;
    }
};

std::string stage_ingest(const PipelineConfig& cfg);
std::string stage_detect(const PipelineConfig& cfg);
std::string stage_train(const PipelineConfig& cfg, ModelMode mode);
std::string stage_explain(const PipelineConfig& cfg, ModelMode mode);
std::string stage_recommend(const PipelineConfig& cfg, ModelMode mode);

struct ModeMetrics {
    ModelMode mode = ModelMode::plain;
    std::size_t n_model_features = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double train_mape = 0.0;
    double train_adj_r2 = 0.0;
    double test_mape = 0.0;
    double test_adj_r2 = 0.0;
    std::size_t n_explained = 0;  // outlier vehicle-dates in the explaining phase
    double n_features_mean = 0.0;
    double rel_importance_mean = 0.0;
    double xai_mape_mean = 0.0;
    double per_var_mean = 0.0;
    double per_below_mean = 0.0;    // over vehicle groups
    double per_below_pooled = 0.0;  // over vehicle-dates
    double stability_mean = 0.0;
    std::optional<CatalogCheck> catalog;
    std::map<std::string, double> per_below;
    std::map<std::string, double> per_below_single;
    std::map<std::string, double> per_mon;
    // Per-unit samples used by the contrasts.
    std::vector<double> test_ape, n_features, rel_importance, xai_mape, per_var, stability;
};

struct Evaluation {
    std::vector<ModeMetrics> modes;
    std::vector<Contrast> contrasts;
    std::string report;
};

// Metrics for every configured mode whose model file exists.
Evaluation evaluate(const PipelineConfig& cfg);
std::string stage_evaluate(const PipelineConfig& cfg);

// ingest, detect, train/explain/recommend per mode, evaluate.
std::string run_all(const PipelineConfig& cfg);

// Writes raw.csv, oracle.csv, vin_table.csv and catalog.csv into `output_dir`.
std::string stage_synth(const SynthConfig& cfg, const std::string& output_dir);

}  // namespace fuelrec
