#include "fuelrec/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>
#include <tuple>

#include "fuelrec/anomaly.hpp"
#include "fuelrec/recommend.hpp"

namespace fuelrec {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "' needs true/false, got '" + v + "'");
}

double parse_number(const std::string& key, const std::string& v) {
    double d = 0.0;
    if (!try_parse_double(v, d) || !std::isfinite(d)) throw ConfigError("'" + key + "' needs a number, got '" + v + "'");
    return d;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    const double d = parse_number(key, v);
    if (d < 0 || d != std::floor(d)) throw ConfigError("'" + key + "' needs a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(d);
}

std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    for (const auto& p : split(v)) {
        const auto t = trim(p);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

std::string_view to_string(SplitKind s) { return s == SplitKind::temporal ? "temporal" : "random"; }
std::string_view filter_mode_name(MonotoneFilterMode m) {
    return m == MonotoneFilterMode::by_direction ? "by_direction" : "strict_ascending";
}

const char* const kScalarKeys[] = {
    "th_kms", "low_th_time", "high_th_time", "th_ebm_var", "min_day_km", "min_days_anomalies",
    "min_dev_total_avg_fuel", "corr_threshold", "min_points_per_key", "model_mode", "modes", "max_bins",
    "learning_rate", "rounds", "early_stopping_patience", "validation_fraction", "inner_bags", "subgroup_keys",
    "train_fraction", "split", "seed", "monotonicity_filter_enabled", "monotonicity_filter_mode",
    "explain_scope", "filter_before_rules", "br1", "br2", "br3", "br4", "br5", "min_relative_impact", "max_total_share", "registry",
    "vin_table", "catalog", "input", "output",
};

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
    const std::string& v = value;
    if (key == "th_kms") route.th_kms = parse_number(key, v);
    else if (key == "low_th_time") route.low_th_time = parse_number(key, v);
    else if (key == "high_th_time") route.high_th_time = parse_number(key, v);
    else if (key == "th_ebm_var") th_ebm_var = parse_count(key, v);
    else if (key == "min_day_km") min_day_km = parse_number(key, v);
    else if (key == "min_days_anomalies") min_days_anomalies = parse_count(key, v);
    else if (key == "min_dev_total_avg_fuel") min_dev_total_avg_fuel = parse_number(key, v);
    else if (key == "corr_threshold") corr_threshold = parse_number(key, v);
    else if (key == "min_points_per_key") min_points_per_key = parse_count(key, v);
    else if (key == "model_mode") model_mode = parse_model_mode(v);
    else if (key == "modes") {
        modes.clear();
        for (const auto& m : parse_list(v)) modes.push_back(parse_model_mode(m));
    } else if (key.rfind("monotone.", 0) == 0) {
        monotone[key.substr(9)] = parse_monotone(v);
    } else if (key == "max_bins") gam.max_bins = parse_count(key, v);
    else if (key == "learning_rate") gam.learning_rate = parse_number(key, v);
    else if (key == "rounds") gam.rounds = parse_count(key, v);
    else if (key == "early_stopping_patience") gam.early_stopping_patience = parse_count(key, v);
    else if (key == "validation_fraction") gam.validation_fraction = parse_number(key, v);
    else if (key == "inner_bags") gam.inner_bags = parse_count(key, v);
    else if (key == "subgroup_keys") subgroup_keys = parse_list(v);
    else if (key == "train_fraction") train_fraction = parse_number(key, v);
    else if (key == "split") {
        if (v == "temporal") split = SplitKind::temporal;
        else if (v == "random") split = SplitKind::random;
        else throw ConfigError("'split' must be temporal or random, got '" + v + "'");
    } else if (key == "explain_scope") {
        if (v == "test") explain_scope = ExplainScope::test;
        else if (v == "all") explain_scope = ExplainScope::all;
        else throw ConfigError("'explain_scope' must be test or all, got '" + v + "'");
    } else if (key == "seed") seed = parse_count(key, v);
    else if (key == "monotonicity_filter_enabled") monotonicity_filter_enabled = parse_bool(key, v);
    else if (key == "monotonicity_filter_mode") {
        if (v == "by_direction") monotonicity_filter_mode = MonotoneFilterMode::by_direction;
        else if (v == "strict_ascending") monotonicity_filter_mode = MonotoneFilterMode::strict_ascending;
        else throw ConfigError("'monotonicity_filter_mode' must be by_direction or strict_ascending");
    } else if (key == "filter_before_rules") filter_before_rules = parse_bool(key, v);
    else if (key == "br1") rules.br1 = parse_bool(key, v);
    else if (key == "br2") rules.br2 = parse_bool(key, v);
    else if (key == "br3") rules.br3 = parse_bool(key, v);
    else if (key == "br4") rules.br4 = parse_bool(key, v);
    else if (key == "br5") rules.br5 = parse_bool(key, v);
    else if (key == "min_relative_impact") rules.min_relative_impact = parse_number(key, v);
    else if (key == "max_total_share") rules.max_total_share = parse_number(key, v);
    else if (key == "registry") registry_path = v;
    else if (key == "vin_table") vin_table_path = v;
    else if (key == "catalog") catalog_path = v;
    else if (key == "input") input_path = v;
    else if (key == "output") output_dir = v;
    else throw ConfigError("unknown config key '" + key + "'");
}

void PipelineConfig::apply_env() {
    for (const char* key : kScalarKeys) {
        std::string name = "FUELREC_";
        for (const char* c = key; *c; ++c) name += static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
        if (const char* v = std::getenv(name.c_str())) set(key, v);
    }
}

void PipelineConfig::validate() const {
    if (!(route.low_th_time >= 0.0 && route.low_th_time <= route.high_th_time && route.high_th_time <= 1.0))
        throw ConfigError("route thresholds need 0 <= low_th_time <= high_th_time <= 1");
    if (!(route.th_kms > 0.0)) throw ConfigError("th_kms must be positive");
    if (th_ebm_var < 2) throw ConfigError("th_ebm_var must be at least 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
    if (gam.max_bins < 2) throw ConfigError("max_bins must be at least 2");
    if (!(gam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(gam.validation_fraction >= 0.0 && gam.validation_fraction < 1.0))
        throw ConfigError("validation_fraction must lie in [0,1)");
    if (!(corr_threshold > 0.0 && corr_threshold <= 1.0)) throw ConfigError("corr_threshold must lie in (0,1]");
    if (modes.empty()) throw ConfigError("'modes' lists no model mode");
    if (subgroup_keys.empty()) throw ConfigError("'subgroup_keys' is empty");
    for (const auto& k : subgroup_keys)
        if (k != "vehicle_group" && k != "route_type") throw ConfigError("subgroup key '" + k + "' is not supported");
}

std::string PipelineConfig::to_text() const {
    std::ostringstream o;
    std::vector<std::string> mode_names;
    for (auto m : modes) mode_names.emplace_back(fuelrec::to_string(m));
    o << "th_kms=" << format_double(route.th_kms) << '\n'
      << "low_th_time=" << format_double(route.low_th_time) << '\n'
      << "high_th_time=" << format_double(route.high_th_time) << '\n'
      << "th_ebm_var=" << th_ebm_var << '\n'
      << "min_day_km=" << format_double(min_day_km) << '\n'
      << "min_days_anomalies=" << min_days_anomalies << '\n'
      << "min_dev_total_avg_fuel=" << format_double(min_dev_total_avg_fuel) << '\n'
      << "corr_threshold=" << format_double(corr_threshold) << '\n'
      << "min_points_per_key=" << min_points_per_key << '\n'
      << "model_mode=" << fuelrec::to_string(model_mode) << '\n'
      << "modes=" << join(mode_names) << '\n';
    for (const auto& [f, m] : monotone) o << "monotone." << f << '=' << fuelrec::to_string(m) << '\n';
    o << "max_bins=" << gam.max_bins << '\n'
      << "learning_rate=" << format_double(gam.learning_rate) << '\n'
      << "rounds=" << gam.rounds << '\n'
      << "early_stopping_patience=" << gam.early_stopping_patience << '\n'
      << "validation_fraction=" << format_double(gam.validation_fraction) << '\n'
      << "inner_bags=" << gam.inner_bags << '\n'
      << "subgroup_keys=" << join(subgroup_keys) << '\n'
      << "train_fraction=" << format_double(train_fraction) << '\n'
      << "split=" << to_string(split) << '\n'
      << "seed=" << seed << '\n'
      << "explain_scope=" << (explain_scope == ExplainScope::test ? "test" : "all") << '\n'
      << "monotonicity_filter_enabled=" << (monotonicity_filter_enabled ? "true" : "false") << '\n'
      << "monotonicity_filter_mode=" << filter_mode_name(monotonicity_filter_mode) << '\n'
      << "filter_before_rules=" << (filter_before_rules ? "true" : "false") << '\n'
      << "br1=" << (rules.br1 ? "true" : "false") << '\n'
      << "br2=" << (rules.br2 ? "true" : "false") << '\n'
      << "br3=" << (rules.br3 ? "true" : "false") << '\n'
      << "br4=" << (rules.br4 ? "true" : "false") << '\n'
      << "br5=" << (rules.br5 ? "true" : "false") << '\n'
      << "min_relative_impact=" << format_double(rules.min_relative_impact) << '\n'
      << "max_total_share=" << format_double(rules.max_total_share) << '\n'
      << "registry=" << registry_path << '\n'
      << "vin_table=" << vin_table_path << '\n'
      << "catalog=" << catalog_path << '\n'
      << "input=" << input_path << '\n'
      << "output=" << output_dir << '\n';
    return o.str();
}

std::string PipelineConfig::hash() const {
    auto text = to_text();
    text.erase(text.find("output="));
    return hex64(fnv1a64(text));
}

std::string PipelineConfig::header_line() const {
    return "# " + std::string(kToolVersion) + " config=" + hash();
}

PipelineConfig PipelineConfig::from_lines(const std::vector<std::string>& lines) {
    PipelineConfig c;
    for (const auto& line : lines) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
        c.set(std::string(trim(std::string_view(line).substr(0, eq))),
              std::string(trim(std::string_view(line).substr(eq + 1))));
    }
    return c;
}

PipelineConfig load_config(const std::optional<std::string>& path, bool use_env) {
    PipelineConfig c;
    if (path && !path->empty()) {
        if (!std::filesystem::exists(*path)) throw ConfigError("config file '" + *path + "' not found");
        c = PipelineConfig::from_lines(read_data_lines(*path));
    }
    if (use_env) c.apply_env();
    c.validate();
    return c;
}

namespace {

std::optional<std::string> opt_path(const std::string& p) {
    if (p.empty()) return std::nullopt;
    return p;
}

std::vector<bool> make_split(const Far& far, const PipelineConfig& cfg) {
    return cfg.split == SplitKind::temporal ? chronological_split(far, cfg.train_fraction)
                                            : random_split(far, cfg.train_fraction, cfg.seed);
}

std::vector<std::string> require_lines(const std::string& path, const std::string& stage) {
    if (!std::filesystem::exists(path))
        throw DataError("missing input '" + path + "' (run the " + stage + " stage first)");
    return read_data_lines(path);
}

LabeledFar load_labeled(const PipelinePaths& p) {
    require_lines(p.file("far_labeled.csv"), "detect");
    auto lfar = read_far(p.file("far_labeled.csv"), p.file("far_mask.csv"));
    if (lfar.labels.size() != lfar.far.rows.size()) throw DataError("labeled FAR has no label column");
    return lfar;
}

// Held-out rows: test split, minus data-quality removals.
std::vector<bool> test_rows(const LabeledFar& lfar, const std::vector<bool>& train) {
    std::vector<bool> out(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        out[i] = !train[i] && lfar.labels[i] != Label::removed_data_quality;
    return out;
}

// Rows the outliers are explained from: the test split or every retained row.
std::vector<bool> explain_scope_rows(const LabeledFar& lfar, const std::vector<bool>& train, const PipelineConfig& cfg) {
    if (cfg.explain_scope == ExplainScope::test) return test_rows(lfar, train);
    std::vector<bool> out(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) out[i] = lfar.labels[i] != Label::removed_data_quality;
    return out;
}

std::vector<bool> train_rows(const LabeledFar& lfar, const std::vector<bool>& train) {
    std::vector<bool> out(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) out[i] = train[i] && lfar.labels[i] != Label::removed_data_quality;
    return out;
}

struct Fit {
    std::vector<double> pred, real;
    std::vector<std::string> vehicle;
};

Fit predict_rows(const FuelModel& model, const Far& far, const std::vector<bool>& include) {
    const RowEncoder enc(far, model.feature_order());
    Fit f;
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        if (!include[i]) continue;
        const auto& r = far.rows[i];
        f.pred.push_back(model.predict(model.subgroup_of(r), enc.encode(r)));
        f.real.push_back(r.fuel_consumption);
        f.vehicle.push_back(r.vehicle_id);
    }
    return f;
}

FeatureRegistry load_registry_for(const PipelineConfig& cfg) { return load_registry(opt_path(cfg.registry_path)); }

}  // namespace

std::string stage_ingest(const PipelineConfig& cfg) {
    if (cfg.input_path.empty()) throw ConfigError("no raw telemetry input configured (key 'input')");
    const PipelinePaths p(cfg.output_dir);
    const auto registry = load_registry_for(cfg);
    const auto raw = parse_raw_file(cfg.input_path);
    const auto daily = aggregate_daily(raw.records, AggregationRules::defaults(registry));
    const auto vins = VinTable::load(opt_path(cfg.vin_table_path));
    const auto far = build_far(daily, registry, vins, cfg.route);
    if (far.rows.empty()) throw DataError("raw telemetry produced no vehicle-days");
    auto cleaned = clean_far(far, cfg.min_day_km, cfg.corr_threshold);
    const auto split = make_split(cleaned.far, cfg);
    const auto medians = compute_group_medians(cleaned.far, MedianScope::all, MedianKeys::group, {}, split);
    ImputeReport imp;
    const auto imputed = impute_missing(cleaned.far, medians, &imp);

    std::ostringstream rep;
    rep << cfg.header_line() << '\n' << "item,value\n";
    rep << "raw_records," << raw.records.size() << '\n' << "malformed_lines," << raw.malformed << '\n';
    for (const auto& [var, n] : daily.ignored_by_variable) rep << "ignored_variable," << var << ',' << n << '\n';
    rep << "vehicle_days," << far.rows.size() << '\n';
    rep << cleaned.report.to_text();
    rep << "imputed_values," << imp.imputed_values << '\n' << "imputation_global_fallbacks," << imp.global_fallbacks << '\n';
    rep << "far_rows," << imputed.rows.size() << '\n' << "far_features," << imputed.features.size() << '\n';

    const auto h = cfg.header_line();
    AtomicFileSet out;
    out.add(p.file("far.csv"), far_to_text(imputed, {}, h));
    out.add(p.file("far_mask.csv"), far_mask_to_text(imputed, h));
    out.add(p.file("impute_medians.csv"), medians_to_text(medians, h));
    out.add(p.file("ingest_report.csv"), rep.str());
    out.commit();
    return "ingest: " + std::to_string(imputed.rows.size()) + " vehicle-days, " +
           std::to_string(imputed.features.size()) + " features, " + std::to_string(imp.imputed_values) +
           " imputed values";
}

std::string stage_detect(const PipelineConfig& cfg) {
    const PipelinePaths p(cfg.output_dir);
    require_lines(p.file("far.csv"), "ingest");
    const auto lfar = read_far(p.file("far.csv"), p.file("far_mask.csv"));
    if (lfar.far.rows.empty()) throw DataError("FAR '" + p.file("far.csv") + "' has no rows");
    const auto det = detect_anomalies(lfar.far, {cfg.min_points_per_key});
    const auto split = make_split(det.labeled.far, cfg);
    const auto inlier = compute_group_medians(det.labeled.far, MedianScope::inliers_only, MedianKeys::group_route,
                                              det.labeled.labels, split);
    std::map<Label, std::size_t> counts;
    for (auto l : det.labeled.labels) ++counts[l];

    const auto h = cfg.header_line();
    AtomicFileSet out;
    out.add(p.file("far_labeled.csv"), far_to_text(det.labeled.far, det.labeled.labels, h));
    out.add(p.file("limits.csv"), det.limits.to_text(h));
    out.add(p.file("inlier_medians.csv"), medians_to_text(inlier, h));
    out.commit();
    std::ostringstream s;
    s << "detect:";
    for (const auto& [l, n] : counts) s << ' ' << to_string(l) << '=' << n;
    return s.str();
}

std::string stage_train(const PipelineConfig& cfg, ModelMode mode) {
    const PipelinePaths p(cfg.output_dir);
    const auto lfar = load_labeled(p);
    const auto registry = load_registry_for(cfg);
    const auto split = make_split(lfar.far, cfg);
    const auto train = train_rows(lfar, split);
    const auto test = test_rows(lfar, split);

    TrainOptions opts;
    opts.mode = mode;
    opts.gam = cfg.gam;
    opts.gam.seed = cfg.seed;
    opts.th_ebm_var = cfg.th_ebm_var;
    opts.subgroup_keys = cfg.subgroup_keys;
    if (mode == ModelMode::monotone) opts.monotone = cfg.monotone;
    const auto model = train_fuel_model(lfar.far, train, registry, opts);

    const std::size_t p_feat = model.feature_order().size();
    std::ostringstream m;
    m << cfg.header_line() << '\n' << "split,n,mape,adj_r2\n";
    std::string summary = "train " + std::string(to_string(mode)) + ":";
    for (const auto& [name, inc] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
        const auto f = predict_rows(model, lfar.far, *inc);
        if (f.real.empty()) {
            m << name << ",0,,\n";
            continue;
        }
        const double mp = mape(f.pred, f.real, f.vehicle);
        const double ar = f.real.size() > p_feat + 1 ? adj_r2(f.pred, f.real, p_feat) : kMissing;
        m << name << ',' << f.real.size() << ',' << format_double(mp) << ',' << format_double(ar) << '\n';
        summary += " " + std::string(name) + " mape=" + format_double(mp);
    }
    AtomicFileSet out;
    out.add(p.mode_file(mode, "model.json"), cfg.header_line() + "\n" + model.serialize());
    out.add(p.mode_file(mode, "model_metrics.csv"), m.str());
    out.commit();
    return summary;
}

namespace {

struct Explained {
    std::vector<ExplanationRow> raw;
    std::vector<ExplanationRow> filtered;
    std::vector<RuleTraceEntry> trace;
};

Explained explain_with(const PipelineConfig& cfg, const FuelModel& model, const LabeledFar& lfar,
                       const std::vector<bool>& test, const GroupMedians& inlier, const FeatureRegistry& registry) {
    Explained e;
    e.raw = raw_explanations(model, lfar, test);
    auto rules = [&](std::span<const ExplanationRow> in) {
        auto r = apply_business_rules(in, inlier, registry, cfg.rules);
        e.trace.insert(e.trace.end(), r.trace.begin(), r.trace.end());
        return std::move(r.rows);
    };
    auto mono = [&](std::span<const ExplanationRow> in) {
        if (!cfg.monotonicity_filter_enabled) return std::vector<ExplanationRow>(in.begin(), in.end());
        auto r = filter_monotonic(in, registry, cfg.monotonicity_filter_mode);
        e.trace.insert(e.trace.end(), r.trace.begin(), r.trace.end());
        return std::move(r.rows);
    };
    e.filtered = cfg.filter_before_rules ? rules(mono(e.raw)) : mono(rules(e.raw));
    return e;
}

}  // namespace

std::string stage_explain(const PipelineConfig& cfg, ModelMode mode) {
    const PipelinePaths p(cfg.output_dir);
    const auto model = FuelModel::load(p.mode_file(mode, "model.json"));
    const auto lfar = load_labeled(p);
    const auto registry = load_registry_for(cfg);
    const auto inlier = medians_from_text(require_lines(p.file("inlier_medians.csv"), "detect"));
    const auto split = make_split(lfar.far, cfg);
    const auto e = explain_with(cfg, model, lfar, explain_scope_rows(lfar, split, cfg), inlier, registry);

    const auto h = cfg.header_line();
    AtomicFileSet out;
    out.add(p.mode_file(mode, "explanations_raw.csv"), explanations_to_text(e.raw, h));
    out.add(p.mode_file(mode, "explanations.csv"), explanations_to_text(e.filtered, h));
    out.add(p.mode_file(mode, "rule_trace.csv"), trace_to_text(e.trace, h));
    out.commit();
    return "explain " + std::string(to_string(mode)) + ": " + std::to_string(vehicle_date_ranges(e.raw).size()) +
           " outlier vehicle-dates, " + std::to_string(e.filtered.size()) + " of " + std::to_string(e.raw.size()) +
           " feature rows retained";
}

std::string stage_recommend(const PipelineConfig& cfg, ModelMode mode) {
    const PipelinePaths p(cfg.output_dir);
    const auto model = FuelModel::load(p.mode_file(mode, "model.json"));
    const auto lfar = load_labeled(p);
    const auto registry = load_registry_for(cfg);
    const auto inlier = medians_from_text(require_lines(p.file("inlier_medians.csv"), "detect"));
    const auto limits = AnomalyLimitTable::from_text(require_lines(p.file("limits.csv"), "detect"));
    const auto filtered = explanations_from_text(require_lines(p.mode_file(mode, "explanations.csv"), "explain"));
    const auto split = make_split(lfar.far, cfg);

    const ReferenceTable refs(inlier, registry, model);
    const auto recs = get_recom(filtered, refs, registry, limits);
    const SummaryConfig sc{cfg.min_days_anomalies, cfg.min_day_km, cfg.min_dev_total_avg_fuel};
    const auto summary = get_summ_recom(filtered, lfar.far, refs, registry, limits, model, sc);
    const auto manager = fleet_manager_view(model, lfar.far, explain_scope_rows(lfar, split, cfg), refs, registry, true);

    const auto h = cfg.header_line();
    AtomicFileSet out;
    out.add(p.mode_file(mode, "recommendations_daily.csv"), recommendations_to_text(recs.rows, h));
    out.add(p.mode_file(mode, "recommendations_group.csv"), group_recommendations_to_text(recs.groups, h));
    out.add(p.mode_file(mode, "summary.txt"), summary_to_text(summary, h));
    out.add(p.mode_file(mode, "manager_view.csv"), manager_view_to_text(manager, h));
    out.commit();
    std::size_t inl = 0;
    for (const auto& g : recs.groups) inl += g.becomes_inlier;
    return "recommend " + std::string(to_string(mode)) + ": " + std::to_string(recs.groups.size()) +
           " vehicle-dates, " + std::to_string(inl) + " brought under the fence, " +
           std::to_string(summary.aggregates.size()) + " summary prototypes" +
           (refs.fallbacks() ? ", " + std::to_string(refs.fallbacks()) + " global-median fallbacks" : "");
}

Evaluation evaluate(const PipelineConfig& cfg) {
    const PipelinePaths p(cfg.output_dir);
    const auto lfar = load_labeled(p);
    const auto registry = load_registry_for(cfg);
    const auto inlier = medians_from_text(require_lines(p.file("inlier_medians.csv"), "detect"));
    const auto limits = AnomalyLimitTable::from_text(require_lines(p.file("limits.csv"), "detect"));
    std::optional<Catalog> catalog;
    if (!cfg.catalog_path.empty()) catalog = Catalog::from_text(require_lines(cfg.catalog_path, "synth"));
    const auto split = make_split(lfar.far, cfg);
    const auto train = train_rows(lfar, split);
    const auto test = test_rows(lfar, split);
    const auto scope = explain_scope_rows(lfar, split, cfg);

    Evaluation ev;
    for (auto mode : cfg.modes) {
        if (!std::filesystem::exists(p.mode_file(mode, "model.json"))) continue;
        const auto model = FuelModel::load(p.mode_file(mode, "model.json"));
        ModeMetrics mm;
        mm.mode = mode;
        mm.n_model_features = model.feature_order().size();

        const auto ftr = predict_rows(model, lfar.far, train);
        const auto fte = predict_rows(model, lfar.far, test);
        mm.n_train = ftr.real.size();
        mm.n_test = fte.real.size();
        if (mm.n_train) {
            mm.train_mape = mape(ftr.pred, ftr.real, ftr.vehicle);
            mm.train_adj_r2 = mm.n_train > mm.n_model_features + 1 ? adj_r2(ftr.pred, ftr.real, mm.n_model_features) : kMissing;
        }
        if (mm.n_test) {
            mm.test_mape = mape(fte.pred, fte.real, fte.vehicle);
            mm.test_adj_r2 = mm.n_test > mm.n_model_features + 1 ? adj_r2(fte.pred, fte.real, mm.n_model_features) : kMissing;
            for (std::size_t i = 0; i < mm.n_test; ++i)
                mm.test_ape.push_back(std::abs(fte.pred[i] - fte.real[i]) / fte.real[i]);
        }

        const auto raw = explanations_from_text(require_lines(p.mode_file(mode, "explanations_raw.csv"), "explain"));
        const auto filtered = explanations_from_text(require_lines(p.mode_file(mode, "explanations.csv"), "explain"));
        const auto rep = representativeness(raw, filtered);
        mm.n_explained = rep.size();
        for (const auto& r : rep) {
            mm.n_features.push_back(static_cast<double>(r.n_features));
            mm.rel_importance.push_back(r.rel_importance);
        }
        for (const auto& [v, x] : xai_mape(rep)) mm.xai_mape.push_back(x);

        // Every explained vehicle-date gets a group entry; those with no retained
        // feature keep their real fuel.
        const ReferenceTable refs(inlier, registry, model);
        auto recs = get_recom(filtered, refs, registry, limits);
        std::set<std::pair<std::string, std::string>> covered;
        for (const auto& g : recs.groups) covered.insert({g.vehicle_id, g.date_tx});
        std::vector<GroupRecommendation> all;
        for (const auto& [b, e] : vehicle_date_ranges(raw)) {
            const auto& h = raw[b];
            if (covered.count({h.vehicle_id, h.date_tx})) continue;
            const auto* lim = limits.find({h.vehicle_group, h.route_type});
            const double ls = lim ? lim->limits.lim_sup : kMissing;
            all.push_back({h.vehicle_id, h.date_tx, h.vehicle_group, h.route_type, 0, h.y_pred, h.y_real, 0.0,
                           h.y_real, ls, h.y_real <= ls});
        }
        recs.groups.insert(recs.groups.end(), all.begin(), all.end());
        std::sort(recs.groups.begin(), recs.groups.end(), [](const auto& a, const auto& b) {
            return std::tie(a.vehicle_id, a.date_tx) < std::tie(b.vehicle_id, b.date_tx);
        });
        const auto con = contrastiveness(recs);
        mm.per_var = con.per_var;
        mm.per_below = con.per_below;
        mm.per_below_single = con.per_below_single;
        std::size_t below = 0;
        for (const auto& g : recs.groups) below += g.y_updated_all <= g.lim_sup;
        mm.per_below_pooled = recs.groups.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(recs.groups.size());
        double pb = 0.0;
        for (const auto& [g, v] : con.per_below) pb += v;
        mm.per_below_mean = con.per_below.empty() ? 0.0 : pb / static_cast<double>(con.per_below.size());
        if (catalog) mm.catalog = catalog_checks(recs.groups, *catalog);

        mm.per_mon = per_mon(raw, registry, cfg.monotonicity_filter_mode);

        // Stability over the explaining-phase rows, evaluated at the outliers.
        const auto x = build_design(lfar.far, model.feature_order(), scope);
        const auto fsc = predict_rows(model, lfar.far, scope);
        std::vector<std::size_t> targets;
        std::size_t k = 0;
        for (std::size_t i = 0; i < lfar.far.rows.size(); ++i) {
            if (!scope[i]) continue;
            if (lfar.labels[i] == Label::outlier_high) targets.push_back(k);
            ++k;
        }
        if (x.n_rows >= 2)
            for (const auto& s : stability_error(x, fsc.pred, targets)) mm.stability.push_back(s.value);

        mm.n_features_mean = mean(mm.n_features);
        mm.rel_importance_mean = mean(mm.rel_importance);
        mm.xai_mape_mean = mean(mm.xai_mape);
        mm.per_var_mean = mean(mm.per_var);
        mm.stability_mean = mean(mm.stability);
        ev.modes.push_back(std::move(mm));
    }
    if (ev.modes.empty()) throw DataError("no trained model found in '" + cfg.output_dir + "' (run the train stage first)");

    for (std::size_t a = 0; a < ev.modes.size(); ++a)
        for (std::size_t b = a + 1; b < ev.modes.size(); ++b) {
            const auto& x = ev.modes[a];
            const auto& y = ev.modes[b];
            const std::string n1(to_string(x.mode)), n2(to_string(y.mode));
            ev.contrasts.push_back(contrast("test_ape", n1, x.test_ape, n2, y.test_ape));
            ev.contrasts.push_back(contrast("n_features", n1, x.n_features, n2, y.n_features));
            ev.contrasts.push_back(contrast("rel_importance", n1, x.rel_importance, n2, y.rel_importance));
            ev.contrasts.push_back(contrast("xai_mape", n1, x.xai_mape, n2, y.xai_mape));
            ev.contrasts.push_back(contrast("per_var", n1, x.per_var, n2, y.per_var));
            ev.contrasts.push_back(contrast("stability_error", n1, x.stability, n2, y.stability));
        }

    std::ostringstream r;
    r << cfg.header_line() << '\n';
    r << "[model]\nmode,n_features,n_train,train_mape,train_adj_r2,n_test,test_mape,test_adj_r2\n";
    for (const auto& m : ev.modes)
        r << to_string(m.mode) << ',' << m.n_model_features << ',' << m.n_train << ',' << format_double(m.train_mape)
          << ',' << format_double(m.train_adj_r2) << ',' << m.n_test << ',' << format_double(m.test_mape) << ','
          << format_double(m.test_adj_r2) << '\n';
    r << "[xai]\nmode,n_explained,n_features,rel_importance,xai_mape,per_var,per_below,per_below_pooled,"
         "stability_error,mape_vs_catalog,pct_below_catalog\n";
    for (const auto& m : ev.modes) {
        r << to_string(m.mode) << ',' << m.n_explained << ',' << format_double(m.n_features_mean) << ','
          << format_double(m.rel_importance_mean) << ',' << format_double(m.xai_mape_mean) << ','
          << format_double(m.per_var_mean) << ',' << format_double(m.per_below_mean) << ','
          << format_double(m.per_below_pooled) << ',' << format_double(m.stability_mean) << ',';
        if (m.catalog)
            r << format_double(m.catalog->mape_vs_catalog) << ',' << format_double(m.catalog->pct_below_catalog);
        else
            r << ',';
        r << '\n';
    }
    r << "[per_below]\nmode,vehicle_group,per_below,per_below_single\n";
    for (const auto& m : ev.modes)
        for (const auto& [g, v] : m.per_below)
            r << to_string(m.mode) << ',' << g << ',' << format_double(v) << ','
              << format_double(m.per_below_single.at(g)) << '\n';
    r << "[per_mon]\nmode,feature,per_mon\n";
    for (const auto& m : ev.modes)
        for (const auto& [f, v] : m.per_mon) r << to_string(m.mode) << ',' << f << ',' << format_double(v) << '\n';
    ev.report = r.str();
    return ev;
}

std::string stage_evaluate(const PipelineConfig& cfg) {
    const PipelinePaths p(cfg.output_dir);
    const auto ev = evaluate(cfg);
    AtomicFileSet out;
    out.add(p.file("metrics_report.txt"), ev.report);
    out.add(p.file("contrasts.csv"), contrasts_to_text(ev.contrasts, cfg.header_line()));
    out.commit();
    std::string s = "evaluate:";
    for (const auto& m : ev.modes)
        s += " " + std::string(to_string(m.mode)) + " test_mape=" + format_double(m.test_mape);
    return s;
}

std::string run_all(const PipelineConfig& cfg) {
    std::string log = stage_ingest(cfg) + "\n";
    log += stage_detect(cfg) + "\n";
    for (auto mode : cfg.modes) {
        log += stage_train(cfg, mode) + "\n";
        log += stage_explain(cfg, mode) + "\n";
        log += stage_recommend(cfg, mode) + "\n";
    }
    log += stage_evaluate(cfg);
    return log;
}

std::string stage_synth(const SynthConfig& cfg, const std::string& output_dir) {
    const std::string header = "# " + std::string(kToolVersion) + " synth=" + cfg.hash();
    const auto s = generate_fleet(cfg, header);
    AtomicFileSet out;
    out.add(output_dir + "/raw.csv", s.raw);
    out.add(output_dir + "/oracle.csv", s.oracle);
    out.add(output_dir + "/vin_table.csv", s.vins);
    out.add(output_dir + "/catalog.csv", s.catalog);
    out.commit();
    return "synth: " + std::to_string(s.n_days_total) + " vehicle-days, " + std::to_string(s.n_anomalies) +
           " injected anomalies";
}

}  // namespace fuelrec
