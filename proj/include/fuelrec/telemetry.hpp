#pragma once

#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuelrec/far.hpp"
#include "fuelrec/feature_registry.hpp"

namespace fuelrec {

struct RawTelemetryRecord {
    std::string time_tx;
    std::string date_utc;  // YYYY-MM-DD of time_tx converted to UTC
    std::string vehicle_id;
    std::string variable_id;
    std::string value_text;
    std::optional<double> value;  // set when variable_value is numeric
};

struct RawParseResult {
    std::vector<RawTelemetryRecord> records;
    std::size_t malformed = 0;
};

// UTC calendar date of an ISO-8601 timestamp with optional offset
// (`2020-10-31 00:02:34.073000+00:00`, `2020-10-31T23:30:00-02:00`, `...Z`).
std::optional<std::string> utc_date_of(std::string_view timestamp);

RawParseResult parse_raw(std::istream& in);
RawParseResult parse_raw_file(const std::string& path);

enum class Aggregation { sum, mean, max, text };

// Maps raw variable ids onto daily quantities.
class AggregationRules {
public:
    static AggregationRules defaults(const FeatureRegistry& registry);

    struct Rule {
        std::string target;
        Aggregation agg;
    };
    const Rule* find(const std::string& variable_id) const;
    void set(std::string variable_id, Rule rule) { rules_[std::move(variable_id)] = std::move(rule); }

    // Auxiliary daily quantities that are not model features.
    static constexpr std::string_view kTripFuel = "trip_fuel_used";
    static constexpr std::string_view kCityDuration = "duration_city";
    static constexpr std::string_view kDrivingDuration = "duration_driving";
    static constexpr std::string_view kVin = "vin";

private:
    std::map<std::string, Rule> rules_;
};

struct DraftRow {
    std::string vehicle_id;
    std::string date_tx;
    std::map<std::string, double> values;  // aggregated numeric quantities
    std::string vin;
    double fuel_consumption = kMissing;
};

struct DailyAggregate {
    std::vector<DraftRow> rows;
    std::map<std::string, std::size_t> ignored_by_variable;
};

// One draft row per (vehicle_id, UTC date), sorted by key. Values within a
// vehicle-day are combined in a canonical order, so record order never matters.
DailyAggregate aggregate_daily(std::span<const RawTelemetryRecord> records, const AggregationRules& rules);

// Litres per 100 km; nullopt when the distance is not positive.
std::optional<double> compute_fuel(double trip_fuel_used, double trip_kms);

struct RouteThresholds {
    double th_kms = 30.0;
    double low_th_time = 0.5;
    double high_th_time = 0.65;
};

RouteType assign_route_type(double per_time_city, double trip_kms, const RouteThresholds& th);

class VinTable {
public:
    VinTable() = default;
    explicit VinTable(std::vector<std::pair<std::string, std::string>> prefixes);
    static VinTable parse(const std::vector<std::string>& lines);
    static VinTable load(const std::optional<std::string>& path);

    // Longest-prefix match, else `unknown_<first three characters>`.
    std::string decode(std::string_view vin) const;

private:
    std::vector<std::pair<std::string, std::string>> prefixes_;
};

// Turns draft rows into FAR rows over the registry's explainable columns:
// per_time_city derivation, vehicle group decoding and route type.
Far build_far(const DailyAggregate& daily, const FeatureRegistry& registry, const VinTable& vins,
              const RouteThresholds& th);

struct CleaningReport {
    std::size_t input_rows = 0;
    std::size_t dropped_null_target = 0;
    std::size_t dropped_short_trip = 0;
    std::vector<std::string> absent_features;
    std::vector<std::string> zero_variance_features;
    struct CorrelatedPair {
        std::string kept;
        std::string dropped;
        double correlation;
    };
    std::vector<CorrelatedPair> correlated;

    std::string to_text() const;
};

struct CleanResult {
    Far far;
    CleaningReport report;
};

// Drops null-target and short-trip rows, then removes absent, constant and
// highly correlated (|r| >= threshold, later name of a pair) feature columns.
// Throws DataError when no rows survive.
CleanResult clean_far(const Far& far, double min_day_km, double corr_threshold = 0.7);

enum class MedianScope { all, inliers_only };
enum class MedianKeys { group, group_route, both };

// Type-7 medians over non-imputed values of the selected rows. `include`
// (empty = every row) restricts rows, e.g. to the training date range; with
// MedianScope::inliers_only `labels` must be given.
GroupMedians compute_group_medians(const Far& far, MedianScope scope, MedianKeys keys,
                                   std::span<const Label> labels = {}, const std::vector<bool>& include = {});

struct ImputeReport {
    std::size_t imputed_values = 0;
    std::size_t global_fallbacks = 0;
};

// Replaces missing values with the vehicle_group median (global median when the
// group is unknown) and flags them in FarRow::imputed. The target is never touched.
Far impute_missing(const Far& far, const GroupMedians& medians, ImputeReport* report = nullptr);

}  // namespace fuelrec
