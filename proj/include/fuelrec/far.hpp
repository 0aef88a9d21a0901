#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fuelrec/common.hpp"

namespace fuelrec {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

// One vehicle-day of the Fleet Analytics Record. `values` and `imputed` are
// aligned with Far::features.
struct FarRow {
    std::string vehicle_id;
    std::string date_tx;  // YYYY-MM-DD (UTC)
    std::string vehicle_group;
    RouteType route_type = RouteType::combined;
    double trip_kms = kMissing;
    double fuel_consumption = kMissing;  // L/100 km
    std::vector<double> values;
    std::vector<std::uint8_t> imputed;
};

enum class Label : std::uint8_t { inlier, outlier_high, outlier_low, removed_data_quality };
std::string_view to_string(Label l) noexcept;
Label parse_label(std::string_view s);

struct Far {
    std::vector<std::string> features;  // explainable numeric columns
    std::vector<FarRow> rows;

    std::optional<std::size_t> column(std::string_view name) const noexcept;
    std::size_t require_column(std::string_view name) const;
};

// A FAR with one anomaly label per row.
struct LabeledFar {
    Far far;
    std::vector<Label> labels;
};

using GroupRouteKey = std::pair<std::string, RouteType>;
std::string key_text(const GroupRouteKey& key);

// Median feature values (and median fuel under the reserved name below) per
// vehicle_group and per (vehicle_group, route_type), with a global fallback.
struct GroupMedians {
    static constexpr std::string_view kFuel = "fuel_consumption";

    std::map<std::string, std::map<std::string, double>> by_group;
    std::map<GroupRouteKey, std::map<std::string, double>> by_group_route;
    std::map<std::string, double> global;
    bool inliers_only = false;
    std::string provenance;  // date range the medians were computed from

    std::optional<double> group_value(const std::string& group, const std::string& feature) const;
    std::optional<double> group_route_value(const GroupRouteKey& key, const std::string& feature) const;
    std::optional<double> global_value(const std::string& feature) const;
};

// Chronological split: the last `1 - train_fraction` of each vehicle's dates
// are test rows. Returns true for training rows.
std::vector<bool> chronological_split(const Far& far, double train_fraction);
// Seeded row-level random split, same convention.
std::vector<bool> random_split(const Far& far, double train_fraction, std::uint64_t seed);

// Text forms. Every writer prefixes `header_line` (a `#` comment) when non-empty.
std::string far_to_text(const Far& far, std::span<const Label> labels, std::string_view header_line);
std::string far_mask_to_text(const Far& far, std::string_view header_line);
LabeledFar far_from_text(const std::vector<std::string>& lines, const std::vector<std::string>* mask_lines = nullptr);
LabeledFar read_far(const std::string& path, const std::optional<std::string>& mask_path = std::nullopt);

std::string medians_to_text(const GroupMedians& m, std::string_view header_line);
GroupMedians medians_from_text(const std::vector<std::string>& lines);

}  // namespace fuelrec
