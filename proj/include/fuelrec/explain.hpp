#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuelrec/far.hpp"
#include "fuelrec/feature_registry.hpp"
#include "fuelrec/model.hpp"

namespace fuelrec {

struct ExplanationRow {
    std::string vehicle_id;
    std::string date_tx;
    std::string vehicle_group;
    RouteType route_type = RouteType::combined;
    std::string feature;
    double feature_value = 0.0;
    double relevance = 0.0;  // L/100 km
    double y_pred = 0.0;
    double y_real = 0.0;
    double intercept = 0.0;
};

enum class RuleId { BR1, BR2, BR3, BR4, BR5, MONO };
std::string_view to_string(RuleId r) noexcept;

struct RuleTraceEntry {
    std::string vehicle_id;
    std::string date_tx;
    std::string feature;  // "*" when the whole vehicle-date was dropped
    RuleId rule;
    std::string reason;
};

// Half-open index ranges of consecutive rows sharing (vehicle_id, date_tx, route_type).
std::vector<std::pair<std::size_t, std::size_t>> vehicle_date_ranges(std::span<const ExplanationRow> rows);

// One row per (vehicle-date, model feature) for the selected FAR rows.
std::vector<ExplanationRow> explain_rows(const FuelModel& model, const Far& far, std::span<const std::size_t> rows);

// Raw explanations of the outlier_high rows (restricted to `include` when given).
std::vector<ExplanationRow> raw_explanations(const FuelModel& model, const LabeledFar& lfar,
                                             const std::vector<bool>& include = {});

struct RuleOptions {
    bool br1 = true;
    bool br2 = true;
    bool br3 = true;
    bool br4 = true;
    bool br5 = true;
    double min_relative_impact = 0.01;
    double max_total_share = 0.8;
};

struct RuleResult {
    std::vector<ExplanationRow> rows;
    std::vector<RuleTraceEntry> trace;
};

// BR1 (categoricals) -> BR3 (vehicle-dates at or below inlier median fuel) ->
// BR4 (values on the wrong side of the inlier median) -> BR2 (relative impact
// below the floor) -> BR5 (cap on total retained relevance). `inlier_medians`
// must be keyed by (vehicle_group, route_type).
RuleResult apply_business_rules(std::span<const ExplanationRow> raw, const GroupMedians& inlier_medians,
                                const FeatureRegistry& registry, const RuleOptions& opts = {});

enum class MonotoneFilterMode {
    by_direction,  // non-decreasing for Positive, non-increasing for Negative features
    strict_ascending,  // non-decreasing for every feature
};

using ValueRelevance = std::pair<double, double>;

// The iterative filter on one (combination, feature) group: de-duplicate, sort by
// value (ties by relevance), drop every pair whose relevance falls below its
// predecessor, repeat until nothing is dropped. `decreasing` mirrors the check.
std::vector<ValueRelevance> monotone_pairs(std::vector<ValueRelevance> pairs, bool decreasing = false);

struct MonotoneStats {
    std::size_t pairs_before = 0;
    std::size_t pairs_after = 0;
};

struct MonotoneFilterResult {
    std::vector<ExplanationRow> rows;
    std::vector<RuleTraceEntry> trace;
    // Keyed by (feature, "<vehicle_group>/<route_type>").
    std::map<std::pair<std::string, std::string>, MonotoneStats> stats;
};

MonotoneFilterResult filter_monotonic(std::span<const ExplanationRow> explanations, const FeatureRegistry& registry,
                                      MonotoneFilterMode mode = MonotoneFilterMode::by_direction);

std::string explanations_to_text(std::span<const ExplanationRow> rows, std::string_view header_line);
std::vector<ExplanationRow> explanations_from_text(const std::vector<std::string>& lines);
std::string trace_to_text(std::span<const RuleTraceEntry> trace, std::string_view header_line);

}  // namespace fuelrec
