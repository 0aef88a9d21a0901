#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fuelrec/anomaly.hpp"
#include "fuelrec/explain.hpp"
#include "fuelrec/far.hpp"
#include "fuelrec/feature_registry.hpp"
#include "fuelrec/model.hpp"

namespace fuelrec {

struct ReferenceEntry {
    double value = 0.0;      // median inlier value, or 0 for zero-reference features
    double relevance = 0.0;  // model term at `value`
    bool global_fallback = false;
};

// Counterfactual references per (vehicle_group, route_type, feature). Terms are
// looked up in the (combined, for EBM_var) shape of the key's subgroup.
class ReferenceTable {
public:
    ReferenceTable(const GroupMedians& inlier_medians, const FeatureRegistry& registry, const FuelModel& model);

    // Throws DataError if the feature is not in the model or has no median at all.
    const ReferenceEntry& get(const GroupRouteKey& key, const std::string& feature) const;
    std::size_t fallbacks() const noexcept { return fallbacks_; }

private:
    const GroupMedians& medians_;
    const FeatureRegistry& registry_;
    const FuelModel& model_;
    mutable std::map<std::pair<GroupRouteKey, std::string>, ReferenceEntry> cache_;
    mutable std::size_t fallbacks_ = 0;
};

struct RecommendationRow {
    std::string vehicle_id;
    std::string date_tx;
    std::string vehicle_group;
    RouteType route_type = RouteType::combined;
    std::string feature;
    double current_value = 0.0;
    double reference_value = 0.0;
    double relevance = 0.0;
    double reference_relevance = 0.0;
    double delta = 0.0;
    double y_pred = 0.0;
    double y_real = 0.0;
    double y_updated = 0.0;
    double lim_sup = 0.0;
    bool becomes_inlier = false;
};

struct GroupRecommendation {
    std::string vehicle_id;
    std::string date_tx;
    std::string vehicle_group;
    RouteType route_type = RouteType::combined;
    std::size_t n_features = 0;
    double y_pred = 0.0;
    double y_real = 0.0;
    double total_delta = 0.0;  // sum of positive deltas
    double y_updated_all = 0.0;
    double lim_sup = 0.0;
    bool becomes_inlier = false;
};

struct Recommendations {
    std::vector<RecommendationRow> rows;
    std::vector<GroupRecommendation> groups;  // one per vehicle-date in the input
};

// One row per actionable explanation feature; negative deltas are reported but
// left out of the group aggregate. Throws DataError on a missing limit key.
Recommendations get_recom(std::span<const ExplanationRow> explanations, const ReferenceTable& refs,
                          const FeatureRegistry& registry, const AnomalyLimitTable& limits);

struct SummaryConfig {
    std::size_t min_days_anomalies = 3;
    double min_day_km = 5.0;
    double min_dev_total_avg_fuel = 1.0;
};

struct SummaryAggregate {
    std::string vehicle_id;
    std::string vehicle_group;
    RouteType route_type = RouteType::combined;
    std::size_t n_days = 0;
    std::string first_date;
    std::string last_date;
    double y_real = 0.0;
    double total_delta = 0.0;
    double y_updated_all = 0.0;
    bool becomes_inlier = false;
};

struct SummaryResult {
    std::vector<ExplanationRow> prototypes;
    Recommendations recommendations;
    std::vector<SummaryAggregate> aggregates;
};

// Operator summary: filter vehicle x route combinations and dates, build one
// lower-median prototype per combination, recommend on the prototypes.
// `trip_kms` is looked up in `far` by (vehicle_id, date_tx).
SummaryResult get_summ_recom(std::span<const ExplanationRow> explanations, const Far& far, const ReferenceTable& refs,
                             const FeatureRegistry& registry, const AnomalyLimitTable& limits, const FuelModel& model,
                             const SummaryConfig& cfg = {});

struct ManagerRow {
    std::string vehicle_group;  // "*" for the fleet row
    std::string route_type;     // "*" when aggregated over routes
    std::size_t n_days = 0;
    double total_fuel_l = 0.0;
    double excess_fuel_l = 0.0;
    double baseline_fuel_l = 0.0;
    double excess_pct = 0.0;
};

// Litres attributable to driving behaviour over every selected FAR row:
// sum over rows and DrivingBehaviour features of max(delta, 0) * trip_kms / 100.
// Rows per vehicle_group, optionally per route, and one fleet row last.
std::vector<ManagerRow> fleet_manager_view(const FuelModel& model, const Far& far, const std::vector<bool>& include,
                                           const ReferenceTable& refs, const FeatureRegistry& registry,
                                           bool by_route = false);

std::string recommendations_to_text(std::span<const RecommendationRow> rows, std::string_view header_line);
std::string group_recommendations_to_text(std::span<const GroupRecommendation> rows, std::string_view header_line);
std::vector<GroupRecommendation> group_recommendations_from_text(const std::vector<std::string>& lines);
std::string summary_to_text(const SummaryResult& s, std::string_view header_line);
std::string manager_view_to_text(std::span<const ManagerRow> rows, std::string_view header_line);

}  // namespace fuelrec
