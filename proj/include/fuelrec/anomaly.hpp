#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fuelrec/far.hpp"

namespace fuelrec {

struct BoxplotLimits {
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double lim_inf = 0.0;
    double lim_sup = 0.0;
};

// Type-7 quartiles and the 1.5 IQR fences. Throws DataError on empty input.
BoxplotLimits boxplot_limits(std::span<const double> values);

struct KeyLimits {
    BoxplotLimits limits;
    std::size_t n_points = 0;
    bool insufficient = false;
};

struct AnomalyLimitTable {
    std::map<GroupRouteKey, KeyLimits> keys;

    const KeyLimits* find(const GroupRouteKey& key) const;
    std::string to_text(std::string_view header_line) const;
    static AnomalyLimitTable from_text(const std::vector<std::string>& lines);
};

struct DetectConfig {
    std::size_t min_points_per_key = 8;
};

struct DetectResult {
    LabeledFar labeled;
    AnomalyLimitTable limits;
};

// Two passes per (vehicle_group, route_type): rows strictly outside the first
// fences become removed_data_quality; fences recomputed on the survivors label
// outlier_high / outlier_low / inlier. Keys below min_points_per_key are all
// inliers and flagged insufficient. The table holds the second-pass fences.
DetectResult detect_anomalies(const Far& far, const DetectConfig& cfg = {});

}  // namespace fuelrec
