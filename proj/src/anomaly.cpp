#include "fuelrec/anomaly.hpp"

#include <algorithm>
#include <sstream>

namespace fuelrec {

BoxplotLimits boxplot_limits(std::span<const double> values) {
    if (values.empty()) throw DataError("box-plot limits of an empty collection");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    BoxplotLimits b;
    b.q1 = quantile_sorted(s, 0.25);
    b.q3 = quantile_sorted(s, 0.75);
    b.iqr = b.q3 - b.q1;
    b.lim_sup = b.q3 + 1.5 * b.iqr;
    b.lim_inf = b.q1 - 1.5 * b.iqr;
    return b;
}

const KeyLimits* AnomalyLimitTable::find(const GroupRouteKey& key) const {
    const auto it = keys.find(key);
    return it == keys.end() ? nullptr : &it->second;
}

std::string AnomalyLimitTable::to_text(std::string_view header_line) const {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_group,route_type,q1,q3,lim_inf,lim_sup,n_points,insufficient\n";
    for (const auto& [key, k] : keys)
        out << key.first << ',' << to_string(key.second) << ',' << format_double(k.limits.q1) << ','
            << format_double(k.limits.q3) << ',' << format_double(k.limits.lim_inf) << ','
            << format_double(k.limits.lim_sup) << ',' << k.n_points << ',' << (k.insufficient ? "true" : "false")
            << '\n';
    return out.str();
}

AnomalyLimitTable AnomalyLimitTable::from_text(const std::vector<std::string>& lines) {
    if (lines.empty() || lines[0].rfind("vehicle_group,route_type,q1,q3,lim_inf,lim_sup,n_points", 0) != 0)
        throw DataError("limit table header must start with vehicle_group,route_type,q1,q3,lim_inf,lim_sup,n_points");
    AnomalyLimitTable t;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split(lines[i]);
        if (c.size() < 7) throw DataError("malformed limit table line " + std::to_string(i + 1));
        KeyLimits k;
        k.limits.q1 = parse_double(c[2]);
        k.limits.q3 = parse_double(c[3]);
        k.limits.iqr = k.limits.q3 - k.limits.q1;
        k.limits.lim_inf = parse_double(c[4]);
        k.limits.lim_sup = parse_double(c[5]);
        k.n_points = static_cast<std::size_t>(parse_double(c[6]));
        k.insufficient = c.size() > 7 && c[7] == "true";
        t.keys[{c[0], parse_route_type(c[1])}] = k;
    }
    return t;
}

DetectResult detect_anomalies(const Far& far, const DetectConfig& cfg) {
    DetectResult out;
    out.labeled.far = far;
    out.labeled.labels.assign(far.rows.size(), Label::inlier);
    auto& labels = out.labeled.labels;

    std::map<GroupRouteKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < far.rows.size(); ++i)
        groups[{far.rows[i].vehicle_group, far.rows[i].route_type}].push_back(i);

    std::vector<double> values;
    for (const auto& [key, idx] : groups) {
        KeyLimits kl;
        if (idx.size() < cfg.min_points_per_key) {
            values.clear();
            for (auto i : idx) values.push_back(far.rows[i].fuel_consumption);
            kl.limits = boxplot_limits(values);
            kl.n_points = idx.size();
            kl.insufficient = true;
            out.limits.keys[key] = kl;
            continue;
        }
        values.clear();
        for (auto i : idx) values.push_back(far.rows[i].fuel_consumption);
        const auto first = boxplot_limits(values);
        std::vector<std::size_t> survivors;
        for (auto i : idx) {
            const double y = far.rows[i].fuel_consumption;
            if (y > first.lim_sup || y < first.lim_inf)
                labels[i] = Label::removed_data_quality;
            else
                survivors.push_back(i);
        }
        values.clear();
        for (auto i : survivors) values.push_back(far.rows[i].fuel_consumption);
        kl.limits = boxplot_limits(values);  // survivors are never empty: the median lies within the fences
        kl.n_points = survivors.size();
        for (auto i : survivors) {
            const double y = far.rows[i].fuel_consumption;
            if (y > kl.limits.lim_sup)
                labels[i] = Label::outlier_high;
            else if (y < kl.limits.lim_inf)
                labels[i] = Label::outlier_low;
        }
        out.limits.keys[key] = kl;
    }
    return out;
}

}  // namespace fuelrec
