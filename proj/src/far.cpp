#include "fuelrec/far.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

namespace fuelrec {

std::string_view to_string(Label l) noexcept {
    switch (l) {
        case Label::inlier: return "inlier";
        case Label::outlier_high: return "outlier_high";
        case Label::outlier_low: return "outlier_low";
        case Label::removed_data_quality: return "removed_data_quality";
    }
    return "inlier";
}

Label parse_label(std::string_view s) {
    for (auto l : {Label::inlier, Label::outlier_high, Label::outlier_low, Label::removed_data_quality})
        if (to_string(l) == s) return l;
    throw DataError("unknown label '" + std::string(s) + "'");
}

std::optional<std::size_t> Far::column(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < features.size(); ++i)
        if (features[i] == name) return i;
    return std::nullopt;
}

std::size_t Far::require_column(std::string_view name) const {
    if (auto c = column(name)) return *c;
    throw DataError("FAR has no column '" + std::string(name) + "'");
}

std::string key_text(const GroupRouteKey& key) {
    return key.first + "/" + std::string(to_string(key.second));
}

namespace {

template <class Map, class Key>
std::optional<double> lookup2(const Map& m, const Key& key, const std::string& feature) {
    const auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    const auto jt = it->second.find(feature);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

}  // namespace

std::optional<double> GroupMedians::group_value(const std::string& group, const std::string& feature) const {
    return lookup2(by_group, group, feature);
}

std::optional<double> GroupMedians::group_route_value(const GroupRouteKey& key, const std::string& feature) const {
    return lookup2(by_group_route, key, feature);
}

std::optional<double> GroupMedians::global_value(const std::string& feature) const {
    const auto it = global.find(feature);
    if (it == global.end()) return std::nullopt;
    return it->second;
}

std::vector<bool> chronological_split(const Far& far, double train_fraction) {
    std::map<std::string, std::vector<std::string>> dates;
    for (const auto& r : far.rows) dates[r.vehicle_id].push_back(r.date_tx);
    std::map<std::string, std::string> first_test_date;
    for (auto& [vehicle, ds] : dates) {
        std::sort(ds.begin(), ds.end());
        ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
        const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(ds.size()) - 1e-9));
        if (n_train < ds.size()) first_test_date[vehicle] = ds[n_train];
    }
    std::vector<bool> train(far.rows.size(), true);
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        const auto it = first_test_date.find(far.rows[i].vehicle_id);
        if (it != first_test_date.end() && far.rows[i].date_tx >= it->second) train[i] = false;
    }
    return train;
}

std::vector<bool> random_split(const Far& far, double train_fraction, std::uint64_t seed) {
    std::vector<bool> train(far.rows.size());
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        const auto& r = far.rows[i];
        train[i] = unit_hash(seed, fnv1a64(r.vehicle_id + "|" + r.date_tx)) < train_fraction;
    }
    return train;
}

std::string far_to_text(const Far& far, std::span<const Label> labels, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_id,date_tx,vehicle_group,route_type,fuel_consumption";
    for (const auto& f : far.features) out << ',' << f;
    if (!labels.empty()) out << ",label";
    out << '\n';
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        const auto& r = far.rows[i];
        out << r.vehicle_id << ',' << r.date_tx << ',' << r.vehicle_group << ',' << to_string(r.route_type) << ','
            << format_double(r.fuel_consumption);
        for (double v : r.values) out << ',' << format_double(v);
        if (!labels.empty()) out << ',' << to_string(labels[i]);
        out << '\n';
    }
    return out.str();
}

std::string far_mask_to_text(const Far& far, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_id,date_tx";
    for (const auto& f : far.features) out << ',' << f;
    out << '\n';
    for (const auto& r : far.rows) {
        out << r.vehicle_id << ',' << r.date_tx;
        for (std::size_t j = 0; j < far.features.size(); ++j) out << ',' << (r.imputed.empty() ? 0 : int(r.imputed[j]));
        out << '\n';
    }
    return out.str();
}

LabeledFar far_from_text(const std::vector<std::string>& lines, const std::vector<std::string>* mask_lines) {
    if (lines.empty()) throw DataError("FAR file is empty (no header)");
    const auto header = split(lines[0]);
    static const std::vector<std::string> fixed = {"vehicle_id", "date_tx", "vehicle_group", "route_type",
                                                   "fuel_consumption"};
    if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
        throw DataError("FAR header must start with vehicle_id,date_tx,vehicle_group,route_type,fuel_consumption");
    const bool has_label = header.back() == "label";
    LabeledFar out;
    const std::size_t n_feat = header.size() - fixed.size() - (has_label ? 1 : 0);
    out.far.features.assign(header.begin() + 5, header.begin() + 5 + static_cast<std::ptrdiff_t>(n_feat));
    const auto trip_col = out.far.column("trip_kms");
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto cols = split(lines[li]);
        if (cols.size() != header.size())
            throw DataError("FAR line " + std::to_string(li + 1) + " has " + std::to_string(cols.size()) +
                            " fields, expected " + std::to_string(header.size()));
        FarRow r;
        r.vehicle_id = cols[0];
        r.date_tx = cols[1];
        r.vehicle_group = cols[2];
        r.route_type = parse_route_type(cols[3]);
        r.fuel_consumption = cols[4].empty() ? kMissing : parse_double(cols[4]);
        r.values.resize(n_feat);
        for (std::size_t j = 0; j < n_feat; ++j) r.values[j] = cols[5 + j].empty() ? kMissing : parse_double(cols[5 + j]);
        r.imputed.assign(n_feat, 0);
        if (trip_col) r.trip_kms = r.values[*trip_col];
        out.far.rows.push_back(std::move(r));
        if (has_label) out.labels.push_back(parse_label(cols.back()));
    }
    if (mask_lines && !mask_lines->empty()) {
        const auto mh = split((*mask_lines)[0]);
        if (mh.size() != n_feat + 2) throw DataError("mask header does not match FAR features");
        if (mask_lines->size() - 1 != out.far.rows.size()) throw DataError("mask row count does not match FAR");
        for (std::size_t li = 1; li < mask_lines->size(); ++li) {
            const auto cols = split((*mask_lines)[li]);
            auto& r = out.far.rows[li - 1];
            if (cols.size() != n_feat + 2 || cols[0] != r.vehicle_id || cols[1] != r.date_tx)
                throw DataError("mask line " + std::to_string(li + 1) + " does not match FAR row");
            for (std::size_t j = 0; j < n_feat; ++j) r.imputed[j] = cols[2 + j] == "1" ? 1 : 0;
        }
    }
    return out;
}

LabeledFar read_far(const std::string& path, const std::optional<std::string>& mask_path) {
    const auto lines = read_data_lines(path);
    if (mask_path && std::filesystem::exists(*mask_path)) {
        const auto mask = read_data_lines(*mask_path);
        return far_from_text(lines, &mask);
    }
    return far_from_text(lines);
}

std::string medians_to_text(const GroupMedians& m, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "# scope=" << (m.inliers_only ? "inliers_only" : "all") << " provenance=" << m.provenance << '\n';
    out << "vehicle_group,route_type,feature,median\n";
    for (const auto& [feature, v] : m.global) out << "*,*," << feature << ',' << format_double(v) << '\n';
    for (const auto& [group, fm] : m.by_group)
        for (const auto& [feature, v] : fm) out << group << ",*," << feature << ',' << format_double(v) << '\n';
    for (const auto& [key, fm] : m.by_group_route)
        for (const auto& [feature, v] : fm)
            out << key.first << ',' << to_string(key.second) << ',' << feature << ',' << format_double(v) << '\n';
    return out.str();
}

GroupMedians medians_from_text(const std::vector<std::string>& lines) {
    GroupMedians m;
    if (lines.empty() || lines[0] != "vehicle_group,route_type,feature,median")
        throw DataError("medians file must have header vehicle_group,route_type,feature,median");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split(lines[i]);
        if (c.size() != 4) throw DataError("malformed medians line " + std::to_string(i + 1));
        const double v = parse_double(c[3]);
        if (c[0] == "*")
            m.global[c[2]] = v;
        else if (c[1] == "*")
            m.by_group[c[0]][c[2]] = v;
        else
            m.by_group_route[{c[0], parse_route_type(c[1])}][c[2]] = v;
    }
    return m;
}

}  // namespace fuelrec
