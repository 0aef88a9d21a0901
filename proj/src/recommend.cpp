#include "fuelrec/recommend.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace fuelrec {

namespace {

FarRow key_row(const GroupRouteKey& key) {
    FarRow r;
    r.vehicle_group = key.first;
    r.route_type = key.second;
    return r;
}

bool is_actionable(const std::string& feature, const FeatureRegistry& registry) {
    if (is_one_hot(feature)) return false;
    const auto* s = registry.find(feature);
    return s && s->actionable;
}

}  // namespace

ReferenceTable::ReferenceTable(const GroupMedians& inlier_medians, const FeatureRegistry& registry,
                               const FuelModel& model)
    : medians_(inlier_medians), registry_(registry), model_(model) {}

const ReferenceEntry& ReferenceTable::get(const GroupRouteKey& key, const std::string& feature) const {
    const auto ck = std::make_pair(key, feature);
    if (const auto it = cache_.find(ck); it != cache_.end()) return it->second;

    const std::size_t j = model_.base().feature_index(feature);
    ReferenceEntry e;
    const auto* spec = registry_.find(feature);
    if (spec && spec->zero_reference) {
        e.value = 0.0;
    } else if (const auto v = medians_.group_route_value(key, feature)) {
        e.value = *v;
    } else if (const auto g = medians_.global_value(feature)) {
        e.value = *g;
        e.global_fallback = true;
        ++fallbacks_;
    } else {
        throw DataError("no inlier median for feature '" + feature + "'");
    }
    e.relevance = model_.term(model_.subgroup_of(key_row(key)), j, e.value);
    return cache_.emplace(ck, e).first->second;
}

Recommendations get_recom(std::span<const ExplanationRow> explanations, const ReferenceTable& refs,
                          const FeatureRegistry& registry, const AnomalyLimitTable& limits) {
    Recommendations out;
    for (const auto& [begin, end] : vehicle_date_ranges(explanations)) {
        const auto& head = explanations[begin];
        const GroupRouteKey key{head.vehicle_group, head.route_type};
        const auto* lim = limits.find(key);
        if (!lim) throw DataError("no anomaly limits for key " + key_text(key));
        const double lim_sup = lim->limits.lim_sup;

        GroupRecommendation g{head.vehicle_id, head.date_tx, head.vehicle_group, head.route_type, 0,
                              head.y_pred,     head.y_real,  0.0,                0.0,             lim_sup, false};
        for (std::size_t i = begin; i < end; ++i) {
            const auto& e = explanations[i];
            if (!is_actionable(e.feature, registry)) continue;
            const auto& ref = refs.get(key, e.feature);
            RecommendationRow r;
            r.vehicle_id = e.vehicle_id;
            r.date_tx = e.date_tx;
            r.vehicle_group = e.vehicle_group;
            r.route_type = e.route_type;
            r.feature = e.feature;
            r.current_value = e.feature_value;
            r.reference_value = ref.value;
            r.relevance = e.relevance;
            r.reference_relevance = ref.relevance;
            const double y_new = e.y_pred - e.relevance + ref.relevance;
            r.delta = e.y_pred - y_new;
            r.y_pred = e.y_pred;
            r.y_real = e.y_real;
            r.y_updated = e.y_real - r.delta;
            r.lim_sup = lim_sup;
            r.becomes_inlier = r.y_updated <= lim_sup;
            if (r.delta > 0.0) g.total_delta += r.delta;
            ++g.n_features;
            out.rows.push_back(std::move(r));
        }
        g.y_updated_all = g.y_real - g.total_delta;
        g.becomes_inlier = g.y_updated_all <= lim_sup;
        out.groups.push_back(std::move(g));
    }
    return out;
}

SummaryResult get_summ_recom(std::span<const ExplanationRow> explanations, const Far& far, const ReferenceTable& refs,
                             const FeatureRegistry& registry, const AnomalyLimitTable& limits, const FuelModel& model,
                             const SummaryConfig& cfg) {
    using VehicleDate = std::pair<std::string, std::string>;
    std::map<VehicleDate, double> kms;
    for (const auto& r : far.rows) kms[{r.vehicle_id, r.date_tx}] = r.trip_kms;

    const auto individual = get_recom(explanations, refs, registry, limits);
    std::map<VehicleDate, double> decrease;
    for (const auto& g : individual.groups) decrease[{g.vehicle_id, g.date_tx}] = g.total_delta;

    using Combo = std::pair<std::string, RouteType>;
    std::map<Combo, std::vector<std::pair<std::size_t, std::size_t>>> combos;
    for (const auto& range : vehicle_date_ranges(explanations)) {
        const auto& head = explanations[range.first];
        combos[{head.vehicle_id, head.route_type}].push_back(range);
    }

    SummaryResult out;
    for (const auto& [combo, ranges] : combos) {
        if (ranges.size() < cfg.min_days_anomalies) continue;
        std::vector<std::pair<std::size_t, std::size_t>> kept;
        for (const auto& range : ranges) {
            const auto& head = explanations[range.first];
            const VehicleDate vd{head.vehicle_id, head.date_tx};
            const auto k = kms.find(vd);
            if (k == kms.end() || !(k->second > cfg.min_day_km)) continue;
            if (!(decrease[vd] >= cfg.min_dev_total_avg_fuel)) continue;
            kept.push_back(range);
        }
        if (kept.empty()) continue;

        const auto& first = explanations[kept.front().first];
        std::map<std::string, std::vector<double>> values;
        std::vector<std::string> order;
        std::vector<double> y_real, y_pred;
        std::set<std::string> dates;
        for (const auto& [b, e] : kept) {
            y_real.push_back(explanations[b].y_real);
            y_pred.push_back(explanations[b].y_pred);
            dates.insert(explanations[b].date_tx);
            for (std::size_t i = b; i < e; ++i) {
                auto& v = values[explanations[i].feature];
                if (v.empty()) order.push_back(explanations[i].feature);
                v.push_back(explanations[i].feature_value);
            }
        }
        FarRow kr;
        kr.vehicle_group = first.vehicle_group;
        kr.route_type = first.route_type;
        const auto sub = model.subgroup_of(kr);
        const std::string period = *dates.begin() + ".." + *dates.rbegin();
        const double proto_real = lower_median(y_real);
        const double proto_pred = lower_median(y_pred);
        for (const auto& f : order) {
            ExplanationRow p;
            p.vehicle_id = first.vehicle_id;
            p.date_tx = period;
            p.vehicle_group = first.vehicle_group;
            p.route_type = first.route_type;
            p.feature = f;
            p.feature_value = lower_median(values[f]);
            p.relevance = model.term(sub, model.base().feature_index(f), p.feature_value);
            p.y_pred = proto_pred;
            p.y_real = proto_real;
            p.intercept = model.intercept(sub);
            out.prototypes.push_back(std::move(p));
        }
        out.aggregates.push_back({first.vehicle_id, first.vehicle_group, first.route_type, kept.size(),
                                  *dates.begin(), *dates.rbegin(), proto_real, 0.0, proto_real, false});
    }

    out.recommendations = get_recom(out.prototypes, refs, registry, limits);
    // aggContribution: one group recommendation per prototype, in the same order.
    for (std::size_t k = 0; k < out.aggregates.size(); ++k) {
        const auto& g = out.recommendations.groups[k];
        auto& a = out.aggregates[k];
        a.total_delta = g.total_delta;
        a.y_updated_all = g.y_updated_all;
        a.becomes_inlier = g.becomes_inlier;
    }
    return out;
}

std::vector<ManagerRow> fleet_manager_view(const FuelModel& model, const Far& far, const std::vector<bool>& include,
                                           const ReferenceTable& refs, const FeatureRegistry& registry,
                                           bool by_route) {
    const RowEncoder enc(far, model.feature_order());
    std::vector<std::size_t> behaviour;
    for (std::size_t j = 0; j < model.feature_order().size(); ++j) {
        const auto& f = model.feature_order()[j];
        const auto* s = is_one_hot(f) ? nullptr : registry.find(f);
        if (s && s->group == FeatureGroup::DrivingBehaviour) behaviour.push_back(j);
    }

    std::map<std::pair<std::string, std::string>, ManagerRow> acc;
    auto add = [&](const std::string& g, const std::string& r, double total, double excess) {
        auto& m = acc[{g, r}];
        m.vehicle_group = g;
        m.route_type = r;
        ++m.n_days;
        m.total_fuel_l += total;
        m.excess_fuel_l += excess;
    };
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        if (!include.empty() && !include[i]) continue;
        const auto& row = far.rows[i];
        const auto x = enc.encode(row);
        const auto sub = model.subgroup_of(row);
        const GroupRouteKey key{row.vehicle_group, row.route_type};
        double delta = 0.0;
        for (auto j : behaviour) {
            const auto& ref = refs.get(key, model.feature_order()[j]);
            delta += std::max(model.term(sub, j, x[j]) - ref.relevance, 0.0);
        }
        const double total = row.fuel_consumption * row.trip_kms / 100.0;
        const double excess = delta * row.trip_kms / 100.0;
        add(row.vehicle_group, "*", total, excess);
        if (by_route) add(row.vehicle_group, std::string(to_string(row.route_type)), total, excess);
        add("*", "*", total, excess);
    }

    std::vector<ManagerRow> out;
    ManagerRow fleet;
    for (auto& [k, m] : acc) {
        m.baseline_fuel_l = m.total_fuel_l - m.excess_fuel_l;
        m.excess_pct = m.total_fuel_l > 0.0 ? m.excess_fuel_l / m.total_fuel_l : 0.0;
        if (k.first == "*")
            fleet = m;
        else
            out.push_back(m);
    }
    if (!acc.empty()) out.push_back(fleet);
    return out;
}

std::string recommendations_to_text(std::span<const RecommendationRow> rows, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_id,date_tx,vehicle_group,route_type,feature,current_value,reference_value,relevance,"
           "reference_relevance,delta,y_pred,y_real,y_updated,lim_sup,becomes_inlier\n";
    for (const auto& r : rows)
        out << r.vehicle_id << ',' << r.date_tx << ',' << r.vehicle_group << ',' << to_string(r.route_type) << ','
            << r.feature << ',' << format_double(r.current_value) << ',' << format_double(r.reference_value) << ','
            << format_double(r.relevance) << ',' << format_double(r.reference_relevance) << ','
            << format_double(r.delta) << ',' << format_double(r.y_pred) << ',' << format_double(r.y_real) << ','
            << format_double(r.y_updated) << ',' << format_double(r.lim_sup) << ','
            << (r.becomes_inlier ? "true" : "false") << '\n';
    return out.str();
}

std::string group_recommendations_to_text(std::span<const GroupRecommendation> rows, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_id,date_tx,vehicle_group,route_type,n_features,y_pred,y_real,total_delta,y_updated_all,lim_sup,"
           "becomes_inlier\n";
    for (const auto& g : rows)
        out << g.vehicle_id << ',' << g.date_tx << ',' << g.vehicle_group << ',' << to_string(g.route_type) << ','
            << g.n_features << ',' << format_double(g.y_pred) << ',' << format_double(g.y_real) << ','
            << format_double(g.total_delta) << ',' << format_double(g.y_updated_all) << ','
            << format_double(g.lim_sup) << ',' << (g.becomes_inlier ? "true" : "false") << '\n';
    return out.str();
}

std::vector<GroupRecommendation> group_recommendations_from_text(const std::vector<std::string>& lines) {
    if (lines.empty() || lines[0].rfind("vehicle_id,date_tx,vehicle_group,route_type,n_features", 0) != 0)
        throw DataError("group recommendation header mismatch");
    std::vector<GroupRecommendation> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split(lines[i]);
        if (c.size() != 11) throw DataError("malformed group recommendation line " + std::to_string(i + 1));
        out.push_back({c[0], c[1], c[2], parse_route_type(c[3]), std::stoul(c[4]), parse_double(c[5]),
                       parse_double(c[6]), parse_double(c[7]), parse_double(c[8]), parse_double(c[9]),
                       c[10] == "true"});
    }
    return out;
}

std::string summary_to_text(const SummaryResult& s, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "[summary]\n";
    out << "vehicle_id,vehicle_group,route_type,n_days,first_date,last_date,y_real,total_delta,y_updated_all,"
           "becomes_inlier\n";
    for (const auto& a : s.aggregates)
        out << a.vehicle_id << ',' << a.vehicle_group << ',' << to_string(a.route_type) << ',' << a.n_days << ','
            << a.first_date << ',' << a.last_date << ',' << format_double(a.y_real) << ','
            << format_double(a.total_delta) << ',' << format_double(a.y_updated_all) << ','
            << (a.becomes_inlier ? "true" : "false") << '\n';
    out << "[features]\n";
    out << recommendations_to_text(s.recommendations.rows, "");
    return out.str();
}

std::string manager_view_to_text(std::span<const ManagerRow> rows, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_group,route_type,total_fuel_L,excess_fuel_L,excess_pct,baseline_fuel_L,n_days\n";
    for (const auto& m : rows)
        out << m.vehicle_group << ',' << m.route_type << ',' << format_double(m.total_fuel_l) << ','
            << format_double(m.excess_fuel_l) << ',' << format_double(m.excess_pct) << ','
            << format_double(m.baseline_fuel_l) << ',' << m.n_days << '\n';
    return out.str();
}

}  // namespace fuelrec
