#include "fuelrec/explain.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace fuelrec {

std::string_view to_string(RuleId r) noexcept {
    switch (r) {
        case RuleId::BR1: return "BR1";
        case RuleId::BR2: return "BR2";
        case RuleId::BR3: return "BR3";
        case RuleId::BR4: return "BR4";
        case RuleId::BR5: return "BR5";
        case RuleId::MONO: return "MONO";
    }
    return "MONO";
}

std::vector<std::pair<std::size_t, std::size_t>> vehicle_date_ranges(std::span<const ExplanationRow> rows) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i + 1;
        while (j < rows.size() && rows[j].vehicle_id == rows[i].vehicle_id && rows[j].date_tx == rows[i].date_tx &&
               rows[j].route_type == rows[i].route_type)
            ++j;
        out.emplace_back(i, j);
        i = j;
    }
    return out;
}

std::vector<ExplanationRow> explain_rows(const FuelModel& model, const Far& far, std::span<const std::size_t> rows) {
    const RowEncoder enc(far, model.feature_order());
    std::vector<ExplanationRow> out;
    out.reserve(rows.size() * model.feature_order().size());
    for (auto i : rows) {
        const auto& r = far.rows[i];
        const auto x = enc.encode(r);
        const auto sub = model.subgroup_of(r);
        const double b0 = model.intercept(sub);
        const auto contrib = model.contributions(sub, x);
        double y_pred = b0;
        for (const auto& c : contrib) y_pred += c.relevance;
        for (const auto& c : contrib)
            out.push_back({r.vehicle_id, r.date_tx, r.vehicle_group, r.route_type, c.feature, c.value, c.relevance,
                           y_pred, r.fuel_consumption, b0});
    }
    return out;
}

std::vector<ExplanationRow> raw_explanations(const FuelModel& model, const LabeledFar& lfar,
                                             const std::vector<bool>& include) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < lfar.far.rows.size(); ++i) {
        if (!include.empty() && !include[i]) continue;
        if (lfar.labels[i] == Label::outlier_high) rows.push_back(i);
    }
    return explain_rows(model, lfar.far, rows);
}

namespace {

std::optional<double> inlier_median(const GroupMedians& m, const ExplanationRow& r, const std::string& feature) {
    if (auto v = m.group_route_value({r.vehicle_group, r.route_type}, feature)) return v;
    return m.global_value(feature);
}

bool is_categorical(const std::string& feature, const FeatureRegistry& registry) {
    if (is_one_hot(feature)) return true;
    const auto* s = registry.find(feature);
    return s && (s->group == FeatureGroup::Categorical || s->group == FeatureGroup::Index);
}

}  // namespace

RuleResult apply_business_rules(std::span<const ExplanationRow> raw, const GroupMedians& inlier_medians,
                                const FeatureRegistry& registry, const RuleOptions& opts) {
    RuleResult out;
    const std::string fuel(GroupMedians::kFuel);
    std::vector<ExplanationRow> vd;
    for (const auto& [begin, end] : vehicle_date_ranges(raw)) {
        const auto& head = raw[begin];
        vd.clear();
        auto drop = [&](const ExplanationRow& r, RuleId rule, std::string reason) {
            out.trace.push_back({r.vehicle_id, r.date_tx, r.feature, rule, std::move(reason)});
        };

        for (std::size_t i = begin; i < end; ++i) {
            if (opts.br1 && is_categorical(raw[i].feature, registry))
                drop(raw[i], RuleId::BR1, "categorical feature");
            else
                vd.push_back(raw[i]);
        }

        if (opts.br3) {
            const auto med = inlier_median(inlier_medians, head, fuel);
            if (med && head.y_real <= *med) {
                out.trace.push_back({head.vehicle_id, head.date_tx, "*", RuleId::BR3,
                                     "fuel " + format_double(head.y_real) + " <= inlier median " + format_double(*med)});
                continue;
            }
        }

        if (opts.br4) {
            std::vector<ExplanationRow> kept;
            for (auto& r : vd) {
                const auto* spec = registry.find(r.feature);
                const Direction dir = spec ? spec->direction : Direction::None;
                const auto med = dir == Direction::None ? std::nullopt : inlier_median(inlier_medians, r, r.feature);
                if (med && dir == Direction::Positive && !(r.feature_value > *med))
                    drop(r, RuleId::BR4, "value not above inlier median " + format_double(*med));
                else if (med && dir == Direction::Negative && !(r.feature_value < *med))
                    drop(r, RuleId::BR4, "value not below inlier median " + format_double(*med));
                else
                    kept.push_back(std::move(r));
            }
            vd = std::move(kept);
        }

        if (opts.br2) {
            std::vector<ExplanationRow> kept;
            for (auto& r : vd) {
                if (r.relevance / r.y_real < opts.min_relative_impact)
                    drop(r, RuleId::BR2, "relative impact below " + format_double(opts.min_relative_impact));
                else
                    kept.push_back(std::move(r));
            }
            vd = std::move(kept);
        }

        if (opts.br5 && !vd.empty()) {
            const double cap = opts.max_total_share * head.y_real;
            double total = 0.0;
            for (const auto& r : vd)
                if (r.relevance > 0.0) total += r.relevance;
            if (total > cap) {
                std::vector<std::size_t> order(vd.size());
                for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
                std::stable_sort(order.begin(), order.end(),
                                 [&](auto a, auto b) { return vd[a].relevance < vd[b].relevance; });
                std::vector<bool> dropped(vd.size(), false);
                for (auto k : order) {
                    if (total <= cap) break;
                    if (vd[k].relevance > 0.0) total -= vd[k].relevance;
                    dropped[k] = true;
                    drop(vd[k], RuleId::BR5, "total relevance above cap " + format_double(cap));
                }
                std::vector<ExplanationRow> kept;
                for (std::size_t k = 0; k < vd.size(); ++k)
                    if (!dropped[k]) kept.push_back(std::move(vd[k]));
                vd = std::move(kept);
            }
        }
        for (auto& r : vd) out.rows.push_back(std::move(r));
    }
    return out;
}

std::vector<ValueRelevance> monotone_pairs(std::vector<ValueRelevance> pairs, bool decreasing) {
    if (decreasing)
        for (auto& p : pairs) p.second = -p.second;
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    // Each pass compares every pair with its predecessor in the current list and
    // drops all negative steps at once.
    std::vector<ValueRelevance> next;
    while (pairs.size() > 1) {
        next.clear();
        next.push_back(pairs.front());
        for (std::size_t i = 1; i < pairs.size(); ++i)
            if (pairs[i].second - pairs[i - 1].second >= 0.0) next.push_back(pairs[i]);
        if (next.size() == pairs.size()) break;
        pairs.swap(next);
    }
    if (decreasing)
        for (auto& p : pairs) p.second = -p.second;
    return pairs;
}

MonotoneFilterResult filter_monotonic(std::span<const ExplanationRow> explanations, const FeatureRegistry& registry,
                                      MonotoneFilterMode mode) {
    MonotoneFilterResult out;
    using Key = std::pair<std::string, std::string>;
    std::map<Key, std::vector<ValueRelevance>> groups;
    auto key_of = [](const ExplanationRow& r) {
        return Key{r.feature, key_text({r.vehicle_group, r.route_type})};
    };
    for (const auto& r : explanations) {
        if (is_one_hot(r.feature)) continue;
        groups[key_of(r)].emplace_back(r.feature_value, r.relevance);
    }
    std::map<Key, std::set<ValueRelevance>> retained;
    for (auto& [key, pairs] : groups) {
        bool decreasing = false;
        if (mode == MonotoneFilterMode::by_direction) {
            const auto* spec = registry.find(key.first);
            decreasing = spec && spec->direction == Direction::Negative;
        }
        std::set<ValueRelevance> distinct(pairs.begin(), pairs.end());
        const auto kept = monotone_pairs(std::move(pairs), decreasing);
        out.stats[key] = {distinct.size(), kept.size()};
        retained[key] = std::set<ValueRelevance>(kept.begin(), kept.end());
    }
    for (const auto& r : explanations) {
        if (is_one_hot(r.feature)) {
            out.rows.push_back(r);
            continue;
        }
        const auto& keep = retained[key_of(r)];
        if (keep.count({r.feature_value, r.relevance}))
            out.rows.push_back(r);
        else
            out.trace.push_back({r.vehicle_id, r.date_tx, r.feature, RuleId::MONO, "non-monotone value-relevance pair"});
    }
    return out;
}

std::string explanations_to_text(std::span<const ExplanationRow> rows, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_id,date_tx,vehicle_group,route_type,feature,feature_value,relevance,y_pred,y_real,intercept\n";
    for (const auto& r : rows)
        out << r.vehicle_id << ',' << r.date_tx << ',' << r.vehicle_group << ',' << to_string(r.route_type) << ','
            << r.feature << ',' << format_double(r.feature_value) << ',' << format_double(r.relevance) << ','
            << format_double(r.y_pred) << ',' << format_double(r.y_real) << ',' << format_double(r.intercept) << '\n';
    return out.str();
}

std::vector<ExplanationRow> explanations_from_text(const std::vector<std::string>& lines) {
    if (lines.empty() || lines[0].rfind("vehicle_id,date_tx,vehicle_group,route_type,feature,feature_value,relevance", 0) != 0)
        throw DataError("explanations header mismatch");
    std::vector<ExplanationRow> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split(lines[i]);
        if (c.size() != 10) throw DataError("malformed explanation line " + std::to_string(i + 1));
        out.push_back({c[0], c[1], c[2], parse_route_type(c[3]), c[4], parse_double(c[5]), parse_double(c[6]),
                       parse_double(c[7]), parse_double(c[8]), parse_double(c[9])});
    }
    return out;
}

std::string trace_to_text(std::span<const RuleTraceEntry> trace, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_id,date_tx,feature,rule,reason\n";
    for (const auto& t : trace)
        out << t.vehicle_id << ',' << t.date_tx << ',' << t.feature << ',' << to_string(t.rule) << ',' << t.reason
            << '\n';
    return out.str();
}

}  // namespace fuelrec
