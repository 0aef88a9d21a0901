#include "fuelrec/telemetry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

namespace fuelrec {

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

std::string format_date(std::chrono::sys_days d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

}  // namespace

std::optional<std::string> utc_date_of(std::string_view ts) {
    ts = trim(ts);
    if (ts.size() < 10) return std::nullopt;
    int y = 0, mo = 0, d = 0;
    if (ts[4] != '-' || ts[7] != '-' || !parse_int(ts.substr(0, 4), y) || !parse_int(ts.substr(5, 2), mo) ||
        !parse_int(ts.substr(8, 2), d))
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) return std::nullopt;
    long seconds = 0;  // seconds since local midnight
    long offset = 0;   // local minus UTC, seconds
    std::string_view rest = ts.substr(10);
    if (!rest.empty()) {
        if (rest[0] != ' ' && rest[0] != 'T') return std::nullopt;
        rest.remove_prefix(1);
        int hh = 0, mm = 0, ss = 0;
        if (rest.size() < 8 || rest[2] != ':' || rest[5] != ':' || !parse_int(rest.substr(0, 2), hh) ||
            !parse_int(rest.substr(3, 2), mm) || !parse_int(rest.substr(6, 2), ss) || hh > 23 || mm > 59 || ss > 60)
            return std::nullopt;
        seconds = hh * 3600L + mm * 60L + ss;
        rest.remove_prefix(8);
        if (!rest.empty() && rest[0] == '.') {
            rest.remove_prefix(1);
            while (!rest.empty() && rest[0] >= '0' && rest[0] <= '9') rest.remove_prefix(1);
        }
        if (!rest.empty()) {
            if (rest == "Z") {
                offset = 0;
            } else if ((rest[0] == '+' || rest[0] == '-') && rest.size() == 6 && rest[3] == ':') {
                int oh = 0, om = 0;
                if (!parse_int(rest.substr(1, 2), oh) || !parse_int(rest.substr(4, 2), om)) return std::nullopt;
                offset = (oh * 3600L + om * 60L) * (rest[0] == '-' ? -1 : 1);
            } else {
                return std::nullopt;
            }
        }
    }
    const long utc = seconds - offset;
    const long day_shift = utc < 0 ? -1 : (utc >= 86400 ? 1 : 0);
    return format_date(std::chrono::sys_days{ymd} + std::chrono::days{day_shift});
}

RawParseResult parse_raw(std::istream& in) {
    RawParseResult out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto cols = split(t);
        if (!header) {
            if (cols.size() != 4 || cols[0] != "time_tx" || cols[1] != "vehicle_id" || cols[2] != "variable_id" ||
                cols[3] != "variable_value")
                throw DataError("raw telemetry header must be time_tx,vehicle_id,variable_id,variable_value");
            header = true;
            continue;
        }
        if (cols.size() != 4) {
            ++out.malformed;
            continue;
        }
        const auto date = utc_date_of(cols[0]);
        if (!date || trim(cols[1]).empty() || trim(cols[2]).empty()) {
            ++out.malformed;
            continue;
        }
        RawTelemetryRecord r;
        r.time_tx = std::string(trim(cols[0]));
        r.date_utc = *date;
        r.vehicle_id = std::string(trim(cols[1]));
        r.variable_id = std::string(trim(cols[2]));
        r.value_text = std::string(trim(cols[3]));
        double v = 0.0;
        if (try_parse_double(r.value_text, v) && std::isfinite(v)) r.value = v;
        out.records.push_back(std::move(r));
    }
    if (!header) throw DataError("raw telemetry stream has no header");
    return out;
}

RawParseResult parse_raw_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open raw telemetry '" + path + "'");
    return parse_raw(in);
}

AggregationRules AggregationRules::defaults(const FeatureRegistry& registry) {
    AggregationRules r;
    for (const auto& name : registry.explainable_numeric()) {
        Aggregation agg = Aggregation::sum;
        if (name.rfind("mean_", 0) == 0 || name == "height" || name == "per_time_city") agg = Aggregation::mean;
        if (name == "total_odometer") agg = Aggregation::max;
        r.set(name, {name, agg});
    }
    r.set("TripFuel", {std::string(kTripFuel), Aggregation::sum});
    r.set(std::string(kTripFuel), {std::string(kTripFuel), Aggregation::sum});
    r.set("TripKms", {"trip_kms", Aggregation::sum});
    r.set("Odometer", {"total_odometer", Aggregation::max});
    r.set("CityDuration", {std::string(kCityDuration), Aggregation::sum});
    r.set(std::string(kCityDuration), {std::string(kCityDuration), Aggregation::sum});
    r.set("DrivingDuration", {std::string(kDrivingDuration), Aggregation::sum});
    r.set(std::string(kDrivingDuration), {std::string(kDrivingDuration), Aggregation::sum});
    r.set("VIN", {std::string(kVin), Aggregation::text});
    r.set(std::string(kVin), {std::string(kVin), Aggregation::text});
    return r;
}

const AggregationRules::Rule* AggregationRules::find(const std::string& variable_id) const {
    const auto it = rules_.find(variable_id);
    return it == rules_.end() ? nullptr : &it->second;
}

DailyAggregate aggregate_daily(std::span<const RawTelemetryRecord> records, const AggregationRules& rules) {
    struct Item {
        const RawTelemetryRecord* rec;
        const AggregationRules::Rule* rule;
    };
    DailyAggregate out;
    std::vector<Item> items;
    items.reserve(records.size());
    for (const auto& r : records) {
        const auto* rule = rules.find(r.variable_id);
        if (!rule) {
            ++out.ignored_by_variable[r.variable_id];
            continue;
        }
        if (rule->agg != Aggregation::text && !r.value) {
            ++out.ignored_by_variable[r.variable_id];
            continue;
        }
        items.push_back({&r, rule});
    }
    // Canonical order: key, target, then value. Makes sums bit-identical under shuffles.
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        const double va = a.rec->value.value_or(0.0), vb = b.rec->value.value_or(0.0);
        return std::tie(a.rec->vehicle_id, a.rec->date_utc, a.rule->target, va, a.rec->value_text) <
               std::tie(b.rec->vehicle_id, b.rec->date_utc, b.rule->target, vb, b.rec->value_text);
    });

    std::size_t i = 0;
    while (i < items.size()) {
        DraftRow row;
        row.vehicle_id = items[i].rec->vehicle_id;
        row.date_tx = items[i].rec->date_utc;
        while (i < items.size() && items[i].rec->vehicle_id == row.vehicle_id && items[i].rec->date_utc == row.date_tx) {
            const auto& target = items[i].rule->target;
            const Aggregation agg = items[i].rule->agg;
            double acc = 0.0;
            std::size_t n = 0;
            std::string text;
            for (; i < items.size() && items[i].rec->vehicle_id == row.vehicle_id &&
                   items[i].rec->date_utc == row.date_tx && items[i].rule->target == target;
                 ++i) {
                const auto& rec = *items[i].rec;
                switch (agg) {
                    case Aggregation::sum:
                    case Aggregation::mean: acc += *rec.value; break;
                    case Aggregation::max: acc = n == 0 ? *rec.value : std::max(acc, *rec.value); break;
                    case Aggregation::text:
                        if (text.empty()) text = rec.value_text;  // smallest in canonical order
                        break;
                }
                ++n;
            }
            if (agg == Aggregation::text) {
                if (target == AggregationRules::kVin) row.vin = text;
                continue;
            }
            if (agg == Aggregation::mean) acc /= static_cast<double>(n);
            row.values[target] = acc;
        }
        const auto fuel = row.values.find(std::string(AggregationRules::kTripFuel));
        const auto kms = row.values.find("trip_kms");
        if (fuel != row.values.end() && kms != row.values.end())
            if (auto fc = compute_fuel(fuel->second, kms->second)) row.fuel_consumption = *fc;
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::optional<double> compute_fuel(double trip_fuel_used, double trip_kms) {
    if (!(trip_kms > 0.0) || !std::isfinite(trip_fuel_used)) return std::nullopt;
    return trip_fuel_used / trip_kms * 100.0;
}

RouteType assign_route_type(double per_time_city, double trip_kms, const RouteThresholds& th) {
    if (per_time_city <= th.low_th_time && trip_kms >= th.th_kms) return RouteType::hwy;
    if (per_time_city >= th.high_th_time && trip_kms <= th.th_kms) return RouteType::city;
    return RouteType::combined;
}

VinTable::VinTable(std::vector<std::pair<std::string, std::string>> prefixes) : prefixes_(std::move(prefixes)) {
    std::stable_sort(prefixes_.begin(), prefixes_.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

VinTable VinTable::parse(const std::vector<std::string>& lines) {
    std::vector<std::pair<std::string, std::string>> p;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto c = split(lines[i]);
        if (i == 0) {
            if (c.size() != 2 || c[0] != "prefix" || c[1] != "vehicle_group")
                throw ConfigError("VIN table header must be prefix,vehicle_group");
            continue;
        }
        if (c.size() != 2 || trim(c[0]).empty()) throw ConfigError("malformed VIN table line " + std::to_string(i + 1));
        p.emplace_back(std::string(trim(c[0])), std::string(trim(c[1])));
    }
    return VinTable(std::move(p));
}

VinTable VinTable::load(const std::optional<std::string>& path) {
    if (!path || path->empty()) return VinTable{};
    return parse(read_data_lines(*path));
}

std::string VinTable::decode(std::string_view vin) const {
    for (const auto& [prefix, group] : prefixes_)
        if (vin.substr(0, prefix.size()) == prefix) return group;
    return "unknown_" + std::string(vin.substr(0, 3));
}

Far build_far(const DailyAggregate& daily, const FeatureRegistry& registry, const VinTable& vins,
              const RouteThresholds& th) {
    Far far;
    far.features = registry.explainable_numeric();
    const auto city_col = far.column("per_time_city");

    // One group per vehicle: decoded from the lexicographically smallest VIN seen.
    std::map<std::string, std::string> vin_of;
    for (const auto& d : daily.rows)
        if (!d.vin.empty()) {
            auto& v = vin_of[d.vehicle_id];
            if (v.empty() || d.vin < v) v = d.vin;
        }

    for (const auto& d : daily.rows) {
        FarRow r;
        r.vehicle_id = d.vehicle_id;
        r.date_tx = d.date_tx;
        const auto vit = vin_of.find(d.vehicle_id);
        r.vehicle_group = vit != vin_of.end() ? vins.decode(vit->second) : "unknown";
        r.fuel_consumption = d.fuel_consumption;
        r.values.assign(far.features.size(), kMissing);
        r.imputed.assign(far.features.size(), 0);
        for (std::size_t j = 0; j < far.features.size(); ++j) {
            const auto it = d.values.find(far.features[j]);
            if (it != d.values.end()) r.values[j] = it->second;
        }
        const auto city = d.values.find(std::string(AggregationRules::kCityDuration));
        const auto driving = d.values.find(std::string(AggregationRules::kDrivingDuration));
        if (city_col && city != d.values.end() && driving != d.values.end() && driving->second > 0.0)
            r.values[*city_col] = std::clamp(city->second / driving->second, 0.0, 1.0);
        const auto kms = d.values.find("trip_kms");
        r.trip_kms = kms != d.values.end() ? kms->second : kMissing;
        const double ptc = city_col ? r.values[*city_col] : kMissing;
        r.route_type = (is_missing(ptc) || is_missing(r.trip_kms)) ? RouteType::combined
                                                                   : assign_route_type(ptc, r.trip_kms, th);
        far.rows.push_back(std::move(r));
    }
    return far;
}

std::string CleaningReport::to_text() const {
    std::ostringstream out;
    out << "input_rows," << input_rows << '\n';
    out << "dropped_null_target," << dropped_null_target << '\n';
    out << "dropped_short_trip," << dropped_short_trip << '\n';
    for (const auto& f : absent_features) out << "absent_feature," << f << '\n';
    for (const auto& f : zero_variance_features) out << "zero_variance_feature," << f << '\n';
    for (const auto& c : correlated)
        out << "correlated_pair," << c.kept << ',' << c.dropped << ',' << format_double(c.correlation) << '\n';
    return out.str();
}

CleanResult clean_far(const Far& far, double min_day_km, double corr_threshold) {
    CleanResult out;
    auto& rep = out.report;
    rep.input_rows = far.rows.size();
    std::vector<const FarRow*> kept;
    for (const auto& r : far.rows) {
        if (is_missing(r.fuel_consumption) || !(r.fuel_consumption > 0.0)) {
            ++rep.dropped_null_target;
            continue;
        }
        if (is_missing(r.trip_kms) || r.trip_kms <= min_day_km) {
            ++rep.dropped_short_trip;
            continue;
        }
        kept.push_back(&r);
    }
    if (kept.empty())
        throw DataError("no rows left after cleaning: " + std::to_string(rep.input_rows) + " in, " +
                        std::to_string(rep.dropped_null_target) + " null target, " +
                        std::to_string(rep.dropped_short_trip) + " short trips");

    const std::size_t nf = far.features.size();
    std::vector<std::vector<double>> cols(nf);
    for (std::size_t j = 0; j < nf; ++j)
        for (const auto* r : kept) cols[j].push_back(r->values[j]);

    std::vector<bool> keep(nf, true);
    for (std::size_t j = 0; j < nf; ++j) {
        std::vector<double> present;
        for (double v : cols[j])
            if (!is_missing(v)) present.push_back(v);
        if (far.features[j] == "trip_kms") continue;
        if (present.empty()) {
            keep[j] = false;
            rep.absent_features.push_back(far.features[j]);
        } else if (std::all_of(present.begin(), present.end(), [&](double v) { return v == present.front(); })) {
            keep[j] = false;
            rep.zero_variance_features.push_back(far.features[j]);
        }
    }

    // Pairs in lexicographic name order; the later name of an offending pair goes.
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < nf; ++j)
        if (keep[j]) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return far.features[a] < far.features[b]; });
    std::vector<double> a, b;
    for (std::size_t x = 0; x < order.size(); ++x) {
        if (!keep[order[x]]) continue;
        for (std::size_t y = x + 1; y < order.size(); ++y) {
            if (!keep[order[y]]) continue;
            a.clear();
            b.clear();
            const auto& ca = cols[order[x]];
            const auto& cb = cols[order[y]];
            for (std::size_t i = 0; i < ca.size(); ++i)
                if (!is_missing(ca[i]) && !is_missing(cb[i])) {
                    a.push_back(ca[i]);
                    b.push_back(cb[i]);
                }
            if (a.size() < 3) continue;
            const double r = pearson(a, b);
            if (std::abs(r) >= corr_threshold) {
                // trip_kms is pinned: distance feeds route typing and litre conversion.
                if (far.features[order[y]] == "trip_kms") {
                    keep[order[x]] = false;
                    rep.correlated.push_back({far.features[order[y]], far.features[order[x]], r});
                    break;
                }
                keep[order[y]] = false;
                rep.correlated.push_back({far.features[order[x]], far.features[order[y]], r});
            }
        }
    }

    for (std::size_t j = 0; j < nf; ++j)
        if (keep[j]) out.far.features.push_back(far.features[j]);
    for (const auto* r : kept) {
        FarRow nr = *r;
        nr.values.clear();
        nr.imputed.clear();
        for (std::size_t j = 0; j < nf; ++j)
            if (keep[j]) {
                nr.values.push_back(r->values[j]);
                nr.imputed.push_back(r->imputed.empty() ? 0 : r->imputed[j]);
            }
        out.far.rows.push_back(std::move(nr));
    }
    return out;
}

GroupMedians compute_group_medians(const Far& far, MedianScope scope, MedianKeys keys, std::span<const Label> labels,
                                   const std::vector<bool>& include) {
    if (far.rows.empty()) throw DataError("cannot compute medians of an empty FAR");
    if (scope == MedianScope::inliers_only && labels.size() != far.rows.size())
        throw DataError("inlier medians need one label per FAR row");
    GroupMedians out;
    out.inliers_only = scope == MedianScope::inliers_only;

    std::map<std::string, std::map<std::string, std::vector<double>>> by_group;
    std::map<GroupRouteKey, std::map<std::string, std::vector<double>>> by_key;
    std::map<std::string, std::vector<double>> global;
    std::string first_date, last_date;
    const std::string fuel(GroupMedians::kFuel);
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        if (!include.empty() && !include[i]) continue;
        if (scope == MedianScope::inliers_only && labels[i] != Label::inlier) continue;
        const auto& r = far.rows[i];
        if (first_date.empty() || r.date_tx < first_date) first_date = r.date_tx;
        if (last_date.empty() || r.date_tx > last_date) last_date = r.date_tx;
        const GroupRouteKey key{r.vehicle_group, r.route_type};
        auto add = [&](const std::string& name, double v) {
            if (keys != MedianKeys::group_route) by_group[r.vehicle_group][name].push_back(v);
            if (keys != MedianKeys::group) by_key[key][name].push_back(v);
            global[name].push_back(v);
        };
        for (std::size_t j = 0; j < far.features.size(); ++j) {
            const bool imputed = !r.imputed.empty() && r.imputed[j];
            if (!is_missing(r.values[j]) && !imputed) add(far.features[j], r.values[j]);
        }
        if (!is_missing(r.fuel_consumption)) add(fuel, r.fuel_consumption);
    }
    for (auto& [g, fm] : by_group)
        for (auto& [f, v] : fm) out.by_group[g][f] = median(std::move(v));
    for (auto& [k, fm] : by_key)
        for (auto& [f, v] : fm) out.by_group_route[k][f] = median(std::move(v));
    for (auto& [f, v] : global) out.global[f] = median(std::move(v));
    out.provenance = first_date + ".." + last_date;
    return out;
}

Far impute_missing(const Far& far, const GroupMedians& medians, ImputeReport* report) {
    Far out = far;
    ImputeReport rep;
    for (auto& r : out.rows) {
        if (r.imputed.size() != out.features.size()) r.imputed.assign(out.features.size(), 0);
        for (std::size_t j = 0; j < out.features.size(); ++j) {
            if (!is_missing(r.values[j])) continue;
            auto v = medians.group_value(r.vehicle_group, out.features[j]);
            if (!v) {
                v = medians.global_value(out.features[j]);
                ++rep.global_fallbacks;
            }
            if (!v)
                throw DataError("no median available to impute '" + out.features[j] + "' for group '" +
                                r.vehicle_group + "'");
            r.values[j] = *v;
            r.imputed[j] = 1;
            ++rep.imputed_values;
        }
        if (const auto c = out.column("trip_kms")) r.trip_kms = r.values[*c];
    }
    if (report) *report = rep;
    return out;
}

}  // namespace fuelrec
