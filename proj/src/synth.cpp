#include "fuelrec/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

namespace fuelrec {

double synth_effect(const SynthFeature& f, double x) {
    switch (f.shape) {
        case SynthShape::none: return 0.0;
        case SynthShape::linear: return f.coef * (x - f.scale);
        case SynthShape::decreasing_linear: return f.coef * (f.scale - x);
        case SynthShape::saturating_decay: return f.coef * std::exp(-x / f.scale);
        case SynthShape::bump: return f.coef * (x / f.scale) * std::exp(1.0 - x / f.scale);
    }
    return 0.0;
}

SynthConfig SynthConfig::defaults() {
    SynthConfig c;
    c.groups = {
        {"compact", "VF1", 5.5, 0.0, 0.5},
        {"sedan", "WVW", 6.5, 0.5, 1.0},
        {"suv", "ZFA", 7.5, 1.0, 1.5},
        {"van", "TMB", 8.5, 1.5, 2.0},
    };
    using D = SynthDraw;
    using S = SynthShape;
    // g(x) >= 0 over every drawn range, and g(0) = 0 for zero-reference features.
    c.features = {
        {"trip_kms", D::route_distance, 0, 0, false, S::saturating_decay, 3.0, 40.0, false, 0.0, false},
        {"per_time_city", D::route_city, 0, 0, false, S::linear, 3.0, 0.0, false, 0.0, false},
        {"total_odometer", D::odometer, 0, 0, false, S::none, 0, 1, false, 0.0, false},
        {"harsh_brakes_events", D::poisson, 3.0, 0, true, S::linear, 0.12, 0.0, true, 0.0, true},
        {"jackrabbit_events", D::poisson, 2.0, 0, true, S::linear, 0.15, 0.0, true, 0.0, true},
        {"rpm_high", D::poisson, 4.0, 0, true, S::linear, 0.08, 0.0, true, 0.0, true},
        {"speed_events_over_90", D::poisson, 2.0, 0, true, S::linear, 0.1, 0.0, true, 0.0, true},
        {"duration_idle_drive", D::exponential, 0.4, 0, true, S::linear, 1.5, 0.0, true, 1.0, false},
        {"mean_forward_acc", D::uniform, 0.8, 1.6, false, S::linear, 1.5, 0.8, true, 0.0, false},
        {"duration_ecomode_on", D::uniform, 0.0, 3.0, false, S::decreasing_linear, 0.3, 3.0, true, 0.0, false},
        {"duration_air_conditioner_on", D::zero_inflated, 0.5, 5.0, false, S::linear, 0.15, 0.0, false, 0.0, false},
        {"duration_raining", D::zero_inflated, 0.6, 8.0, false, S::bump, 1.2, 2.0, false, 0.0, false},
        {"height", D::uniform, 100.0, 1500.0, false, S::decreasing_linear, 0.0008, 1500.0, false, 0.0, false},
        {"mean_exterior_temperature", D::uniform, -5.0, 35.0, false, S::decreasing_linear, 0.03, 35.0, false, 0.0,
         false},
    };
    return c;
}

namespace {

std::chrono::sys_days parse_date(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw ConfigError("synth: bad start_date '" + s + "'");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw ConfigError("synth: bad start_date '" + s + "'");
    return std::chrono::sys_days{ymd};
}

}  // namespace

void SynthConfig::validate() const {
    if (n_vehicles == 0 || n_days == 0) throw ConfigError("synth: n_vehicles and n_days must be positive");
    if (groups.empty()) throw ConfigError("synth: at least one vehicle group");
    parse_date(start_date);
    auto rate = [](const char* name, double v) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("synth: ") + name + " must lie in [0,1]");
    };
    rate("anomaly_rate", anomaly_rate);
    rate("missing_rate", missing_rate);
    rate("anomaly_prone_fraction", anomaly_prone_fraction);
    if (!(anomaly_prone_multiplier >= 1.0) || anomaly_prone_fraction * anomaly_prone_multiplier > 1.0 ||
        anomaly_rate * anomaly_prone_multiplier > 1.0)
        throw ConfigError("synth: anomaly_prone_multiplier must be >= 1 and keep every rate within [0,1]");
    rate("short_trip_rate", short_trip_rate);
    if (!(noise_fraction >= 0.0)) throw ConfigError("synth: noise_fraction must be >= 0");
    if (!(anomaly_magnitude_min > 0.0) || !(anomaly_magnitude_max >= anomaly_magnitude_min))
        throw ConfigError("synth: anomaly magnitudes must satisfy 0 < min <= max");
    if (!(anomaly_magnitude_power > 0.0)) throw ConfigError("synth: anomaly_magnitude_power must be > 0");
    std::set<std::string> names;
    for (const auto& g : groups) {
        if (g.name.empty() || g.vin_prefix.size() != 3) throw ConfigError("synth: group needs a name and a 3-char VIN prefix");
        if (!names.insert(g.name).second) throw ConfigError("synth: duplicate group '" + g.name + "'");
        if (!(g.behaviour_multiplier > 0.0)) throw ConfigError("synth: behaviour multiplier must be positive");
    }
    names.clear();
    double share = 0.0;
    bool continuous_target = false;
    bool has_kms = false, has_city = false;
    for (const auto& f : features) {
        if (!names.insert(f.name).second) throw ConfigError("synth: duplicate feature '" + f.name + "'");
        if (f.anomaly_share < 0.0) throw ConfigError("synth: negative anomaly share");
        if (f.anomaly_share > 0.0) {
            if (f.shape != SynthShape::linear || !(f.coef > 0.0))
                throw ConfigError("synth: anomaly features must have a positive linear effect");
            if (!f.integer) continuous_target = true;
        }
        share += f.anomaly_share;
        has_kms |= f.draw == SynthDraw::route_distance;
        has_city |= f.draw == SynthDraw::route_city;
    }
    if (!has_kms || !has_city) throw ConfigError("synth: trip distance and city share features are required");
    if (anomaly_rate > 0.0 && (std::abs(share - 1.0) > 1e-9 || !continuous_target))
        throw ConfigError("synth: anomaly shares must sum to 1 with at least one continuous feature");
}

SynthConfig SynthConfig::from_text(const std::vector<std::string>& lines) {
    SynthConfig c = defaults();
    std::vector<SynthGroup> groups;
    for (const auto& line : lines) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("synth config line without '=': " + line);
        const std::string key(trim(std::string_view(line).substr(0, eq)));
        const std::string val(trim(std::string_view(line).substr(eq + 1)));
        auto num = [&] {
            double v = 0.0;
            if (!try_parse_double(val, v)) throw ConfigError("synth: '" + key + "' needs a number, got '" + val + "'");
            return v;
        };
        auto count = [&] {
            const double v = num();
            if (v < 0 || v != std::floor(v)) throw ConfigError("synth: '" + key + "' needs a non-negative integer");
            return static_cast<std::size_t>(v);
        };
        if (key == "seed")
            c.seed = count();
        else if (key == "n_vehicles")
            c.n_vehicles = count();
        else if (key == "n_days")
            c.n_days = count();
        else if (key == "start_date")
            c.start_date = val;
        else if (key == "noise_fraction")
            c.noise_fraction = num();
        else if (key == "anomaly_rate")
            c.anomaly_rate = num();
        else if (key == "anomaly_magnitude_min")
            c.anomaly_magnitude_min = num();
        else if (key == "anomaly_magnitude_max")
            c.anomaly_magnitude_max = num();
        else if (key == "anomaly_magnitude_power")
            c.anomaly_magnitude_power = num();
        else if (key == "anomaly_prone_fraction")
            c.anomaly_prone_fraction = num();
        else if (key == "anomaly_prone_multiplier")
            c.anomaly_prone_multiplier = num();
        else if (key == "missing_rate")
            c.missing_rate = num();
        else if (key == "short_trip_rate")
            c.short_trip_rate = num();
        else if (key.rfind("group.", 0) == 0) {
            const auto p = split(val);
            if (p.size() != 4) throw ConfigError("synth: '" + key + "' needs prefix,base,offset,multiplier");
            groups.push_back({key.substr(6), std::string(trim(p[0])), parse_double(trim(p[1])),
                              parse_double(trim(p[2])), parse_double(trim(p[3]))});
        } else
            throw ConfigError("synth: unknown key '" + key + "'");
    }
    if (!groups.empty()) c.groups = std::move(groups);
    c.validate();
    return c;
}

std::string SynthConfig::to_text() const {
    std::ostringstream o;
    o << "seed=" << seed << "\nn_vehicles=" << n_vehicles << "\nn_days=" << n_days << "\nstart_date=" << start_date
      << "\nnoise_fraction=" << format_double(noise_fraction) << "\nanomaly_rate=" << format_double(anomaly_rate)
      << "\nanomaly_magnitude_min=" << format_double(anomaly_magnitude_min)
      << "\nanomaly_magnitude_max=" << format_double(anomaly_magnitude_max)
      << "\nanomaly_magnitude_power=" << format_double(anomaly_magnitude_power)
      << "\nanomaly_prone_fraction=" << format_double(anomaly_prone_fraction)
      << "\nanomaly_prone_multiplier=" << format_double(anomaly_prone_multiplier)
      << "\nmissing_rate=" << format_double(missing_rate) << "\nshort_trip_rate=" << format_double(short_trip_rate)
      << '\n';
    for (const auto& g : groups)
        o << "group." << g.name << '=' << g.vin_prefix << ',' << format_double(g.base_fuel) << ','
          << format_double(g.offset) << ',' << format_double(g.behaviour_multiplier) << '\n';
    for (const auto& f : features)
        o << "# feature " << f.name << ' ' << static_cast<int>(f.draw) << ' ' << format_double(f.p1) << ' '
          << format_double(f.p2) << ' ' << f.style_scaled << ' ' << static_cast<int>(f.shape) << ' '
          << format_double(f.coef) << ' ' << format_double(f.scale) << ' ' << f.behaviour << ' '
          << format_double(f.anomaly_share) << ' ' << f.integer << '\n';
    return o.str();
}

std::string SynthConfig::hash() const { return hex64(fnv1a64(to_text())); }

namespace {


std::string date_text(std::chrono::sys_days d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

struct Day {
    std::size_t vehicle = 0;
    std::string date;
    std::size_t group = 0;
    double kms = 0.0;
    double driving_h = 0.0;
    double city_h = 0.0;
    double odometer = 0.0;
    std::vector<double> x;
    std::vector<bool> missing;
    RouteType route = RouteType::combined;
    bool short_trip = false;
    double noise = 0.0;
    double clean = 0.0;  // noiseless, no anomaly
    bool anomaly = false;
    double magnitude = 0.0;
    double excess = 0.0;
};

}  // namespace

SynthOutput generate_fleet(const SynthConfig& cfg, const std::string& header_line, const RouteThresholds& th) {
    cfg.validate();
    const auto start = parse_date(cfg.start_date);
    std::mt19937_64 rng(cfg.seed);
    std::mt19937_64 anomaly_rng(splitmix64(cfg.seed ^ 0xa5a5a5a5ULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

    const auto& feats = cfg.features;
    const std::size_t nf = feats.size();
    std::vector<Day> days;
    days.reserve(cfg.n_vehicles * cfg.n_days);
    for (std::size_t v = 0; v < cfg.n_vehicles; ++v) {
        const std::size_t group = v % cfg.groups.size();
        const double style = uniform(0.6, 1.5);
        double odometer = std::floor(uniform(1e7, 1e8));
        for (std::size_t t = 0; t < cfg.n_days; ++t) {
            Day d;
            d.vehicle = v;
            d.group = group;
            d.date = date_text(start + std::chrono::days{static_cast<int>(t)});
            // Route profile: city, highway or mixed.
            const double profile = unit(rng);
            double ptc = 0.0, speed = 0.0;
            if (profile < 0.35) {
                ptc = uniform(0.66, 0.95), d.kms = uniform(8.0, 30.0), speed = 25.0;
            } else if (profile < 0.7) {
                ptc = uniform(0.05, 0.45), d.kms = uniform(35.0, 220.0), speed = 80.0;
            } else {
                ptc = uniform(0.3, 0.8), d.kms = uniform(10.0, 120.0), speed = 45.0;
            }
            if (unit(rng) < cfg.short_trip_rate) {
                d.kms = uniform(1.0, 5.0);
                d.short_trip = true;
            }
            d.kms = std::round(d.kms * 100.0) / 100.0;
            d.driving_h = std::round(d.kms / speed * 1e4) / 1e4;
            d.city_h = std::round(ptc * d.driving_h * 1e4) / 1e4;
            odometer += d.kms * 1000.0;
            d.odometer = odometer;
            const double city_share = std::clamp(d.city_h / d.driving_h, 0.0, 1.0);
            d.route = assign_route_type(city_share, d.kms, th);

            d.x.assign(nf, 0.0);
            d.missing.assign(nf, false);
            for (std::size_t j = 0; j < nf; ++j) {
                const auto& f = feats[j];
                const double s = f.style_scaled ? style : 1.0;
                double x = 0.0;
                switch (f.draw) {
                    case SynthDraw::poisson: x = std::poisson_distribution<int>(f.p1 * s)(rng); break;
                    case SynthDraw::uniform: x = uniform(f.p1, f.p2); break;
                    case SynthDraw::zero_inflated: {
                        const double u = unit(rng);
                        x = u < f.p1 ? 0.0 : uniform(0.0, f.p2);
                        break;
                    }
                    case SynthDraw::exponential: x = std::exponential_distribution<double>(1.0 / (f.p1 * s))(rng); break;
                    case SynthDraw::route_distance: x = d.kms; break;
                    case SynthDraw::route_city: x = city_share; break;
                    case SynthDraw::odometer: x = d.odometer; break;
                }
                if (f.draw == SynthDraw::uniform || f.draw == SynthDraw::zero_inflated || f.draw == SynthDraw::exponential)
                    x = std::round(x * 1e4) / 1e4;
                d.x[j] = x;
                const bool structural = f.draw == SynthDraw::route_distance || f.draw == SynthDraw::route_city ||
                                        f.draw == SynthDraw::odometer;
                if (!structural && unit(rng) < cfg.missing_rate) d.missing[j] = true;
            }
            days.push_back(std::move(d));
        }
    }

    auto effect = [&](const Day& d, std::size_t j) {
        const auto& f = feats[j];
        const double m = f.behaviour ? cfg.groups[d.group].behaviour_multiplier : 1.0;
        return m * synth_effect(f, d.x[j]);
    };
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& d : days) {
        const auto& g = cfg.groups[d.group];
        double s = g.base_fuel + g.offset;
        for (std::size_t j = 0; j < nf; ++j) s += effect(d, j);
        d.clean = s;
        d.noise = cfg.noise_fraction * s * gauss(rng);
    }

    // IQR of the clean fuel per (group, route) scales the injected excess.
    std::map<std::pair<std::size_t, RouteType>, std::vector<double>> by_key;
    for (const auto& d : days)
        if (!d.short_trip) by_key[{d.group, d.route}].push_back(d.clean + d.noise);
    std::map<std::pair<std::size_t, RouteType>, double> iqr;
    for (auto& [k, v] : by_key) iqr[k] = quantile(v, 0.75) - quantile(v, 0.25);

    // Anomaly-prone vehicles; the others are scaled down to keep the fleet rate.
    const double fp = cfg.anomaly_prone_fraction, mp = cfg.anomaly_prone_multiplier;
    const double other_rate = fp < 1.0 ? cfg.anomaly_rate * std::max(0.0, 1.0 - fp * mp) / (1.0 - fp) : 0.0;
    std::vector<double> vehicle_rate(cfg.n_vehicles);
    for (auto& r : vehicle_rate) r = unit(anomaly_rng) < fp ? cfg.anomaly_rate * mp : other_rate;

    std::size_t n_anomalies = 0;
    for (auto& d : days) {
        const double u = unit(anomaly_rng);
        const double mag = cfg.anomaly_magnitude_min + (cfg.anomaly_magnitude_max - cfg.anomaly_magnitude_min) *
                                                           std::pow(unit(anomaly_rng), cfg.anomaly_magnitude_power);
        if (d.short_trip || !(u < vehicle_rate[d.vehicle]) || cfg.anomaly_rate == 0.0) continue;
        const double total = mag * iqr[{d.group, d.route}];
        const double m = cfg.groups[d.group].behaviour_multiplier;
        double placed = 0.0;
        std::size_t first_continuous = nf;
        for (std::size_t j = 0; j < nf; ++j) {
            const auto& f = feats[j];
            if (f.anomaly_share <= 0.0) continue;
            const double slope = f.coef * (f.behaviour ? m : 1.0);
            if (f.integer) {
                const double k = std::floor(f.anomaly_share * total / slope);
                d.x[j] += k;
                placed += k * slope;
            } else if (first_continuous == nf) {
                first_continuous = j;
            } else {
                d.x[j] += f.anomaly_share * total / slope;
                placed += f.anomaly_share * total;
            }
        }
        const auto& fc = feats[first_continuous];
        d.x[first_continuous] += (total - placed) / (fc.coef * (fc.behaviour ? m : 1.0));
        d.anomaly = true;
        d.magnitude = mag;
        ++n_anomalies;
    }

    SynthOutput out;
    out.n_days_total = days.size();
    out.n_anomalies = n_anomalies;
    std::ostringstream raw, oracle, vins, catalog;
    for (auto* o : {&raw, &oracle, &vins, &catalog})
        if (!header_line.empty()) *o << header_line << '\n';
    raw << "time_tx,vehicle_id,variable_id,variable_value\n";
    oracle << "vehicle_id,date_tx,vehicle_group,route_type,base,offset,noise,anomaly,magnitude,excess,fuel";
    for (const auto& f : feats)
        if (f.shape != SynthShape::none) oracle << ",c:" << f.name;
    oracle << '\n';

    auto vehicle_id = [](std::size_t v) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "V%04zu", v + 1);
        return std::string(buf);
    };
    auto vin_of = [&](std::size_t v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%014llu", cfg.groups[v % cfg.groups.size()].vin_prefix.c_str(),
                      static_cast<unsigned long long>(splitmix64(cfg.seed + v) % 100000000000000ULL));
        return std::string(buf);
    };

    for (auto& d : days) {
        const auto& g = cfg.groups[d.group];
        double contrib = 0.0;
        for (std::size_t j = 0; j < nf; ++j) contrib += effect(d, j);
        const double fuel = g.base_fuel + g.offset + contrib + d.noise;
        d.excess = fuel - d.clean - d.noise;
        const auto id = vehicle_id(d.vehicle);
        int k = 0;
        auto rec = [&](const std::string& var, const std::string& val) {
            char ts[32];
            std::snprintf(ts, sizeof ts, "T%02d:%02d:00Z", 8 + k / 60, k % 60);
            ++k;
            raw << d.date << ts << ',' << id << ',' << var << ',' << val << '\n';
        };
        rec("VIN", vin_of(d.vehicle));
        rec("TripKms", format_double(d.kms));
        rec("TripFuel", format_double(fuel * d.kms / 100.0));
        rec("CityDuration", format_double(d.city_h));
        rec("DrivingDuration", format_double(d.driving_h));
        for (std::size_t j = 0; j < nf; ++j) {
            const auto& f = feats[j];
            if (d.missing[j] || f.draw == SynthDraw::route_distance || f.draw == SynthDraw::route_city) continue;
            rec(f.draw == SynthDraw::odometer ? "Odometer" : f.name, format_double(d.x[j]));
        }

        oracle << id << ',' << d.date << ',' << g.name << ',' << to_string(d.route) << ','
               << format_double(g.base_fuel) << ',' << format_double(g.offset) << ',' << format_double(d.noise) << ','
               << (d.anomaly ? 1 : 0) << ',' << format_double(d.anomaly ? d.magnitude : 0.0) << ','
               << format_double(d.excess) << ',' << format_double(fuel);
        for (std::size_t j = 0; j < nf; ++j)
            if (feats[j].shape != SynthShape::none) oracle << ',' << format_double(effect(d, j));
        oracle << '\n';
    }

    vins << "prefix,vehicle_group\n";
    catalog << "vehicle_group,route_type,catalog_fuel\n";
    std::vector<const SynthGroup*> sorted;
    for (const auto& g : cfg.groups) sorted.push_back(&g);
    std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->name < b->name; });
    for (const auto* g : sorted) {
        vins << g->vin_prefix << ',' << g->name << '\n';
        for (auto r : {RouteType::city, RouteType::combined, RouteType::hwy})
            catalog << g->name << ',' << to_string(r) << ',' << format_double(g->base_fuel + g->offset) << '\n';
    }
    out.raw = raw.str();
    out.oracle = oracle.str();
    out.vins = vins.str();
    out.catalog = catalog.str();
    return out;
}

std::vector<OracleRow> oracle_from_text(const std::vector<std::string>& lines) {
    if (lines.empty()) throw DataError("empty oracle file");
    const auto header = split(lines[0]);
    if (header.size() < 11 || header[0] != "vehicle_id" || header[10] != "fuel")
        throw DataError("oracle header mismatch");
    std::vector<OracleRow> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split(lines[i]);
        if (c.size() != header.size()) throw DataError("malformed oracle line " + std::to_string(i + 1));
        OracleRow r{c[0], c[1], c[2], parse_route_type(c[3]), parse_double(c[4]), parse_double(c[5]),
                    parse_double(c[6]), c[7] == "1", parse_double(c[8]), parse_double(c[9]), parse_double(c[10]), {}};
        for (std::size_t j = 11; j < c.size(); ++j) r.contributions[header[j].substr(2)] = parse_double(c[j]);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fuelrec
