#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fuelrec/common.hpp"
#include "fuelrec/telemetry.hpp"

namespace fuelrec {

struct SynthGroup {
    std::string name;
    std::string vin_prefix;
    double base_fuel = 7.0;             // L/100 km
    double offset = 0.0;                // L/100 km, added on every day of the group
    double behaviour_multiplier = 1.0;  // scales every driving-behaviour effect
};

enum class SynthDraw {
    poisson,         // mean p1, times the vehicle's style factor when style_scaled
    uniform,         // [p1, p2]
    zero_inflated,   // 0 with probability p1, else uniform [0, p2]
    exponential,     // mean p1, times style when style_scaled
    route_distance,  // trip_kms from the day's route profile
    route_city,      // per_time_city from the day's route profile
    odometer,        // running total of trip distance, in meters
};

enum class SynthShape {
    none,
    linear,             // coef * (x - scale)
    decreasing_linear,  // coef * (scale - x)
    saturating_decay,   // coef * exp(-x / scale)
    bump,               // coef * (x / scale) * exp(1 - x / scale), peak coef at x = scale
};

struct SynthFeature {
    std::string name;
    SynthDraw draw = SynthDraw::uniform;
    double p1 = 0.0;
    double p2 = 1.0;
    bool style_scaled = false;
    SynthShape shape = SynthShape::none;
    double coef = 0.0;
    double scale = 1.0;
    bool behaviour = false;       // multiplied by the group's behaviour_multiplier
    double anomaly_share = 0.0;   // fraction of an injected excess carried by this feature
    bool integer = false;
};

double synth_effect(const SynthFeature& f, double x);

struct SynthConfig {
    std::uint64_t seed = 42;
    std::size_t n_vehicles = 200;
    std::size_t n_days = 120;
    std::string start_date = "2023-01-02";
    std::vector<SynthGroup> groups;
    std::vector<SynthFeature> features;
    double noise_fraction = 0.05;  // noise std as a fraction of the noiseless fuel
    double anomaly_rate = 0.05;
    double anomaly_magnitude_min = 1.0;  // in units of the clean (group, route) IQR
    double anomaly_magnitude_max = 6.0;
    // magnitude = min + (max - min) * u^power; power > 1 favours small excesses
    double anomaly_magnitude_power = 2.0;
    // A fraction of vehicles gets the anomaly rate times the multiplier; the rest
    // are scaled down so the fleet-wide rate stays anomaly_rate.
    double anomaly_prone_fraction = 0.05;
    double anomaly_prone_multiplier = 8.0;
    double missing_rate = 0.005;
    double short_trip_rate = 0.01;

    static SynthConfig defaults();
    // Throws ConfigError on invalid rates, magnitudes, sizes or duplicate names.
    void validate() const;
    // Flat `key = value` overrides on top of `defaults()`; groups as
    // `group.<name> = <vin prefix>,<base>,<offset>,<multiplier>` replace the default set.
    static SynthConfig from_text(const std::vector<std::string>& lines);
    std::string to_text() const;
    std::string hash() const;
};

struct SynthOutput {
    std::string raw;      // time_tx,vehicle_id,variable_id,variable_value
    std::string oracle;   // per vehicle-day truth
    std::string vins;     // prefix,vehicle_group
    std::string catalog;  // vehicle_group,route_type,catalog_fuel (base + offset)
    std::size_t n_days_total = 0;
    std::size_t n_anomalies = 0;
};

// Deterministic for a given config. Every output starts with `header_line` when non-empty.
SynthOutput generate_fleet(const SynthConfig& cfg, const std::string& header_line = "",
                           const RouteThresholds& th = {});

struct OracleRow {
    std::string vehicle_id;
    std::string date_tx;
    std::string vehicle_group;
    RouteType route_type = RouteType::combined;
    double base = 0.0;
    double offset = 0.0;
    double noise = 0.0;
    bool anomaly = false;
    double magnitude = 0.0;
    double excess = 0.0;
    double fuel = 0.0;
    std::map<std::string, double> contributions;
};

std::vector<OracleRow> oracle_from_text(const std::vector<std::string>& lines);

}  // namespace fuelrec
