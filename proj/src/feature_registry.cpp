#include "fuelrec/feature_registry.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fuelrec/common.hpp"

namespace fuelrec {

std::string_view to_string(FeatureGroup g) noexcept {
    switch (g) {
        case FeatureGroup::Index: return "Index";
        case FeatureGroup::Categorical: return "Categorical";
        case FeatureGroup::VehicleParameters: return "VehicleParameters";
        case FeatureGroup::DrivingBehaviour: return "DrivingBehaviour";
        case FeatureGroup::EnvironmentParameters: return "EnvironmentParameters";
        case FeatureGroup::Target: return "Target";
    }
    return "Index";
}

std::string_view to_string(Direction d) noexcept {
    switch (d) {
        case Direction::Positive: return "Positive";
        case Direction::Negative: return "Negative";
        case Direction::None: return "None";
    }
    return "None";
}

FeatureGroup parse_feature_group(std::string_view s) {
    for (auto g : {FeatureGroup::Index, FeatureGroup::Categorical, FeatureGroup::VehicleParameters,
                   FeatureGroup::DrivingBehaviour, FeatureGroup::EnvironmentParameters, FeatureGroup::Target})
        if (to_string(g) == s) return g;
    throw ConfigError("unknown feature group '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
    for (auto d : {Direction::Positive, Direction::Negative, Direction::None})
        if (to_string(d) == s) return d;
    throw ConfigError("unknown direction '" + std::string(s) + "'");
}

namespace {

bool parse_bool(std::string_view s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("expected true/false, got '" + std::string(s) + "'");
}

FeatureSpec ix(std::string name, std::string units) {
    return {std::move(name), FeatureGroup::Index, Direction::None, false, false, std::move(units)};
}
FeatureSpec cat(std::string name) {
    return {std::move(name), FeatureGroup::Categorical, Direction::None, false, false, "none"};
}
// Explainable feature; actionability is fixed afterwards.
FeatureSpec ex(std::string name, FeatureGroup g, Direction d, bool zero, std::string units) {
    return {std::move(name), g, d, zero, true, std::move(units)};
}

}  // namespace

FeatureRegistry::FeatureRegistry(std::vector<FeatureSpec> specs) : specs_(std::move(specs)) {
    std::set<std::string> names;
    int targets = 0;
    for (const auto& s : specs_) {
        if (s.name.empty()) throw ConfigError("feature with empty name");
        if (!names.insert(s.name).second) throw ConfigError("duplicate feature name '" + s.name + "'");
        if (s.group == FeatureGroup::Index || s.group == FeatureGroup::Categorical) {
            if (s.direction != Direction::None || s.actionable)
                throw ConfigError("index/categorical feature '" + s.name + "' must have direction None and not be actionable");
        }
        if (s.zero_reference && s.direction == Direction::None)
            throw ConfigError("zero-reference feature '" + s.name + "' needs a direction");
        if (s.group == FeatureGroup::Target) ++targets;
    }
    if (targets != 1) throw ConfigError("registry must hold exactly one target feature, found " + std::to_string(targets));
}

FeatureRegistry FeatureRegistry::builtin() {
    using G = FeatureGroup;
    using D = Direction;
    constexpr auto VP = G::VehicleParameters;
    constexpr auto DB = G::DrivingBehaviour;
    constexpr auto EP = G::EnvironmentParameters;
    std::vector<FeatureSpec> s = {
        ix("vehicle_id", "none"),
        ix("date_tx", "date"),
        cat("vehicle_group"),
        cat("make"),
        cat("model"),
        cat("year"),
        cat("vin"),
        cat("route_type"),
        cat("vehicle_class"),
        cat("diesel_detected"),
        ex("duration_air_conditioner_on", VP, D::Positive, true, "hours"),
        ex("duration_lights_left_on", VP, D::Positive, true, "minutes"),
        ex("duration_abs_on", VP, D::Positive, true, "hours"),
        ex("duration_change_fuel_filter_light_on", VP, D::Positive, true, "hours"),
        ex("cranking_events_below_10v", VP, D::Negative, true, "none"),
        ex("duration_diesel_particulate_filter_on", VP, D::Positive, true, "hours"),
        ex("duration_pto", VP, D::Positive, true, "hours"),
        ex("harsh_brakes_events", DB, D::Positive, true, "none"),
        ex("harsh_turns_events", DB, D::Positive, true, "none"),
        ex("jackrabbit_events", DB, D::Positive, true, "none"),
        ex("mean_braking_acc", DB, D::Positive, false, "m/s2"),
        ex("mean_forward_acc", DB, D::Positive, false, "m/s2"),
        ex("mean_up_down_acc", DB, D::Positive, false, "m/s2"),
        ex("mean_side_to_side_acc", DB, D::Positive, false, "m/s2"),
        ex("mean_speed_city", DB, D::Positive, false, "km/h"),
        ex("mean_speed_hwy", DB, D::Positive, false, "km/h"),
        ex("rpm_high", DB, D::Positive, true, "none"),
        ex("rpm_red", DB, D::Positive, true, "none"),
        ex("rpm_orange", DB, D::Positive, true, "none"),
        ex("rpm_yellow", DB, D::Positive, true, "none"),
        ex("speed_events_over_120", DB, D::Positive, true, "none"),
        ex("speed_events_over_90", DB, D::Positive, true, "none"),
        ex("duration_ecomode_on", DB, D::Negative, false, "hours"),
        ex("ignition_events", DB, D::Positive, false, "none"),
        ex("duration_speed_control", DB, D::Negative, false, "hours"),
        ex("count_neutral", DB, D::Positive, true, "none"),
        ex("count_reverse", DB, D::Positive, true, "none"),
        ex("duration_extra_passenger", DB, D::Positive, true, "hours"),
        ex("height", EP, D::Negative, false, "meters"),
        ex("duration_driving_uphill", EP, D::Positive, true, "hours"),
        ex("duration_idle_drive", DB, D::Positive, true, "hours"),
        // The source catalog lists hours for distance driven; km is the real unit.
        ex("trip_kms", EP, D::Negative, false, "km"),
        ex("per_time_city", EP, D::Positive, false, "none"),
        ex("duration_hazard_lights_on", VP, D::Positive, true, "hours"),
        ex("duration_oil_low_light_on", VP, D::Positive, true, "hours"),
        ex("duration_oil_change_light_on", VP, D::Positive, true, "hours"),
        ex("duration_oil_change_due_light_on", VP, D::Positive, true, "hours"),
        ex("mean_engine_oil_temperature", VP, D::Positive, false, "celsius"),
        ex("mean_transmission_oil_temperature", VP, D::Positive, false, "celsius"),
        ex("variation_engine_oil_life", VP, D::Positive, false, "none"),
        ex("mean_oil_pressure", VP, D::Positive, false, "pa"),
        ex("mean_engine_cool_temperature", VP, D::Positive, false, "celsius"),
        ex("variation_coolant_level", VP, D::Positive, false, "none"),
        ex("duration_water_in_fuel_light_on", VP, D::Positive, true, "hours"),
        ex("duration_engine_hot_light_on", VP, D::Positive, true, "hours"),
        ex("hours_clean_exhaust_filter_light_on", VP, D::Positive, true, "hours"),
        ex("variation_fuel_exhaust_fluid", VP, D::Positive, true, "none"),
        ex("variation_fuel_filter_life", VP, D::Positive, true, "none"),
        ex("distance_mil_on", VP, D::Positive, true, "meters"),
        ex("total_odometer", VP, D::Positive, false, "meters"),
        ex("mean_tyre_pressure_front_left", VP, D::Positive, false, "pa"),
        ex("mean_tyre_pressure_front_right", VP, D::Positive, false, "pa"),
        ex("mean_tyre_pressure_rear_left", VP, D::Positive, false, "pa"),
        ex("mean_tyre_pressure_rear_right", VP, D::Positive, false, "pa"),
        ex("mean_exterior_temperature", VP, D::Negative, false, "celsius"),
        ex("duration_driving_t_0_20", EP, D::Positive, true, "hours"),
        ex("duration_driving_t_minus20_0", EP, D::Positive, true, "hours"),
        ex("duration_driving_t_below_minus20", EP, D::Positive, true, "hours"),
        ex("duration_raining", EP, D::Positive, true, "hours"),
        {"fuel_consumption", G::Target, D::None, false, false, "l/100km"},
    };
    // Everything explainable is actionable except distance and odometer.
    for (auto& f : s)
        if (f.name == "trip_kms" || f.name == "total_odometer") f.actionable = false;
    return FeatureRegistry(std::move(s));
}

const FeatureSpec* FeatureRegistry::find(std::string_view name) const noexcept {
    for (const auto& s : specs_)
        if (s.name == name) return &s;
    return nullptr;
}

const FeatureSpec& FeatureRegistry::at(std::string_view name) const {
    if (const auto* s = find(name)) return *s;
    throw ConfigError("feature '" + std::string(name) + "' not in registry");
}

const FeatureSpec& FeatureRegistry::target() const {
    for (const auto& s : specs_)
        if (s.group == FeatureGroup::Target) return s;
    throw ConfigError("registry has no target");  // unreachable after validation
}

std::vector<std::string> FeatureRegistry::categorical() const {
    std::vector<std::string> out;
    for (const auto& s : specs_)
        if (s.group == FeatureGroup::Categorical) out.push_back(s.name);
    return out;
}

std::vector<std::string> FeatureRegistry::explainable_numeric() const {
    std::vector<std::string> out;
    for (const auto& s : specs_)
        if (s.explainable()) out.push_back(s.name);
    return out;
}

std::vector<std::string> FeatureRegistry::actionable() const {
    std::vector<std::string> out;
    for (const auto& s : specs_)
        if (s.actionable && s.explainable()) out.push_back(s.name);
    return out;
}

std::vector<std::string> FeatureRegistry::zero_reference() const {
    std::vector<std::string> out;
    for (const auto& s : specs_)
        if (s.zero_reference) out.push_back(s.name);
    return out;
}

FeatureRegistry FeatureRegistry::with_directions(const std::vector<std::pair<std::string, Direction>>& overrides) const {
    auto specs = specs_;
    for (const auto& [name, dir] : overrides) {
        bool found = false;
        for (auto& s : specs)
            if (s.name == name) {
                s.direction = dir;
                found = true;
            }
        if (!found) throw ConfigError("direction override for unknown feature '" + name + "'");
    }
    return FeatureRegistry(std::move(specs));
}

std::string FeatureRegistry::to_text() const {
    std::ostringstream out;
    out << "name,group,direction,zero_reference,actionable,units\n";
    for (const auto& s : specs_)
        out << s.name << ',' << to_string(s.group) << ',' << to_string(s.direction) << ','
            << (s.zero_reference ? "true" : "false") << ',' << (s.actionable ? "true" : "false") << ',' << s.units
            << '\n';
    return out.str();
}

std::string FeatureRegistry::hash() const { return hex64(fnv1a64(to_text())); }

FeatureRegistry parse_registry(std::string_view text) {
    std::vector<FeatureSpec> specs;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto cols = split(t);
        if (!header) {
            if (cols.size() != 6 || cols[0] != "name" || cols[1] != "group" || cols[2] != "direction")
                throw ConfigError("registry header must be name,group,direction,zero_reference,actionable,units");
            header = true;
            continue;
        }
        if (cols.size() != 6) throw ConfigError("registry row needs 6 fields: '" + std::string(t) + "'");
        specs.push_back({std::string(trim(cols[0])), parse_feature_group(trim(cols[1])),
                         parse_direction(trim(cols[2])), parse_bool(trim(cols[3])), parse_bool(trim(cols[4])),
                         std::string(trim(cols[5]))});
    }
    if (!header) throw ConfigError("registry file has no header");
    return FeatureRegistry(std::move(specs));
}

FeatureRegistry load_registry(const std::optional<std::string>& path) {
    if (!path || path->empty()) return FeatureRegistry::builtin();
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open registry '" + *path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_registry(ss.str());
}

}  // namespace fuelrec
