#include "fuelrec/model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace fuelrec {

std::string_view to_string(ModelMode m) noexcept {
    switch (m) {
        case ModelMode::plain: return "plain";
        case ModelMode::monotone: return "monotone";
        case ModelMode::ebm_var: return "ebm_var";
    }
    return "plain";
}

ModelMode parse_model_mode(std::string_view s) {
    if (s == "plain") return ModelMode::plain;
    if (s == "monotone") return ModelMode::monotone;
    if (s == "ebm_var") return ModelMode::ebm_var;
    throw ConfigError("unknown model mode '" + std::string(s) + "' (plain, monotone, ebm_var)");
}

bool is_one_hot(std::string_view column) noexcept { return column.find('=') != std::string_view::npos; }

std::string one_hot_name(std::string_view categorical, std::string_view level) {
    return std::string(categorical) + "=" + std::string(level);
}

std::vector<std::string> design_columns(const Far& far, const std::vector<bool>& include) {
    std::vector<std::string> cols = far.features;
    std::set<std::string> groups, routes;
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        if (!include.empty() && !include[i]) continue;
        groups.insert(far.rows[i].vehicle_group);
        routes.insert(std::string(to_string(far.rows[i].route_type)));
    }
    for (const auto& g : groups) cols.push_back(one_hot_name("vehicle_group", g));
    for (const auto& r : routes) cols.push_back(one_hot_name("route_type", r));
    return cols;
}

RowEncoder::RowEncoder(const Far& far, std::vector<std::string> model_columns) : columns_(std::move(model_columns)) {
    for (const auto& c : columns_) {
        Slot s;
        const auto eq = c.find('=');
        if (eq == std::string::npos) {
            s.kind = Kind::numeric;
            const auto col = far.column(c);
            if (!col) throw DataError("model feature '" + c + "' is missing from the FAR");
            s.far_col = *col;
        } else {
            const auto cat = c.substr(0, eq);
            s.level = c.substr(eq + 1);
            if (cat == "vehicle_group")
                s.kind = Kind::group_level;
            else if (cat == "route_type")
                s.kind = Kind::route_level;
            else
                throw DataError("unsupported one-hot column '" + c + "'");
        }
        slots_.push_back(std::move(s));
    }
}

std::vector<double> RowEncoder::encode(const FarRow& row) const {
    std::vector<double> out(slots_.size());
    for (std::size_t j = 0; j < slots_.size(); ++j) {
        const auto& s = slots_[j];
        switch (s.kind) {
            case Kind::numeric: out[j] = row.values[s.far_col]; break;
            case Kind::group_level: out[j] = row.vehicle_group == s.level ? 1.0 : 0.0; break;
            case Kind::route_level: out[j] = to_string(row.route_type) == s.level ? 1.0 : 0.0; break;
        }
    }
    return out;
}

DesignMatrix build_design(const Far& far, const std::vector<std::string>& columns, const std::vector<bool>& include) {
    const RowEncoder enc(far, columns);
    DesignMatrix x;
    x.columns = columns;
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        if (!include.empty() && !include[i]) continue;
        x.push_row(enc.encode(far.rows[i]));
    }
    return x;
}

std::string subgroup_key(const FarRow& row, const std::vector<std::string>& keys) {
    std::string out;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        if (k) out += '|';
        if (keys[k] == "vehicle_group")
            out += row.vehicle_group;
        else if (keys[k] == "route_type")
            out += to_string(row.route_type);
        else
            throw ConfigError("subgroup column '" + keys[k] + "' is not a FAR categorical");
    }
    return out;
}

const GamModel& FuelModel::base() const {
    if (const auto* g = std::get_if<GamModel>(&model_)) return *g;
    return std::get<EbmVarModel>(model_).base;
}

std::string FuelModel::subgroup_of(const FarRow& row) const {
    if (const auto* e = ebm_var()) return subgroup_key(row, e->subgroup_keys);
    return {};
}

double FuelModel::intercept(const std::string& subgroup) const {
    if (const auto* e = ebm_var()) return e->intercept(subgroup);
    return base().intercept;
}

double FuelModel::term(const std::string& subgroup, std::size_t feature, double value) const {
    if (const auto* e = ebm_var()) return e->term(subgroup, feature, value);
    return base().term(feature, value);
}

double FuelModel::predict(const std::string& subgroup, std::span<const double> x) const {
    if (const auto* e = ebm_var()) return e->predict(subgroup, x);
    return base().predict(x);
}

std::vector<Contribution> FuelModel::contributions(const std::string& subgroup, std::span<const double> x) const {
    if (const auto* e = ebm_var()) return e->contributions(subgroup, x);
    return base().contributions(x);
}

std::string FuelModel::serialize() const {
    if (const auto* e = ebm_var()) return e->serialize();
    auto j = base().to_json();
    j["mode"] = to_string(mode_);
    return j.dump(1) + "\n";
}

FuelModel FuelModel::deserialize(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("cannot parse model file: ") + e.what());
    }
    if (!j.is_object() || !j.contains("schema")) throw ModelFormatError("model file has no schema tag");
    if (j["schema"] == "fuelrec.ebm_var") return FuelModel(EbmVarModel::deserialize(text));
    const auto mode = j.contains("mode") && j["mode"].is_string() ? parse_model_mode(j["mode"].get<std::string>())
                                                                   : ModelMode::plain;
    return FuelModel(mode, GamModel::from_json(j));
}

FuelModel FuelModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing model file '" + path + "' (run the train stage first)");
    // Leading `#` lines carry the tool and config header.
    std::string text, line;
    while (std::getline(in, line))
        if (line.empty() || line.front() != '#') text += line + '\n';
    return deserialize(text);
}

std::map<std::string, Monotone> default_monotone_map(const FeatureRegistry& registry,
                                                     const std::vector<std::string>& columns) {
    std::map<std::string, Monotone> out;
    for (const auto& c : columns) {
        if (is_one_hot(c)) continue;
        const auto* spec = registry.find(c);
        if (!spec) continue;
        if (spec->direction == Direction::Positive) out[c] = Monotone::increasing;
        if (spec->direction == Direction::Negative) out[c] = Monotone::decreasing;
    }
    return out;
}

FuelModel train_fuel_model(const Far& far, const std::vector<bool>& include, const FeatureRegistry& registry,
                           const TrainOptions& opts) {
    const auto columns = design_columns(far, include);
    const auto x = build_design(far, columns, include);
    std::vector<double> y;
    std::vector<std::string> subgroups;
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        if (!include.empty() && !include[i]) continue;
        y.push_back(far.rows[i].fuel_consumption);
        subgroups.push_back(subgroup_key(far.rows[i], opts.subgroup_keys));
    }
    if (y.size() < 2) throw DataError("not enough training rows (" + std::to_string(y.size()) + ")");

    GamConfig cfg = opts.gam;
    cfg.monotone = opts.monotone;
    if (opts.mode == ModelMode::monotone)
        for (const auto& [f, m] : default_monotone_map(registry, columns)) cfg.monotone.emplace(f, m);
    for (auto it = cfg.monotone.begin(); it != cfg.monotone.end();)
        it = std::find(columns.begin(), columns.end(), it->first) == columns.end() ? cfg.monotone.erase(it) : std::next(it);

    FuelModel out;
    if (opts.mode == ModelMode::ebm_var) {
        auto m = train_ebm_var(x, y, subgroups, opts.subgroup_keys, cfg, opts.th_ebm_var);
        m.base.meta.registry_hash = registry.hash();
        for (auto& [k, e] : m.error_models) e.meta.registry_hash = registry.hash();
        out = FuelModel(std::move(m));
    } else {
        auto g = train_gam(x, y, cfg);
        g.meta.registry_hash = registry.hash();
        out = FuelModel(opts.mode, std::move(g));
    }
    return out;
}

}  // namespace fuelrec
