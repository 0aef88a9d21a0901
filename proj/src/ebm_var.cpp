#include "fuelrec/ebm_var.hpp"

#include <future>

#include "fuelrec/common.hpp"

namespace fuelrec {

namespace {
constexpr int kEbmVarSchemaVersion = 1;
constexpr std::string_view kEbmVarSchema = "fuelrec.ebm_var";
}  // namespace

const GamModel* EbmVarModel::error_model(const std::string& subgroup) const {
    const auto it = error_models.find(subgroup);
    return it == error_models.end() ? nullptr : &it->second;
}

double EbmVarModel::intercept(const std::string& subgroup) const {
    const auto* e = error_model(subgroup);
    return e ? base.intercept + e->intercept : base.intercept;
}

double EbmVarModel::term(const std::string& subgroup, std::size_t feature, double value) const {
    const auto* e = error_model(subgroup);
    const double b = base.term(feature, value);
    return e ? b + e->term(feature, value) : b;
}

double EbmVarModel::predict(const std::string& subgroup, std::span<const double> x) const {
    const auto* e = error_model(subgroup);
    const double b = base.predict(x);
    return e ? b + e->predict(x) : b;
}

std::vector<Contribution> EbmVarModel::contributions(const std::string& subgroup, std::span<const double> x) const {
    auto out = base.contributions(x);
    if (const auto* e = error_model(subgroup)) {
        const auto err = e->contributions(x);
        for (std::size_t j = 0; j < out.size(); ++j) out[j].relevance += err[j].relevance;
    }
    return out;
}

std::string EbmVarModel::serialize() const {
    nlohmann::json j;
    j["schema"] = kEbmVarSchema;
    j["version"] = kEbmVarSchemaVersion;
    j["subgroup_keys"] = subgroup_keys;
    j["threshold"] = threshold;
    j["base"] = base.to_json();
    auto& em = j["error_models"] = nlohmann::json::object();
    for (const auto& [key, m] : error_models) em[key] = m.to_json();
    return j.dump(1) + "\n";
}

EbmVarModel EbmVarModel::deserialize(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("schema").get<std::string>() != kEbmVarSchema) throw ModelFormatError("not an EBM_var model file");
        const int version = j.at("version").get<int>();
        if (version != kEbmVarSchemaVersion)
            throw ModelFormatError("unsupported EBM_var model version " + std::to_string(version));
        EbmVarModel m;
        m.subgroup_keys = j.at("subgroup_keys").get<std::vector<std::string>>();
        m.threshold = j.at("threshold").get<std::size_t>();
        m.base = GamModel::from_json(j.at("base"));
        for (const auto& [key, g] : j.at("error_models").items()) {
            auto em = GamModel::from_json(g);
            if (em.feature_order != m.base.feature_order)
                throw ModelFormatError("error model '" + key + "' features differ from the base model");
            m.error_models.emplace(key, std::move(em));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("malformed EBM_var model: ") + e.what());
    }
}

EbmVarModel train_ebm_var(const DesignMatrix& x, std::span<const double> y,
                          std::span<const std::string> subgroup_of_row, std::vector<std::string> subgroup_keys,
                          const GamConfig& cfg, std::size_t threshold) {
    if (threshold < 2) throw ConfigError("th_ebm_var must be at least 2");
    if (subgroup_of_row.size() != x.n_rows) throw DataError("one subgroup key per row required");
    EbmVarModel model;
    model.subgroup_keys = std::move(subgroup_keys);
    model.threshold = threshold;
    model.base = train_gam(x, y, cfg);

    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < x.n_rows; ++i) members[subgroup_of_row[i]].push_back(i);

    std::map<std::string, std::future<GamModel>> jobs;
    for (const auto& [key, idx] : members) {
        if (idx.size() < threshold) continue;
        DesignMatrix xi;
        xi.columns = x.columns;
        std::vector<double> err;
        err.reserve(idx.size());
        for (auto i : idx) {
            xi.push_row(x.row(i));
            err.push_back(y[i] - model.base.predict(x.row(i)));
        }
        jobs.emplace(key, std::async(std::launch::async, [xi = std::move(xi), err = std::move(err), cfg] {
                         return train_gam(xi, err, cfg);
                     }));
    }
    for (auto& [key, job] : jobs) model.error_models.emplace(key, job.get());
    return model;
}

EbmVarExplanation explain_ebm_var(const DesignMatrix& x, std::span<const std::string> subgroup_of_row,
                                  const EbmVarModel& model) {
    if (subgroup_of_row.size() != x.n_rows) throw DataError("one subgroup key per row required");
    EbmVarExplanation out;
    out.predictions.reserve(x.n_rows);
    out.intercepts.reserve(x.n_rows);
    out.contributions.reserve(x.n_rows);
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        const auto& key = subgroup_of_row[i];
        out.predictions.push_back(model.predict(key, x.row(i)));
        out.intercepts.push_back(model.intercept(key));
        out.contributions.push_back(model.contributions(key, x.row(i)));
    }
    return out;
}

}  // namespace fuelrec
