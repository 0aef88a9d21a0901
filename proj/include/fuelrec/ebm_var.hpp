#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fuelrec/gam.hpp"

namespace fuelrec {

// Base GAM plus error-correcting GAMs keyed by subgroup combination. Rows of a
// subgroup without an error model are explained by the base alone.
class EbmVarModel {
public:
    GamModel base;
    std::vector<std::string> subgroup_keys;  // categorical columns forming the key, e.g. {"vehicle_group"}
    std::size_t threshold = 100;
    std::map<std::string, GamModel> error_models;

    const GamModel* error_model(const std::string& subgroup) const;

    double intercept(const std::string& subgroup) const;
    double term(const std::string& subgroup, std::size_t feature, double value) const;
    double predict(const std::string& subgroup, std::span<const double> x) const;
    std::vector<Contribution> contributions(const std::string& subgroup, std::span<const double> x) const;

    std::string serialize() const;
    static EbmVarModel deserialize(std::string_view text);
};

// Trains the base on every row, then one error model per subgroup holding at
// least `threshold` rows, fitted to that subgroup's base residuals with the same
// hyperparameters. `subgroup_of_row[i]` is the key of row i.
EbmVarModel train_ebm_var(const DesignMatrix& x, std::span<const double> y,
                          std::span<const std::string> subgroup_of_row, std::vector<std::string> subgroup_keys,
                          const GamConfig& cfg, std::size_t threshold);

struct EbmVarExplanation {
    std::vector<double> predictions;
    std::vector<double> intercepts;
    std::vector<std::vector<Contribution>> contributions;
};

// Combined predictions and feature-wise summed contributions per row.
EbmVarExplanation explain_ebm_var(const DesignMatrix& x, std::span<const std::string> subgroup_of_row,
                                  const EbmVarModel& model);

}  // namespace fuelrec
