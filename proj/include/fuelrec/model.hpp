#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fuelrec/ebm_var.hpp"
#include "fuelrec/far.hpp"
#include "fuelrec/feature_registry.hpp"
#include "fuelrec/gam.hpp"

namespace fuelrec {

enum class ModelMode { plain, monotone, ebm_var };
std::string_view to_string(ModelMode m) noexcept;
ModelMode parse_model_mode(std::string_view s);

// One-hot columns are named `<categorical>=<level>`.
bool is_one_hot(std::string_view column) noexcept;
std::string one_hot_name(std::string_view categorical, std::string_view level);

// Model input columns: the FAR's numeric features in FAR order, then one-hot
// vehicle_group levels, then one-hot route_type levels, each in lexical order.
std::vector<std::string> design_columns(const Far& far, const std::vector<bool>& include = {});

// Maps FAR rows onto a fixed model column list.
class RowEncoder {
public:
    RowEncoder(const Far& far, std::vector<std::string> model_columns);

    std::vector<double> encode(const FarRow& row) const;
    const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
    enum class Kind { numeric, group_level, route_level };
    struct Slot {
        Kind kind;
        std::size_t far_col = 0;
        std::string level;
    };
    std::vector<std::string> columns_;
    std::vector<Slot> slots_;
};

DesignMatrix build_design(const Far& far, const std::vector<std::string>& columns, const std::vector<bool>& include = {});

// Key of a row for the given subgroup columns (vehicle_group / route_type), `|`-joined.
std::string subgroup_key(const FarRow& row, const std::vector<std::string>& keys);

// Any of the three trained model kinds behind one additive interface. For
// plain and monotone models the subgroup argument is ignored.
class FuelModel {
public:
    FuelModel() = default;
    FuelModel(ModelMode mode, GamModel gam) : mode_(mode), model_(std::move(gam)) {}
    explicit FuelModel(EbmVarModel m) : mode_(ModelMode::ebm_var), model_(std::move(m)) {}

    ModelMode mode() const noexcept { return mode_; }
    const GamModel& base() const;
    const EbmVarModel* ebm_var() const noexcept { return std::get_if<EbmVarModel>(&model_); }
    const std::vector<std::string>& feature_order() const { return base().feature_order; }

    std::string subgroup_of(const FarRow& row) const;
    double intercept(const std::string& subgroup) const;
    double term(const std::string& subgroup, std::size_t feature, double value) const;
    double predict(const std::string& subgroup, std::span<const double> x) const;
    std::vector<Contribution> contributions(const std::string& subgroup, std::span<const double> x) const;

    std::string serialize() const;
    static FuelModel deserialize(std::string_view text);
    static FuelModel load(const std::string& path);

private:
    ModelMode mode_ = ModelMode::plain;
    std::variant<GamModel, EbmVarModel> model_;
};

struct TrainOptions {
    ModelMode mode = ModelMode::plain;
    GamConfig gam;
    std::size_t th_ebm_var = 100;
    std::vector<std::string> subgroup_keys = {"vehicle_group"};
    // Explicit constraints; in monotone mode every unlisted numeric feature with a
    // registry direction is constrained along it.
    std::map<std::string, Monotone> monotone;
};

std::map<std::string, Monotone> default_monotone_map(const FeatureRegistry& registry,
                                                     const std::vector<std::string>& columns);

FuelModel train_fuel_model(const Far& far, const std::vector<bool>& include, const FeatureRegistry& registry,
                           const TrainOptions& opts);

}  // namespace fuelrec
