#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fuelrec {

enum class Monotone { none, increasing, decreasing };
std::string_view to_string(Monotone m) noexcept;
Monotone parse_monotone(std::string_view s);

// Dense row-major feature matrix with named columns.
struct DesignMatrix {
    std::vector<std::string> columns;
    std::size_t n_rows = 0;
    std::vector<double> data;

    double at(std::size_t row, std::size_t col) const { return data[row * columns.size() + col]; }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * columns.size(), columns.size()};
    }
    std::vector<double> column(std::size_t col) const;
    void push_row(std::span<const double> values);
};

// Piecewise-constant shape function over k bins ([e0,e1), [e1,e2), ..., [e_{k-1}, e_k]).
// Values below e0 use bin 0 and values above e_k use bin k-1.
struct ShapeFunction {
    std::string feature;
    std::vector<double> bin_edges;    // k + 1, strictly ascending
    std::vector<double> bin_values;   // k
    std::vector<double> bin_weights;  // training row count per bin
    Monotone monotone = Monotone::none;

    std::size_t bin_of(double x) const noexcept;
    double lookup(double x) const noexcept { return bin_values[bin_of(x)]; }
};

// Quantile-based edges with duplicates collapsed; a column with c <= max_bins
// distinct values gets exactly c bins, split at midpoints between neighbours.
std::vector<double> bin_edges(std::span<const double> values, std::size_t max_bins);
std::vector<std::vector<double>> bin_features(const DesignMatrix& x, std::size_t max_bins);

// Weighted isotonic projection (pool adjacent violators). Minimises the weighted
// squared change subject to the shape's declared direction.
std::vector<double> isotonic_projection(std::span<const double> values, std::span<const double> weights,
                                        bool increasing);
ShapeFunction apply_monotone_constraint(const ShapeFunction& shape, std::span<const double> weights);

struct GamConfig {
    std::size_t max_bins = 256;
    double learning_rate = 0.05;
    std::size_t rounds = 500;
    std::size_t early_stopping_patience = 25;  // 0 disables the validation holdout
    double validation_fraction = 0.15;
    std::size_t inner_bags = 0;  // 0 = off; otherwise shapes are averaged over bags
    std::uint64_t seed = 7;
    std::map<std::string, Monotone> monotone;
};

struct TrainingMeta {
    std::size_t max_bins = 0;
    double learning_rate = 0.0;
    std::size_t rounds_max = 0;
    std::size_t rounds_run = 0;
    std::size_t early_stopping_patience = 0;
    double validation_fraction = 0.0;
    std::size_t inner_bags = 0;
    std::uint64_t seed = 0;
    std::size_t n_rows = 0;
    std::string data_hash;
    std::string registry_hash;
};

struct Contribution {
    std::string feature;
    double value = 0.0;
    double relevance = 0.0;
};

class GamModel {
public:
    double intercept = 0.0;
    std::vector<std::string> feature_order;
    std::vector<ShapeFunction> shapes;  // aligned with feature_order
    TrainingMeta meta;

    // `x` is aligned with feature_order.
    double predict(std::span<const double> x) const;
    double term(std::size_t feature, double value) const { return shapes[feature].lookup(value); }
    std::vector<Contribution> contributions(std::span<const double> x) const;
    std::size_t feature_index(std::string_view name) const;

    nlohmann::json to_json() const;
    static GamModel from_json(const nlohmann::json& j);
    std::string serialize() const;
    static GamModel deserialize(std::string_view text);
};

// Cyclic (round-robin) gradient boosting of per-bin residual means. Throws
// DataError on non-finite inputs or fewer than two rows.
GamModel train_gam(const DesignMatrix& x, std::span<const double> y, const GamConfig& cfg);

std::string hash_training_data(const DesignMatrix& x, std::span<const double> y);

}  // namespace fuelrec
