#include "fuelrec/gam.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "fuelrec/common.hpp"

namespace fuelrec {

namespace {

constexpr int kGamSchemaVersion = 1;
constexpr std::string_view kGamSchema = "fuelrec.gam";

// Zero-count bins still need a positive weight in the projection.
constexpr double kEmptyBinWeight = 1e-9;

struct BinnedColumn {
    std::vector<std::uint32_t> bin;  // per row
    std::size_t n_bins = 0;
};

}  // namespace

std::string_view to_string(Monotone m) noexcept {
    switch (m) {
        case Monotone::none: return "none";
        case Monotone::increasing: return "increasing";
        case Monotone::decreasing: return "decreasing";
    }
    return "none";
}

Monotone parse_monotone(std::string_view s) {
    if (s == "none") return Monotone::none;
    if (s == "increasing") return Monotone::increasing;
    if (s == "decreasing") return Monotone::decreasing;
    throw ConfigError("unknown monotone direction '" + std::string(s) + "'");
}

std::vector<double> DesignMatrix::column(std::size_t col) const {
    std::vector<double> out(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) out[i] = at(i, col);
    return out;
}

void DesignMatrix::push_row(std::span<const double> values) {
    if (values.size() != columns.size()) throw DataError("design row width mismatch");
    data.insert(data.end(), values.begin(), values.end());
    ++n_rows;
}

std::size_t ShapeFunction::bin_of(double x) const noexcept {
    // Interior edges e1..e_{k-1}; the outer edges only document the training range.
    const auto first = bin_edges.begin() + 1;
    const auto last = bin_edges.end() - 1;
    return static_cast<std::size_t>(std::upper_bound(first, last, x) - first);
}

std::vector<double> bin_edges(std::span<const double> values, std::size_t max_bins) {
    if (values.empty()) throw DataError("cannot bin an empty column");
    if (max_bins < 2) throw ConfigError("max_bins must be at least 2");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    if (distinct.size() == 1) return {distinct[0] - 0.5, distinct[0] + 0.5};
    std::vector<double> edges;
    if (distinct.size() <= max_bins) {
        edges.push_back(distinct.front());
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i) edges.push_back(0.5 * (distinct[i] + distinct[i + 1]));
        edges.push_back(distinct.back());
        return edges;
    }
    edges.push_back(sorted.front());
    for (std::size_t i = 1; i < max_bins; ++i) {
        const double q = quantile_sorted(sorted, static_cast<double>(i) / static_cast<double>(max_bins));
        if (q > edges.back() && q < sorted.back()) edges.push_back(q);
    }
    edges.push_back(sorted.back());
    return edges;
}

std::vector<std::vector<double>> bin_features(const DesignMatrix& x, std::size_t max_bins) {
    if (x.n_rows == 0) throw DataError("cannot bin an empty matrix");
    std::vector<std::vector<double>> out;
    out.reserve(x.columns.size());
    for (std::size_t j = 0; j < x.columns.size(); ++j) out.push_back(bin_edges(x.column(j), max_bins));
    return out;
}

std::vector<double> isotonic_projection(std::span<const double> values, std::span<const double> weights,
                                        bool increasing) {
    if (values.size() != weights.size()) throw DataError("isotonic projection: weights/values length mismatch");
    struct Block {
        double value;
        double weight;
        std::size_t len;
    };
    const double sign = increasing ? 1.0 : -1.0;
    std::vector<Block> blocks;
    blocks.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(weights[i] > 0.0)) throw DataError("isotonic projection needs positive weights");
        blocks.push_back({sign * values[i], weights[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
            const Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            const double w = a.weight + b.weight;
            a.value = (a.value * a.weight + b.value * b.weight) / w;
            a.weight = w;
            a.len += b.len;
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& b : blocks) out.insert(out.end(), b.len, sign * b.value);
    return out;
}

ShapeFunction apply_monotone_constraint(const ShapeFunction& shape, std::span<const double> weights) {
    if (weights.size() != shape.bin_values.size()) throw DataError("monotone constraint: one weight per bin required");
    ShapeFunction out = shape;
    if (shape.monotone == Monotone::none) return out;
    out.bin_values = isotonic_projection(shape.bin_values, weights, shape.monotone == Monotone::increasing);
    return out;
}

double GamModel::predict(std::span<const double> x) const {
    if (x.size() != shapes.size())
        throw DataError("predict: expected " + std::to_string(shapes.size()) + " features, got " +
                        std::to_string(x.size()));
    double y = intercept;
    for (std::size_t j = 0; j < shapes.size(); ++j) y += shapes[j].lookup(x[j]);
    return y;
}

std::vector<Contribution> GamModel::contributions(std::span<const double> x) const {
    if (x.size() != shapes.size())
        throw DataError("contributions: expected " + std::to_string(shapes.size()) + " features, got " +
                        std::to_string(x.size()));
    std::vector<Contribution> out;
    out.reserve(shapes.size());
    for (std::size_t j = 0; j < shapes.size(); ++j) out.push_back({feature_order[j], x[j], shapes[j].lookup(x[j])});
    return out;
}

std::size_t GamModel::feature_index(std::string_view name) const {
    for (std::size_t j = 0; j < feature_order.size(); ++j)
        if (feature_order[j] == name) return j;
    throw DataError("model has no feature '" + std::string(name) + "'");
}

nlohmann::json GamModel::to_json() const {
    nlohmann::json j;
    j["schema"] = kGamSchema;
    j["version"] = kGamSchemaVersion;
    j["intercept"] = intercept;
    j["feature_order"] = feature_order;
    auto& sh = j["shapes"] = nlohmann::json::array();
    for (const auto& s : shapes)
        sh.push_back({{"feature", s.feature},
                      {"monotone", to_string(s.monotone)},
                      {"bin_edges", s.bin_edges},
                      {"bin_values", s.bin_values},
                      {"bin_weights", s.bin_weights}});
    j["meta"] = {{"max_bins", meta.max_bins},
                 {"learning_rate", meta.learning_rate},
                 {"rounds_max", meta.rounds_max},
                 {"rounds_run", meta.rounds_run},
                 {"early_stopping_patience", meta.early_stopping_patience},
                 {"validation_fraction", meta.validation_fraction},
                 {"inner_bags", meta.inner_bags},
                 {"seed", meta.seed},
                 {"n_rows", meta.n_rows},
                 {"data_hash", meta.data_hash},
                 {"registry_hash", meta.registry_hash}};
    return j;
}

GamModel GamModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != kGamSchema) throw ModelFormatError("not a GAM model file");
        const int version = j.at("version").get<int>();
        if (version != kGamSchemaVersion)
            throw ModelFormatError("unsupported GAM model version " + std::to_string(version) + " (expected " +
                                   std::to_string(kGamSchemaVersion) + ")");
        GamModel m;
        m.intercept = j.at("intercept").get<double>();
        m.feature_order = j.at("feature_order").get<std::vector<std::string>>();
        for (const auto& s : j.at("shapes")) {
            ShapeFunction f;
            f.feature = s.at("feature").get<std::string>();
            f.monotone = parse_monotone(s.at("monotone").get<std::string>());
            f.bin_edges = s.at("bin_edges").get<std::vector<double>>();
            f.bin_values = s.at("bin_values").get<std::vector<double>>();
            f.bin_weights = s.at("bin_weights").get<std::vector<double>>();
            if (f.bin_edges.size() != f.bin_values.size() + 1 || f.bin_values.empty() ||
                f.bin_weights.size() != f.bin_values.size())
                throw ModelFormatError("shape '" + f.feature + "' has inconsistent bin arrays");
            m.shapes.push_back(std::move(f));
        }
        if (m.shapes.size() != m.feature_order.size()) throw ModelFormatError("shape count differs from feature_order");
        for (std::size_t i = 0; i < m.shapes.size(); ++i)
            if (m.shapes[i].feature != m.feature_order[i]) throw ModelFormatError("shape order differs from feature_order");
        const auto& mj = j.at("meta");
        m.meta.max_bins = mj.at("max_bins").get<std::size_t>();
        m.meta.learning_rate = mj.at("learning_rate").get<double>();
        m.meta.rounds_max = mj.at("rounds_max").get<std::size_t>();
        m.meta.rounds_run = mj.at("rounds_run").get<std::size_t>();
        m.meta.early_stopping_patience = mj.at("early_stopping_patience").get<std::size_t>();
        m.meta.validation_fraction = mj.at("validation_fraction").get<double>();
        m.meta.inner_bags = mj.at("inner_bags").get<std::size_t>();
        m.meta.seed = mj.at("seed").get<std::uint64_t>();
        m.meta.n_rows = mj.at("n_rows").get<std::size_t>();
        m.meta.data_hash = mj.at("data_hash").get<std::string>();
        m.meta.registry_hash = mj.at("registry_hash").get<std::string>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("malformed GAM model: ") + e.what());
    }
}

std::string GamModel::serialize() const { return to_json().dump(1) + "\n"; }

GamModel GamModel::deserialize(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("cannot parse model file: ") + e.what());
    }
    return from_json(j);
}

std::string hash_training_data(const DesignMatrix& x, std::span<const double> y) {
    std::uint64_t h = fnv1a64("");
    for (const auto& c : x.columns) h = fnv1a64(c, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(x.data.data()), x.data.size() * sizeof(double)), h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(y.data()), y.size() * sizeof(double)), h);
    return hex64(h);
}

namespace {

struct FitResult {
    double intercept = 0.0;
    std::vector<std::vector<double>> values;  // per feature, per bin
    std::size_t rounds_run = 0;
};

FitResult fit_once(const std::vector<BinnedColumn>& cols, std::span<const double> y, const GamConfig& cfg,
                   const std::vector<Monotone>& mono, std::uint64_t seed) {
    const std::size_t n = y.size();
    const std::size_t nf = cols.size();

    std::vector<std::uint8_t> is_fit(n, 1);
    bool use_validation = cfg.early_stopping_patience > 0 && cfg.validation_fraction > 0.0;
    if (use_validation) {
        std::size_t n_val = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (unit_hash(seed, i) < cfg.validation_fraction) {
                is_fit[i] = 0;
                ++n_val;
            }
        if (n_val == 0 || n_val == n) {
            std::fill(is_fit.begin(), is_fit.end(), 1);
            use_validation = false;
        }
    }

    FitResult fr;
    double sum_y = 0.0;
    std::size_t n_fit = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (is_fit[i]) {
            sum_y += y[i];
            ++n_fit;
        }
    fr.intercept = sum_y / static_cast<double>(n_fit);

    std::vector<std::vector<double>> counts(nf);
    fr.values.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        counts[f].assign(cols[f].n_bins, 0.0);
        fr.values[f].assign(cols[f].n_bins, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (is_fit[i]) counts[f][cols[f].bin[i]] += 1.0;
    }

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - fr.intercept;

    const bool any_mono = std::any_of(mono.begin(), mono.end(), [](Monotone m) { return m != Monotone::none; });
    auto val_rmse = [&] {
        double ss = 0.0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (!is_fit[i]) {
                ss += resid[i] * resid[i];
                ++k;
            }
        return std::sqrt(ss / static_cast<double>(k));
    };

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_values = fr.values;
    std::size_t best_round = 0;
    std::size_t since_best = 0;
    std::vector<double> sums, update;

    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        for (std::size_t f = 0; f < nf; ++f) {
            const auto& bins = cols[f].bin;
            sums.assign(cols[f].n_bins, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (is_fit[i]) sums[bins[i]] += resid[i];
            update.assign(cols[f].n_bins, 0.0);
            for (std::size_t b = 0; b < update.size(); ++b)
                if (counts[f][b] > 0.0) update[b] = cfg.learning_rate * sums[b] / counts[f][b];
            for (std::size_t b = 0; b < update.size(); ++b) fr.values[f][b] += update[b];
            for (std::size_t i = 0; i < n; ++i) resid[i] -= update[bins[i]];
        }
        if (any_mono) {
            for (std::size_t f = 0; f < nf; ++f) {
                if (mono[f] == Monotone::none) continue;
                std::vector<double> w = counts[f];
                for (auto& v : w) v = std::max(v, kEmptyBinWeight);
                fr.values[f] = isotonic_projection(fr.values[f], w, mono[f] == Monotone::increasing);
            }
            for (std::size_t i = 0; i < n; ++i) {
                double p = fr.intercept;
                for (std::size_t f = 0; f < nf; ++f) p += fr.values[f][cols[f].bin[i]];
                resid[i] = y[i] - p;
            }
        }
        fr.rounds_run = round;
        if (use_validation) {
            const double rmse = val_rmse();
            if (rmse < best) {
                best = rmse;
                best_values = fr.values;
                best_round = round;
                since_best = 0;
            } else if (++since_best >= cfg.early_stopping_patience) {
                break;
            }
        }
    }
    if (use_validation && best_round > 0) {
        fr.values = std::move(best_values);
        fr.rounds_run = best_round;
    }
    return fr;
}

}  // namespace

GamModel train_gam(const DesignMatrix& x, std::span<const double> y, const GamConfig& cfg) {
    if (x.n_rows != y.size()) throw DataError("train_gam: X and y row counts differ");
    if (x.n_rows < 2) throw DataError("train_gam needs at least two rows");
    if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    for (double v : x.data)
        if (!std::isfinite(v)) throw DataError("train_gam: non-finite value in X");
    for (double v : y)
        if (!std::isfinite(v)) throw DataError("train_gam: non-finite value in y");
    for (const auto& [name, m] : cfg.monotone)
        if (std::find(x.columns.begin(), x.columns.end(), name) == x.columns.end())
            throw ConfigError("monotone constraint for unknown feature '" + name + "'");

    const std::size_t nf = x.columns.size();
    GamModel model;
    model.feature_order = x.columns;
    model.shapes.resize(nf);
    std::vector<BinnedColumn> cols(nf);
    std::vector<Monotone> mono(nf, Monotone::none);
    for (std::size_t f = 0; f < nf; ++f) {
        auto& s = model.shapes[f];
        s.feature = x.columns[f];
        s.bin_edges = bin_edges(x.column(f), cfg.max_bins);
        const auto it = cfg.monotone.find(s.feature);
        if (it != cfg.monotone.end()) s.monotone = mono[f] = it->second;
        cols[f].n_bins = s.bin_edges.size() - 1;
        cols[f].bin.resize(x.n_rows);
        s.bin_weights.assign(cols[f].n_bins, 0.0);
        for (std::size_t i = 0; i < x.n_rows; ++i) {
            cols[f].bin[i] = static_cast<std::uint32_t>(s.bin_of(x.at(i, f)));
            s.bin_weights[cols[f].bin[i]] += 1.0;
        }
        s.bin_values.assign(cols[f].n_bins, 0.0);
    }

    const std::size_t n_bags = std::max<std::size_t>(1, cfg.inner_bags);
    std::size_t rounds_run = 0;
    for (std::size_t b = 0; b < n_bags; ++b) {
        const auto fr = fit_once(cols, y, cfg, mono, cfg.seed + b);
        model.intercept += fr.intercept / static_cast<double>(n_bags);
        for (std::size_t f = 0; f < nf; ++f)
            for (std::size_t k = 0; k < fr.values[f].size(); ++k)
                model.shapes[f].bin_values[k] += fr.values[f][k] / static_cast<double>(n_bags);
        rounds_run = std::max(rounds_run, fr.rounds_run);
    }

    // Centre every shape on its training rows; the offset moves into the intercept.
    for (auto& s : model.shapes) {
        double total = 0.0, wsum = 0.0;
        for (std::size_t k = 0; k < s.bin_values.size(); ++k) {
            total += s.bin_values[k] * s.bin_weights[k];
            wsum += s.bin_weights[k];
        }
        const double m = total / wsum;
        for (auto& v : s.bin_values) v -= m;
        model.intercept += m;
    }

    model.meta.max_bins = cfg.max_bins;
    model.meta.learning_rate = cfg.learning_rate;
    model.meta.rounds_max = cfg.rounds;
    model.meta.rounds_run = rounds_run;
    model.meta.early_stopping_patience = cfg.early_stopping_patience;
    model.meta.validation_fraction = cfg.validation_fraction;
    model.meta.inner_bags = cfg.inner_bags;
    model.meta.seed = cfg.seed;
    model.meta.n_rows = x.n_rows;
    model.meta.data_hash = hash_training_data(x, y);
    return model;
}

}  // namespace fuelrec
