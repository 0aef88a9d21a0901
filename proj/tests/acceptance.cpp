// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fuelrec/anomaly.hpp"
#include "fuelrec/explain.hpp"
#include "fuelrec/metrics.hpp"
#include "fuelrec/pipeline.hpp"
#include "fuelrec/recommend.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fuelrec;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string name;
    bool ok = true;
    std::vector<std::string> notes;

    void check(bool cond, const std::string& what) {
        ok = ok && cond;
        notes.push_back(std::string(cond ? "ok   " : "MISS ") + what);
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) {
            std::ifstream in(e.path(), std::ios::binary);
            std::ostringstream s;
            s << in.rdbuf();
            out[fs::relative(e.path(), root).string()] = s.str();
        }
    return out;
}

Far one_key(const std::vector<double>& fuel) {
    Far far;
    far.features = {"x"};
    for (std::size_t i = 0; i < fuel.size(); ++i)
        far.rows.push_back(fuelrec::testing::far_row("v" + std::to_string(i), "2023-01-01", "g", RouteType::city, fuel[i], {0.0}));
    return far;
}

void oracle_suites(Criterion& c) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(1, 50), kind(0, 2);
    std::size_t bad = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> v(len(rng));
        const int k = kind(rng);
        for (auto& x : v) {
            if (k == 0) x = std::uniform_int_distribution<int>(1, 6)(rng);
            else if (k == 1) x = std::lognormal_distribution<double>(1.8, 0.4)(rng);
            else x = std::normal_distribution<double>(7, 1)(rng) + (std::uniform_real_distribution<double>()(rng) < 0.1 ? 15 : 0);
        }
        const auto b = boxplot_limits(v);
        const auto f = oracle::fence(v);
        const auto r = detect_anomalies(one_key(v));
        const auto want = oracle::two_pass(v, 8).first;
        bad += b.lim_inf != f.lo || b.lim_sup != f.hi || r.labeled.labels != want;
    }
    c.check(bad == 0, "boxplot/detect vs two-pass oracle, 1000 arrays, mismatches " + std::to_string(bad));

    std::uniform_int_distribution<int> plen(1, 20), small(0, 6);
    std::uniform_real_distribution<double> U(-1, 1);
    bad = 0;
    for (int t = 0; t < 500; ++t) {
        std::vector<ValueRelevance> p(plen(rng));
        for (auto& x : p) {
            x.first = small(rng);
            x.second = t % 3 == 0 ? small(rng) * 0.25 : U(rng);
        }
        for (bool dec : {false, true}) {
            const auto got = monotone_pairs(p, dec);
            bad += got != oracle::monotone(p, dec) || monotone_pairs(got, dec) != got;
        }
    }
    c.check(bad == 0, "monotone filter vs hand re-implementation, 500 sets x 2 directions, mismatches " + std::to_string(bad));

    const auto kw = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
    c.check(std::abs(kw.h - 3.857) <= 0.001, fmt("Kruskal-Wallis H([1,2,3],[4,5,6]) = %.6f", kw.h));

    std::size_t rejections = 0;
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        std::mt19937_64 g(seed);
        std::normal_distribution<double> N(0, 1);
        std::vector<std::vector<double>> groups(3, std::vector<double>(100));
        for (auto& v : groups)
            for (auto& x : v) x = N(g);
        rejections += kruskal_wallis(groups).p_value < 0.05;
    }
    const double alpha = rejections / 1000.0;
    c.check(std::abs(alpha - 0.05) <= 0.02, fmt("Kruskal-Wallis type-I error over 1000 seeds = %.3f", alpha));
}

// Random rows around the observed feature ranges, including values outside them.
void additivity(Criterion& c, const PipelineConfig& cfg) {
    const PipelinePaths p(cfg.output_dir);
    const auto lfar = read_far(p.file("far_labeled.csv"));
    std::mt19937_64 rng(99);
    for (auto mode : cfg.modes) {
        const auto model = FuelModel::load(p.mode_file(mode, "model.json"));
        const RowEncoder enc(lfar.far, model.feature_order());
        std::uniform_int_distribution<std::size_t> pick(0, lfar.far.rows.size() - 1);
        std::uniform_real_distribution<double> scale(-0.5, 2.5);
        double worst = 0.0;
        for (int t = 0; t < 10000; ++t) {
            auto row = lfar.far.rows[pick(rng)];
            for (auto& v : row.values) v *= scale(rng);
            row.vehicle_group = lfar.far.rows[pick(rng)].vehicle_group;
            const auto x = enc.encode(row);
            const auto sub = model.subgroup_of(row);
            double s = model.intercept(sub);
            for (const auto& ct : model.contributions(sub, x)) s += ct.relevance;
            const double y = model.predict(sub, x);
            worst = std::max(worst, std::abs(s - y) / std::max(1.0, std::abs(y)));
        }
        c.check(worst <= 1e-12, std::string(to_string(mode)) + fmt(" additivity on 1e4 random rows, worst rel error %.3g", worst));
    }
}

// Substitute every recommended feature by its reference and re-predict.
void consistency(Criterion& c, const PipelineConfig& cfg) {
    const PipelinePaths p(cfg.output_dir);
    const auto lfar = read_far(p.file("far_labeled.csv"));
    const auto registry = load_registry(std::nullopt);
    const auto inlier = medians_from_text(read_data_lines(p.file("inlier_medians.csv")));
    const auto limits = AnomalyLimitTable::from_text(read_data_lines(p.file("limits.csv")));
    std::map<std::pair<std::string, std::string>, std::size_t> where;
    for (std::size_t i = 0; i < lfar.far.rows.size(); ++i)
        where[{lfar.far.rows[i].vehicle_id, lfar.far.rows[i].date_tx}] = i;
    for (auto mode : cfg.modes) {
        const auto model = FuelModel::load(p.mode_file(mode, "model.json"));
        const auto raw = explanations_from_text(read_data_lines(p.mode_file(mode, "explanations_raw.csv")));
        const ReferenceTable refs(inlier, registry, model);
        const auto recs = get_recom(raw, refs, registry, limits);
        const RowEncoder enc(lfar.far, model.feature_order());
        std::map<std::pair<std::string, std::string>, std::vector<const RecommendationRow*>> by_day;
        for (const auto& r : recs.rows) by_day[{r.vehicle_id, r.date_tx}].push_back(&r);
        double worst = 0.0;
        for (const auto& [key, rows] : by_day) {
            auto row = lfar.far.rows.at(where.at(key));
            double sum = 0.0;
            for (const auto* r : rows) {
                row.values[lfar.far.require_column(r->feature)] = r->reference_value;
                sum += r->delta;
            }
            const double direct = model.predict(model.subgroup_of(row), enc.encode(row));
            worst = std::max(worst, std::abs(direct - (rows.front()->y_pred - sum)));
        }
        c.check(!by_day.empty() && worst <= 1e-9,
                std::string(to_string(mode)) + " recommendation identity over " + std::to_string(by_day.size()) +
                    fmt(" vehicle-dates, worst abs error %.3g", worst));
    }
}

void model_quality(Criterion& c, const Evaluation& ev, double seconds) {
    c.check(seconds < 120.0, fmt("synth + run-all wall time %.1f s", seconds));
    double plain = NAN, ebm = NAN;
    for (const auto& m : ev.modes) {
        const std::string name(to_string(m.mode));
        c.check(m.test_mape < 0.10, name + fmt(" held-out MAPE %.4f", m.test_mape));
        c.check(m.test_adj_r2 > 0.67, name + fmt(" held-out adjusted R2 %.4f", m.test_adj_r2));
        if (m.mode == ModelMode::plain) plain = m.test_mape;
        if (m.mode == ModelMode::ebm_var) ebm = m.test_mape;
    }
    c.check(ev.modes.size() == 3, std::to_string(ev.modes.size()) + " modes evaluated");
    c.check(ebm <= plain, fmt("ebm_var MAPE %.4f <= plain MAPE %.4f", ebm, plain));
}

void xai(Criterion& c, const Evaluation& ev, const PipelineConfig& cfg) {
    const auto registry = load_registry(std::nullopt);
    const auto lfar = read_far(PipelinePaths(cfg.output_dir).file("far_labeled.csv"));
    for (const auto& m : ev.modes) {
        const std::string name(to_string(m.mode));
        if (m.mode == ModelMode::monotone) {
            const auto model = FuelModel::load(PipelinePaths(cfg.output_dir).mode_file(m.mode, "model.json"));
            const auto constrained = default_monotone_map(registry, model.feature_order());
            std::size_t n = 0;
            for (const auto& [f, dir] : constrained) {
                if (dir == Monotone::none || !m.per_mon.count(f)) continue;
                ++n;
                c.check(m.per_mon.at(f) == 1.0, name + " per_mon " + f + fmt(" = %.4f", m.per_mon.at(f)));
            }
            c.check(n > 0, name + " has " + std::to_string(n) + " constrained features with explanations");
        }
        if (m.mode == ModelMode::plain) {
            const double v = m.per_mon.count("duration_raining") ? m.per_mon.at("duration_raining") : NAN;
            c.check(v > 0.0 && v < 1.0, name + fmt(" per_mon duration_raining = %.4f", v));
        }
        c.check(m.per_below_mean >= 0.70, name + fmt(" per_below %.4f", m.per_below_mean));
        c.check(m.per_var_mean >= 0.2 && m.per_var_mean <= 0.5, name + fmt(" mean per_var %.4f", m.per_var_mean));
        const double below = m.catalog ? m.catalog->pct_below_catalog : NAN;
        c.check(below <= 0.05, name + fmt(" pct_below_catalog %.4f", below));
    }
}

void detection(Criterion& c, const PipelineConfig& cfg, const std::string& oracle_path) {
    const auto lfar = read_far(PipelinePaths(cfg.output_dir).file("far_labeled.csv"));
    std::map<std::pair<std::string, std::string>, OracleRow> truth;
    for (auto& r : oracle_from_text(read_data_lines(oracle_path))) truth[{r.vehicle_id, r.date_tx}] = r;
    std::size_t big = 0, big_found = 0, flagged = 0, flagged_true = 0;
    for (std::size_t i = 0; i < lfar.far.rows.size(); ++i) {
        const auto& row = lfar.far.rows[i];
        const auto& t = truth.at({row.vehicle_id, row.date_tx});
        const bool flag = lfar.labels[i] == Label::outlier_high || lfar.labels[i] == Label::removed_data_quality;
        if (t.anomaly && t.magnitude >= 3.0) {
            ++big;
            big_found += flag;
        }
        flagged += flag;
        flagged_true += flag && t.anomaly;
    }
    const double recall = big ? static_cast<double>(big_found) / big : NAN;
    const double precision = flagged ? static_cast<double>(flagged_true) / flagged : NAN;
    c.check(recall >= 0.8, fmt("recall %.4f", recall) + " over " + std::to_string(big) + " anomalies of magnitude >= 3 IQR");
    c.check(precision >= 0.6, fmt("precision %.4f", precision) + " over " + std::to_string(flagged) + " flagged vehicle-days");
}

}  // namespace

int main() {
    fuelrec::testing::TempDir dir("acceptance");
    std::vector<Criterion> crit{{"1 oracle equivalences"},
                                {"2 synthetic fleet model quality"},
                                {"3 XAI metrics on the calibrated fleet"},
                                {"4 anomaly detection calibration"},
                                {"5 determinism"}};
    try {
        oracle_suites(crit[0]);

        const auto t0 = std::chrono::steady_clock::now();
        const auto sc = SynthConfig::defaults();
        stage_synth(sc, dir.file("syn"));
        PipelineConfig cfg;
        cfg.input_path = dir.file("syn/raw.csv");
        cfg.vin_table_path = dir.file("syn/vin_table.csv");
        cfg.catalog_path = dir.file("syn/catalog.csv");
        cfg.output_dir = dir.file("a");
        cfg.validate();
        run_all(cfg);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        additivity(crit[0], cfg);
        consistency(crit[0], cfg);

        const auto ev = evaluate(cfg);
        model_quality(crit[1], ev, seconds);
        xai(crit[2], ev, cfg);
        detection(crit[3], cfg, dir.file("syn/oracle.csv"));

        auto again = cfg;
        again.output_dir = dir.file("b");
        run_all(again);
        const auto a = tree(cfg.output_dir), b = tree(again.output_dir);
        std::size_t differ = 0;
        for (const auto& [name, text] : a) differ += !b.count(name) || b.at(name) != text;
        crit[4].check(a.size() == b.size() && differ == 0,
                      std::to_string(a.size()) + " output files compared, " + std::to_string(differ) + " differ");
    } catch (const std::exception& e) {
        for (auto& c : crit)
            if (c.notes.empty()) c.check(false, std::string("aborted: ") + e.what());
    }

    int failed = 0;
    for (const auto& c : crit) {
        std::printf("%s  %s\n", c.ok ? "PASS" : "FAIL", c.name.c_str());
        for (const auto& n : c.notes) std::printf("      %s\n", n.c_str());
        failed += !c.ok;
    }
    return failed;
}
