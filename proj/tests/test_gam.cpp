#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fuelrec/common.hpp"
#include "fuelrec/gam.hpp"
#include "support.hpp"

using namespace fuelrec;

namespace {

DesignMatrix matrix(std::vector<std::string> cols, const std::vector<std::vector<double>>& rows) {
    DesignMatrix x;
    x.columns = std::move(cols);
    for (const auto& r : rows) x.push_row(r);
    return x;
}

GamModel hand_model() {
    GamModel m;
    m.intercept = 6.0;
    m.feature_order = {"x"};
    m.shapes = {fuelrec::testing::shape("x", {0, 1, 2}, {-1, 1})};
    return m;
}

GamConfig no_holdout(std::size_t rounds = 500) {
    GamConfig c;
    c.rounds = rounds;
    c.early_stopping_patience = 0;
    return c;
}

}  // namespace

TEST_CASE("bin_edges") {
    CHECK(bin_edges(std::vector<double>{0, 1, 0, 1, 1}, 256).size() == 3);
    CHECK(bin_edges(std::vector<double>{2, 5, 9, 5, 2}, 256).size() == 4);
    std::mt19937_64 rng(1);
    std::vector<double> u(10000);
    for (auto& v : u) v = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto e = bin_edges(u, 4);
    REQUIRE(e.size() == 5);
    const double want[] = {0, 0.25, 0.5, 0.75, 1};
    for (int i = 0; i < 5; ++i) CHECK(std::abs(e[i] - want[i]) < 0.05);
    CHECK(std::is_sorted(e.begin(), e.end()));
    CHECK(std::adjacent_find(e.begin(), e.end()) == e.end());
    CHECK_THROWS_AS(bin_edges(u, 1), ConfigError);
}

TEST_CASE("isotonic projection") {
    const std::vector<double> w3(3, 1.0);
    CHECK(isotonic_projection(std::vector<double>{1, 2, 3}, w3, true) == std::vector<double>{1, 2, 3});
    CHECK(isotonic_projection(std::vector<double>{1, 3, 2}, w3, true) == std::vector<double>{1, 2.5, 2.5});
    CHECK(isotonic_projection(std::vector<double>{3, 1}, std::vector<double>{1, 3}, true) ==
          std::vector<double>{1.5, 1.5});
    CHECK(isotonic_projection(std::vector<double>{1, 3, 2}, w3, false) == std::vector<double>{2, 2, 2});

    // weighted least squares optimality against a brute-force grid on random 3-vectors
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-3, 3), W(0.5, 2);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v{U(rng), U(rng), U(rng)}, w{W(rng), W(rng), W(rng)};
        const auto p = isotonic_projection(v, w, true);
        CHECK(std::is_sorted(p.begin(), p.end()));
        auto cost = [&](const std::vector<double>& q) {
            double s = 0;
            for (int i = 0; i < 3; ++i) s += w[i] * (q[i] - v[i]) * (q[i] - v[i]);
            return s;
        };
        const double best = cost(p);
        for (double a = -3; a <= 3; a += 0.25)
            for (double b = a; b <= 3; b += 0.25)
                for (double c = b; c <= 3; c += 0.25) CHECK(best <= cost({a, b, c}) + 1e-12);
    }
}

TEST_CASE("predict and contributions on a hand-built model") {
    const auto m = hand_model();
    const double x = 1.5;
    CHECK(m.predict(std::span<const double>(&x, 1)) == 7.0);
    const double below = -5;
    CHECK(m.predict(std::span<const double>(&below, 1)) == 5.0);
    const double above = 99;
    CHECK(m.predict(std::span<const double>(&above, 1)) == 7.0);
    const auto c = m.contributions(std::span<const double>(&x, 1));
    REQUIRE(c.size() == 1);
    CHECK(c[0].feature == "x");
    CHECK(c[0].value == 1.5);
    CHECK(c[0].relevance == 1.0);
    const std::vector<double> wrong{1, 2};
    CHECK_THROWS_AS(m.predict(wrong), DataError);
}

TEST_CASE("constant target") {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 50; ++i) {
        rows.push_back({double(i % 7), double(i % 3)});
        y.push_back(4.25);
    }
    const auto m = train_gam(matrix({"a", "b"}, rows), y, GamConfig{});
    CHECK(std::abs(m.intercept - 4.25) < 1e-9);
    for (const auto& s : m.shapes)
        for (double v : s.bin_values) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("single linear feature") {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 1; i <= 100; ++i) {
        rows.push_back({double(i)});
        y.push_back(2.0 * i);
    }
    const auto m = train_gam(matrix({"x"}, rows), y, no_holdout(400));
    const double sd = stddev(y), my = mean(y);
    double worst = 0.0;
    for (int i = 1; i <= 100; ++i) worst = std::max(worst, std::abs(m.term(0, i) - (2.0 * i - my)));
    CHECK(worst < 0.1 * sd);
    CHECK(std::abs(m.intercept - my) < 1e-9);
}

TEST_CASE("shapes are centred and the intercept is the target mean") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N(0, 1);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 600; ++i) {
        const double a = N(rng), b = std::abs(N(rng));
        rows.push_back({a, b, double(i % 2)});
        y.push_back(5 + a * a + 2 * b + (i % 2) + 0.1 * N(rng));
    }
    const auto x = matrix({"a", "b", "c"}, rows);
    const auto m = train_gam(x, y, no_holdout(200));
    CHECK(std::abs(m.intercept - mean(y)) < 1e-9);
    for (const auto& s : m.shapes) {
        double sw = 0, swv = 0;
        for (std::size_t k = 0; k < s.bin_values.size(); ++k) {
            sw += s.bin_weights[k];
            swv += s.bin_weights[k] * s.bin_values[k];
        }
        CHECK(std::abs(swv / sw) < 1e-9);
        CHECK(std::is_sorted(s.bin_edges.begin(), s.bin_edges.end()));
    }
    // additivity, exact
    for (std::size_t r = 0; r < x.n_rows; ++r) {
        const auto row = x.row(r);
        double s = m.intercept;
        for (const auto& c : m.contributions(row)) s += c.relevance;
        CHECK(std::abs(s - m.predict(row)) <= 1e-12 * std::abs(m.predict(row)));
    }
    // one feature's relevance does not depend on another's value
    std::vector<double> p{0.3, 1.0, 0}, q{0.3, 2.5, 1};
    CHECK(m.contributions(p)[0].relevance == m.contributions(q)[0].relevance);
}

TEST_CASE("monotone constraint holds exactly") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N(0, 1.5);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 400; ++i) {
        const double a = std::uniform_real_distribution<double>(0, 10)(rng);
        const double b = std::uniform_real_distribution<double>(0, 10)(rng);
        rows.push_back({a, b});
        y.push_back(a - 0.5 * b + N(rng));
    }
    auto cfg = no_holdout(300);
    cfg.monotone = {{"a", Monotone::increasing}, {"b", Monotone::decreasing}};
    const auto m = train_gam(matrix({"a", "b"}, rows), y, cfg);
    const auto& va = m.shapes[0].bin_values;
    const auto& vb = m.shapes[1].bin_values;
    for (std::size_t k = 1; k < va.size(); ++k) CHECK(va[k] >= va[k - 1]);
    for (std::size_t k = 1; k < vb.size(); ++k) CHECK(vb[k] <= vb[k - 1]);
    CHECK(m.shapes[0].monotone == Monotone::increasing);

    cfg.monotone = {{"zz", Monotone::increasing}};
    CHECK_THROWS_AS(train_gam(matrix({"a", "b"}, rows), y, cfg), ConfigError);
}

TEST_CASE("training input validation") {
    CHECK_THROWS_AS(train_gam(matrix({"a"}, {{1}}), std::vector<double>{1}, GamConfig{}), DataError);
    CHECK_THROWS_AS(train_gam(matrix({"a"}, {{1}, {NAN}}), std::vector<double>{1, 2}, GamConfig{}), DataError);
    CHECK_THROWS_AS(train_gam(matrix({"a"}, {{1}, {2}}), std::vector<double>{1, INFINITY}, GamConfig{}), DataError);
}

TEST_CASE("determinism and serialization") {
    std::mt19937_64 rng(11);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 300; ++i) {
        const double a = std::uniform_real_distribution<double>(0, 5)(rng);
        rows.push_back({a, double(i % 4)});
        y.push_back(std::sin(a) + 0.3 * (i % 4));
    }
    GamConfig cfg;
    cfg.inner_bags = 3;
    const auto x = matrix({"a", "b"}, rows);
    const auto m1 = train_gam(x, y, cfg);
    const auto m2 = train_gam(x, y, cfg);
    CHECK(m1.serialize() == m2.serialize());
    CHECK(m1.meta.data_hash == hash_training_data(x, y));

    const auto back = GamModel::deserialize(m1.serialize());
    for (int t = 0; t < 1000; ++t) {
        const std::vector<double> r{std::uniform_real_distribution<double>(-1, 6)(rng), double(t % 5)};
        REQUIRE(back.predict(r) == m1.predict(r));
    }

    auto j = m1.to_json();
    j["version"] = 999;
    CHECK_THROWS_AS(GamModel::from_json(j), ModelFormatError);
    const auto text = m1.serialize();
    CHECK_THROWS_AS(GamModel::deserialize(text.substr(0, text.size() / 2)), ModelFormatError);
    CHECK_THROWS_AS(GamModel::deserialize("{\"schema\":\"other\"}"), ModelFormatError);
}
