#include <doctest.h>

#include <algorithm>
#include <random>

#include "fuelrec/anomaly.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fuelrec;
using fuelrec::testing::far_row;

namespace {

Far one_key(const std::vector<double>& fuel) {
    Far far;
    far.features = {"x"};
    for (std::size_t i = 0; i < fuel.size(); ++i)
        far.rows.push_back(far_row("v" + std::to_string(i), "2023-01-01", "g", RouteType::city, fuel[i], {0.0}));
    return far;
}

}  // namespace

TEST_CASE("boxplot_limits examples") {
    auto b = boxplot_limits(std::vector<double>{1, 2, 3, 4});
    CHECK(b.q1 == 1.75);
    CHECK(b.q3 == 3.25);
    CHECK(b.lim_inf == -0.5);
    CHECK(b.lim_sup == 5.5);
    b = boxplot_limits(std::vector<double>{5, 5, 5, 5});
    CHECK(b.lim_inf == 5.0);
    CHECK(b.lim_sup == 5.0);
    b = boxplot_limits(std::vector<double>{7});
    CHECK(b.q1 == 7.0);
    CHECK(b.q3 == 7.0);
    CHECK(b.lim_sup == 7.0);
    CHECK_THROWS_AS(boxplot_limits(std::vector<double>{}), DataError);
}

TEST_CASE("detect_anomalies examples") {
    auto r = detect_anomalies(one_key({6, 6, 6, 6, 6, 6, 6, 60}));
    CHECK(r.labeled.labels.back() == Label::removed_data_quality);
    for (int i = 0; i < 7; ++i) CHECK(r.labeled.labels[i] == Label::inlier);
    const auto& k = r.limits.keys.at({"g", RouteType::city});
    CHECK(k.limits.lim_inf == 6.0);
    CHECK(k.limits.lim_sup == 6.0);

    r = detect_anomalies(one_key(std::vector<double>(10, 4.2)));
    for (auto l : r.labeled.labels) CHECK(l == Label::inlier);

    // value on the fence stays an inlier: [1..8] gives lim_sup 4.75 + 1.5*3.5 = 10
    r = detect_anomalies(one_key({1, 2, 3, 4, 5, 6, 7, 8, 10}));
    const auto lim = r.limits.keys.at({"g", RouteType::city}).limits;
    for (std::size_t i = 0; i < 9; ++i)
        if (r.labeled.far.rows[i].fuel_consumption == lim.lim_sup) CHECK(r.labeled.labels[i] == Label::inlier);

    r = detect_anomalies(one_key({1, 2, 50}));
    CHECK(r.limits.keys.at({"g", RouteType::city}).insufficient);
    for (auto l : r.labeled.labels) CHECK(l == Label::inlier);
}

TEST_CASE("detect_anomalies matches the brute-force two-pass oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(1, 50), kind(0, 2);
    for (int t = 0; t < 1000; ++t) {
        const int n = len(rng);
        std::vector<double> v(n);
        const int k = kind(rng);
        for (auto& x : v) {
            if (k == 0) x = std::uniform_int_distribution<int>(1, 6)(rng);  // heavy ties
            else if (k == 1) x = std::lognormal_distribution<double>(1.8, 0.4)(rng);
            else x = std::normal_distribution<double>(7, 1)(rng) + (std::uniform_real_distribution<double>()(rng) < 0.1 ? 15 : 0);
        }
        const auto b = boxplot_limits(v);
        const auto f = oracle::fence(v);
        REQUIRE(b.lim_inf == f.lo);
        REQUIRE(b.lim_sup == f.hi);

        const auto r = detect_anomalies(one_key(v));
        const auto [want, f2] = oracle::two_pass(v, 8);
        REQUIRE(r.labeled.labels == want);
        const auto& kl = r.limits.keys.at({"g", RouteType::city});
        if (static_cast<std::size_t>(n) >= 8) {
            REQUIRE(kl.limits.lim_sup == f2.hi);
            REQUIRE(kl.limits.lim_inf == f2.lo);
        }
        // every outlier_high is strictly above the stored fence
        for (int i = 0; i < n; ++i)
            if (r.labeled.labels[i] == Label::outlier_high) REQUIRE(v[i] > kl.limits.lim_sup);
    }
}

TEST_CASE("limits are permutation invariant and keys independent") {
    std::mt19937_64 rng(5);
    std::vector<double> v(40);
    for (auto& x : v) x = std::gamma_distribution<double>(4, 2)(rng);
    const auto a = boxplot_limits(v);
    std::shuffle(v.begin(), v.end(), rng);
    const auto b = boxplot_limits(v);
    CHECK(a.lim_sup == b.lim_sup);
    CHECK(a.lim_inf == b.lim_inf);

    Far far = one_key(v);
    auto other = one_key({1, 1, 1, 1, 1, 1, 1, 1, 99});
    for (auto& r : other.rows) {
        r.vehicle_group = "h";
        far.rows.push_back(r);
    }
    const auto d = detect_anomalies(far);
    CHECK(d.limits.keys.size() == 2);
    CHECK(d.labeled.labels.back() == Label::removed_data_quality);
    const auto alone = detect_anomalies(one_key(v));
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(d.labeled.labels[i] == alone.labeled.labels[i]);
}

TEST_CASE("limit table text round trip") {
    const auto d = detect_anomalies(one_key({3, 4, 5, 6, 7, 8, 9, 10, 30}));
    std::vector<std::string> lines;
    std::string text = d.limits.to_text("");
    for (std::size_t p = 0, q; (q = text.find('\n', p)) != std::string::npos; p = q + 1) lines.push_back(text.substr(p, q - p));
    const auto back = AnomalyLimitTable::from_text(lines);
    const auto& a = d.limits.keys.at({"g", RouteType::city});
    const auto& b = back.keys.at({"g", RouteType::city});
    CHECK(a.limits.lim_sup == b.limits.lim_sup);
    CHECK(a.limits.q1 == b.limits.q1);
    CHECK(a.n_points == b.n_points);
}
