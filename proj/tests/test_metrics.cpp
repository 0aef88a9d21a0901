#include <doctest.h>

#include <cmath>
#include <random>

#include "fuelrec/metrics.hpp"
#include "support.hpp"

#ifdef FUELREC_HAVE_BOOST_MATH
#include <boost/math/special_functions/gamma.hpp>
#endif

using namespace fuelrec;

namespace {

ExplanationRow er(const std::string& v, const std::string& d, const std::string& f, double value, double rel,
                  double y_real, double intercept = 6.0) {
    return {v, d, "g", RouteType::hwy, f, value, rel, 0.0, y_real, intercept};
}

GroupRecommendation grp(const std::string& v, const std::string& group, double y_real, double y_all, double lim) {
    return {v, "d", group, RouteType::hwy, 1, y_real, y_real, y_real - y_all, y_all, lim, y_all <= lim};
}

}  // namespace

TEST_CASE("mape and adjusted R2") {
    const std::vector<double> real{100, 200, 50};
    CHECK(mape(real, real) == 0.0);
    CHECK(adj_r2(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{1, 2, 3, 4, 5}, 2) == 1.0);
    CHECK(mape(std::vector<double>{110}, std::vector<double>{100}) == doctest::Approx(0.10));

    // per vehicle first: v1 has errors 0.1 and 0.3, v2 has 0.0
    const std::vector<std::string> who{"v1", "v1", "v2"};
    CHECK(mape(std::vector<double>{110, 130, 50}, std::vector<double>{100, 100, 50}, who) == doctest::Approx(0.1));

    std::vector<double> y(100), p(100);
    for (int i = 0; i < 100; ++i) y[i] = i % 10 + 1;
    const double m = mean(y);
    std::fill(p.begin(), p.end(), m);
    CHECK(adj_r2(p, y, 3) == doctest::Approx(-0.03125).epsilon(1e-9));
    CHECK_THROWS_AS(adj_r2(p, y, 99), DataError);
}

TEST_CASE("representativeness and xai_mape") {
    const std::vector<ExplanationRow> raw{er("v", "d1", "a", 1, 1.0, 10), er("v", "d1", "b", 1, 0.4, 10),
                                          er("v", "d1", "c", 1, 0.2, 10), er("v", "d2", "a", 1, 0.5, 10),
                                          er("w", "d1", "a", 1, 1.0, 8)};
    const std::vector<ExplanationRow> kept{raw[0], raw[1]};
    const auto rep = representativeness(raw, kept);
    REQUIRE(rep.size() == 3);
    CHECK(rep[0].n_features == 2);
    CHECK(rep[0].rel_importance == doctest::Approx(0.74));
    CHECK(rep[0].y_expl == doctest::Approx(7.4));
    CHECK(rep[1].n_features == 0);
    CHECK(rep[1].rel_importance == doctest::Approx(0.6));

    const auto xm = xai_mape(rep);
    CHECK(xm.at("v") == doctest::Approx((0.26 + 0.4) / 2));
    CHECK(xm.at("w") == doctest::Approx(2.0 / 8.0));

    // nothing dropped: xai_mape equals the model's own error
    const auto full = representativeness(raw, raw);
    CHECK(full[0].y_expl == doctest::Approx(7.6));
}

TEST_CASE("stability error") {
    DesignMatrix x;
    x.columns = {"a", "b"};
    for (auto r : {std::vector<double>{0, 0}, {0, 0}, {1, 1}, {5, 5}}) x.push_row(r);
    const std::vector<double> f{3, 3, 4, 9};
    const std::vector<std::size_t> targets{0, 2};
    const auto s = stability_error(x, f, targets);
    REQUIRE(s.size() == 2);
    CHECK(s[0].neighbor == 1);
    CHECK(s[0].value == 0.0);  // duplicate point, identical explanation

    // two points: |f diff| 0.5 at h 0.25 -> 2.0 (columns already z-scored)
    DesignMatrix two;
    two.columns = {"a"};
    two.push_row(std::vector<double>{-1});
    two.push_row(std::vector<double>{1});
    const auto p = stability_error(two, std::vector<double>{1.0, 1.5}, std::vector<std::size_t>{0, 1});
    CHECK(p[0].h == doctest::Approx(2.0));
    CHECK(p[0].value == doctest::Approx(0.25));
    CHECK(p[0].value == p[1].value);  // mutual nearest neighbours

    const auto c = stability_error(x, std::vector<double>(4, 7.0), std::vector<std::size_t>{0, 1, 2, 3});
    for (const auto& q : c) CHECK(q.value == 0.0);
}

TEST_CASE("contrastiveness") {
    Recommendations r;
    r.groups = {grp("a", "m1", 10, 6.5, 7), grp("b", "m1", 10, 8, 7), grp("c", "m2", 10, 5, 7)};
    const auto c = contrastiveness(r);
    CHECK(c.per_var[0] == doctest::Approx(0.35));
    CHECK(c.per_below.at("m1") == 0.5);
    CHECK(c.per_below.at("m2") == 1.0);
    const auto none = contrastiveness(Recommendations{});
    CHECK(none.per_var.empty());
    CHECK(none.per_below.empty());
}

TEST_CASE("per_mon") {
    const auto reg = FeatureRegistry::builtin();
    const std::vector<ExplanationRow> raw{er("v", "d1", "jackrabbit_events", 1, 0.5, 9),
                                          er("v", "d2", "jackrabbit_events", 2, 0.3, 9),
                                          er("v", "d3", "jackrabbit_events", 3, 0.6, 9),
                                          er("v", "d1", "rpm_high", 4, 0.1, 9)};
    const auto pm = per_mon(raw, reg);
    CHECK(pm.at("jackrabbit_events") == doctest::Approx(2.0 / 3.0));
    CHECK(pm.at("rpm_high") == 1.0);
}

TEST_CASE("catalog checks") {
    Catalog cat;
    cat.fuel[{"g", RouteType::hwy}] = 6.5;
    std::vector<GroupRecommendation> g{grp("a", "g", 9, 6.5, 7)};
    auto c = catalog_checks(g, cat);
    CHECK(c.mape_vs_catalog == 0.0);
    CHECK(c.pct_below_catalog == 0.0);
    g = {grp("a", "g", 9, 5.0, 7), grp("b", "g", 9, 6.0, 7), grp("c", "x", 9, 6.0, 7)};
    c = catalog_checks(g, cat);
    CHECK(c.pct_below_catalog == 0.5);
    CHECK(c.n == 2);
    CHECK(c.missing == 1);

    const auto text = cat.to_text("");
    std::vector<std::string> lines;
    for (std::size_t p = 0, q; (q = text.find('\n', p)) != std::string::npos; p = q + 1) lines.push_back(text.substr(p, q - p));
    CHECK(*Catalog::from_text(lines).find({"g", RouteType::hwy}) == 6.5);
}

TEST_CASE("incomplete gamma") {
    CHECK(gamma_q(1.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-8));
    CHECK(chi_square_sf(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-8));
#ifdef FUELREC_HAVE_BOOST_MATH
    for (double a : {0.5, 1.0, 1.5, 2.0, 3.5, 10.0, 25.0})
        for (double x : {1e-3, 0.1, 0.5, 1.0, 2.0, 4.0, 9.0, 20.0, 60.0}) {
            const double want = boost::math::gamma_q(a, x);
            CHECK(std::abs(gamma_q(a, x) - want) <= 1e-8 * std::max(1.0, want));
        }
#endif
}

TEST_CASE("Kruskal-Wallis") {
    auto kw = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
    CHECK(std::abs(kw.h - 3.857) < 0.001);
    CHECK(kw.dof == 1);
    kw = kruskal_wallis({{2, 2, 2}, {2, 2, 2}});
    CHECK(kw.h == 0.0);
    CHECK(kw.p_value == 1.0);
    kw = kruskal_wallis({{1, 2, 3}, {1, 2, 3}});
    CHECK(kw.h == doctest::Approx(0.0));
    CHECK_THROWS_AS(kruskal_wallis({{1, 2}, {}}), DataError);
    CHECK_THROWS_AS(kruskal_wallis({{1}, {2}}), DataError);

    // rank based: invariant under a strictly increasing transform
    std::mt19937_64 rng(1);
    std::vector<std::vector<double>> g(3, std::vector<double>(20));
    for (auto& v : g)
        for (auto& x : v) x = std::normal_distribution<double>(0, 1)(rng);
    auto t = g;
    for (auto& v : t)
        for (auto& x : v) x = std::exp(3 * x) + 1;
    CHECK(kruskal_wallis(g).h == doctest::Approx(kruskal_wallis(t).h).epsilon(1e-12));

    // with ties, against the textbook tie-corrected value
    kw = kruskal_wallis({{1, 1, 2}, {2, 3, 3}});
    // ranks: 1.5 1.5 3.5 | 3.5 5.5 5.5; H = 12/(6*7)*(6.5^2/3+14.5^2/3) - 21 = 3.0476; C = 1 - 18/210
    CHECK(kw.h == doctest::Approx(3.047619047619 / (1.0 - 18.0 / 210.0)).epsilon(1e-9));
}

TEST_CASE("contrast table") {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    const auto c = contrast("mape", "plain", a, "monotone", b);
    CHECK(c.mean1 == 2.0);
    CHECK(c.mean2 == 5.0);
    CHECK(c.n1 == 3);
    CHECK(c.p_value == doctest::Approx(chi_square_sf(3.857142857142857, 1)).epsilon(1e-9));
    const std::vector<Contrast> rows{c};
    const auto text = contrasts_to_text(rows, "");
    CHECK(text.rfind("metric,method1,method2,mean1,mean2,n,p_value", 0) == 0);
}
