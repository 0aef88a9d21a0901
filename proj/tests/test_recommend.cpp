#include <doctest.h>

#include <cmath>
#include <random>

#include "fuelrec/recommend.hpp"
#include "support.hpp"

using namespace fuelrec;
using fuelrec::testing::far_row;
using fuelrec::testing::shape;

namespace {

const GroupRouteKey kKey{"g", RouteType::hwy};

// harsh_brakes_events: zero reference, DrivingBehaviour. height: Negative, median reference.
// trip_kms: not actionable.
FuelModel model() {
    GamModel m;
    m.intercept = 6.0;
    m.feature_order = {"harsh_brakes_events", "height", "trip_kms"};
    m.shapes = {shape("harsh_brakes_events", {0, 1, 10}, {0.2, 1.2}),
                shape("height", {0, 1, 2}, {-1, 1}),
                shape("trip_kms", {0, 100, 500}, {0.3, -0.3})};
    return FuelModel(ModelMode::plain, m);
}

GroupMedians medians(double height = 0.5) {
    GroupMedians m;
    m.by_group_route[kKey] = {{"height", height}, {"harsh_brakes_events", 4.0}, {"trip_kms", 50.0},
                              {std::string(GroupMedians::kFuel), 7.0}};
    m.global = {{"height", 1.5}, {"harsh_brakes_events", 4.0}, {"trip_kms", 50.0}};
    return m;
}

AnomalyLimitTable limits(double lim_sup = 9.5) {
    AnomalyLimitTable t;
    KeyLimits k;
    k.limits.lim_sup = lim_sup;
    t.keys[kKey] = k;
    return t;
}

ExplanationRow er(const std::string& v, const std::string& d, const std::string& f, double value, double rel,
                  double y_pred, double y_real) {
    return {v, d, kKey.first, kKey.second, f, value, rel, y_pred, y_real, 6.0};
}

}  // namespace

TEST_CASE("reference coefficients") {
    const auto reg = FeatureRegistry::builtin();
    const auto m = model();
    const auto med = medians(1.5);
    const ReferenceTable refs(med, reg, m);
    const auto& hb = refs.get(kKey, "harsh_brakes_events");
    CHECK(hb.value == 0.0);
    CHECK(hb.relevance == 0.2);
    const auto& h = refs.get(kKey, "height");
    CHECK(h.value == 1.5);
    CHECK(h.relevance == 1.0);
    CHECK_FALSE(h.global_fallback);

    const auto& other = refs.get({"unseen", RouteType::city}, "height");
    CHECK(other.global_fallback);
    CHECK(other.value == 1.5);
    CHECK(refs.fallbacks() == 1);
    CHECK_THROWS_AS(refs.get(kKey, "not_in_model"), DataError);
}

TEST_CASE("get_recom examples") {
    const auto reg = FeatureRegistry::builtin();
    const auto m = model();
    const auto med = medians();
    const ReferenceTable refs(med, reg, m);

    // relevance 1.2 vs reference 0.2: delta 1, y_real 10 -> 9
    std::vector<ExplanationRow> e{er("v", "d", "harsh_brakes_events", 5, 1.2, 11, 10)};
    auto r = get_recom(e, refs, reg, limits());
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].delta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.rows[0].y_updated == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(r.rows[0].becomes_inlier);
    REQUIRE(r.groups.size() == 1);
    CHECK(r.groups[0].y_updated_all == doctest::Approx(9.0).epsilon(1e-12));

    // already at the reference value
    e = {er("v", "d", "height", 0.5, -1.0, 11, 10)};
    r = get_recom(e, refs, reg, limits());
    CHECK(r.rows[0].delta == 0.0);
    CHECK(r.rows[0].y_updated == 10.0);

    // two features: 1.0 and 0.5
    e = {er("v", "d", "harsh_brakes_events", 5, 1.2, 11, 10), er("v", "d", "height", 1.7, -0.5, 11, 10)};
    r = get_recom(e, refs, reg, limits());
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[1].delta == doctest::Approx(0.5));
    CHECK(r.groups[0].total_delta == doctest::Approx(1.5));
    CHECK(r.groups[0].y_updated_all == doctest::Approx(8.5));
    for (const auto& x : r.rows) CHECK(r.groups[0].y_updated_all <= x.y_updated);

    // negative delta is reported but not aggregated; non-actionable features are skipped
    e = {er("v", "d", "harsh_brakes_events", 0.5, 0.2, 11, 10), er("v", "d", "height", 0.2, -2.0, 11, 10),
         er("v", "d", "trip_kms", 40, 0.3, 11, 10)};
    r = get_recom(e, refs, reg, limits());
    CHECK(r.rows.size() == 2);
    CHECK(r.rows[1].delta == -1.0);
    CHECK(r.groups[0].total_delta == 0.0);
    CHECK(r.groups[0].y_updated_all == 10.0);
    CHECK_FALSE(r.groups[0].becomes_inlier);

    e = {er("v", "d", "height", 1.7, -0.5, 11, 10)};
    e[0].vehicle_group = "nowhere";
    CHECK_THROWS_AS(get_recom(e, refs, reg, limits()), DataError);
}

TEST_CASE("consistency identity on random rows") {
    const auto reg = FeatureRegistry::builtin();
    const auto m = model();
    const auto med = medians(1.3);
    const ReferenceTable refs(med, reg, m);
    Far far;
    far.features = {"harsh_brakes_events", "height", "trip_kms"};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0, 1);
    for (int i = 0; i < 500; ++i)
        far.rows.push_back(far_row("v", fuelrec::testing::day(i % 300), "g", RouteType::hwy, 9,
                                   {10 * U(rng), 2 * U(rng), 400 * U(rng)}));
    std::vector<std::size_t> idx(far.rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const auto raw = explain_rows(m, far, idx);
    const auto rec = get_recom(raw, refs, reg, limits());
    REQUIRE(rec.rows.size() == 2 * far.rows.size());
    const RowEncoder enc(far, m.feature_order());
    for (std::size_t i = 0; i < far.rows.size(); ++i) {
        auto row = far.rows[i];
        double sum_delta = 0.0;
        for (std::size_t k = 2 * i; k < 2 * i + 2; ++k) {
            const auto& r = rec.rows[k];
            sum_delta += r.delta;
            row.values[r.feature == "height" ? 1 : 0] = r.reference_value;
        }
        const double direct = m.predict("", enc.encode(row));
        CHECK(std::abs(direct - (rec.rows[2 * i].y_pred - sum_delta)) < 1e-9);
    }
}

TEST_CASE("summary recommendations") {
    const auto reg = FeatureRegistry::builtin();
    const auto m = model();
    const auto med = medians();
    const ReferenceTable refs(med, reg, m);
    Far far;
    far.features = {"harsh_brakes_events", "height", "trip_kms"};
    std::vector<ExplanationRow> e;
    // v1: four outlier days (one on a short trip); v2: two days
    const double hb[] = {2, 4, 6, 8};
    for (int i = 0; i < 4; ++i) {
        const auto d = fuelrec::testing::day(i);
        far.rows.push_back(far_row("v1", d, "g", RouteType::hwy, 11, {hb[i], 1.5, 40}, i == 3 ? 4.0 : 40.0));
        e.push_back(er("v1", d, "harsh_brakes_events", hb[i], 1.2, 11 + i, 12 + i));
        e.push_back(er("v1", d, "height", 1.5, 1.0, 11 + i, 12 + i));
    }
    for (int i = 0; i < 2; ++i) {
        const auto d = fuelrec::testing::day(i);
        far.rows.push_back(far_row("v2", d, "g", RouteType::hwy, 11, {5, 1.5, 40}));
        e.push_back(er("v2", d, "harsh_brakes_events", 5, 1.2, 11, 12));
    }
    const auto s = get_summ_recom(e, far, refs, reg, limits(), m);
    REQUIRE(s.aggregates.size() == 1);
    CHECK(s.aggregates[0].vehicle_id == "v1");
    CHECK(s.aggregates[0].n_days == 3);
    CHECK(s.aggregates[0].first_date == fuelrec::testing::day(0));
    CHECK(s.aggregates[0].last_date == fuelrec::testing::day(2));
    REQUIRE(s.prototypes.size() == 2);
    CHECK(s.prototypes[0].feature_value == 4.0);  // lower median of {2,4,6}
    CHECK(s.prototypes[0].y_real == 13.0);
    CHECK(s.prototypes[0].relevance == 1.2);
    for (const auto& p : s.prototypes) {
        bool observed = false;
        for (const auto& x : e) observed = observed || (x.feature == p.feature && x.feature_value == p.feature_value);
        CHECK(observed);
    }
    CHECK(s.recommendations.groups.size() == 1);

    // lower median for even counts
    SummaryConfig two{2, 5.0, 1.0};
    const auto s2 = get_summ_recom(e, far, refs, reg, limits(), m, two);
    REQUIRE(s2.aggregates.size() == 2);
    CHECK(s2.aggregates[1].vehicle_id == "v2");

    std::vector<ExplanationRow> even;
    for (int i = 0; i < 2; ++i) {
        const auto d = fuelrec::testing::day(i);
        even.push_back(er("v1", d, "harsh_brakes_events", i == 0 ? 2.0 : 4.0, 1.2, 12, 12));
    }
    const auto s3 = get_summ_recom(even, far, refs, reg, limits(), m, two);
    REQUIRE(s3.prototypes.size() == 1);
    CHECK(s3.prototypes[0].feature_value == 2.0);

    // the decrease threshold removes dates
    SummaryConfig strict{3, 5.0, 5.0};
    CHECK(get_summ_recom(e, far, refs, reg, limits(), m, strict).aggregates.empty());
}

TEST_CASE("fleet manager view") {
    const auto reg = FeatureRegistry::builtin();
    const auto m = model();
    const auto med = medians();
    const ReferenceTable refs(med, reg, m);
    Far far;
    far.features = {"harsh_brakes_events", "height", "trip_kms"};
    // harsh brakes at 5: term 1.2 vs zero reference 0.2 -> 1 L/100 km over 200 km = 2 L
    far.rows.push_back(far_row("v1", "2023-01-01", "g", RouteType::hwy, 8, {5, 1.5, 200}, 200));
    far.rows.push_back(far_row("v2", "2023-01-01", "h", RouteType::hwy, 8, {0, 1.5, 100}, 100));
    GroupMedians med2 = med;
    med2.by_group_route[{"h", RouteType::hwy}] = med.by_group_route.at(kKey);
    const ReferenceTable refs2(med2, reg, m);
    const auto v = fleet_manager_view(m, far, {}, refs2, reg);
    REQUIRE(v.size() == 3);
    CHECK(v[0].vehicle_group == "g");
    CHECK(v[0].excess_fuel_l == doctest::Approx(2.0));
    CHECK(v[0].total_fuel_l == doctest::Approx(16.0));
    CHECK(v[0].baseline_fuel_l == doctest::Approx(14.0));
    CHECK(v[1].vehicle_group == "h");
    CHECK(v[1].excess_fuel_l == 0.0);
    CHECK(v[2].vehicle_group == "*");
    CHECK(v[2].excess_fuel_l == doctest::Approx(2.0));
    CHECK(v[2].n_days == 2);

    const auto r = fleet_manager_view(m, far, {}, refs2, reg, true);
    CHECK(r.size() == 5);
    CHECK(r.back().route_type == "*");

    const auto text = manager_view_to_text(v, "");
    CHECK(text.rfind("vehicle_group,route_type,total_fuel_L,excess_fuel_L,excess_pct", 0) == 0);
}
