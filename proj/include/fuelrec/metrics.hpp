#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuelrec/anomaly.hpp"
#include "fuelrec/explain.hpp"
#include "fuelrec/far.hpp"
#include "fuelrec/gam.hpp"
#include "fuelrec/recommend.hpp"

namespace fuelrec {

// Mean absolute percentage error averaged per vehicle first, then over vehicles.
// An empty `vehicle_of` treats all rows as one vehicle. Rows with real <= 0 are skipped.
double mape(std::span<const double> pred, std::span<const double> real,
            std::span<const std::string> vehicle_of = {});
double r2(std::span<const double> pred, std::span<const double> real);
// Throws DataError unless n > p + 1.
double adj_r2(std::span<const double> pred, std::span<const double> real, std::size_t p);

struct Representativeness {
    std::string vehicle_id;
    std::string date_tx;
    std::size_t n_features = 0;
    double rel_importance = 0.0;
    double y_expl = 0.0;  // intercept + retained relevance
    double y_real = 0.0;
};

// One entry per vehicle-date of `raw`; `filtered` may omit vehicle-dates entirely.
std::vector<Representativeness> representativeness(std::span<const ExplanationRow> raw,
                                                   std::span<const ExplanationRow> filtered);

// Per-vehicle MAPE of intercept + retained relevance against y_real.
std::map<std::string, double> xai_mape(std::span<const Representativeness> rep);

struct StabilityPoint {
    std::size_t point = 0;
    std::size_t neighbor = 0;
    double h = 0.0;
    double value = 0.0;
};

// Columns are z-scored over all rows of `x` (constant columns become 0); for each
// point in `targets` the nearest other row by Euclidean distance is found by
// brute force and |f[i] - f[j]| / max(h, 1e-9) reported.
std::vector<StabilityPoint> stability_error(const DesignMatrix& x, std::span<const double> f_expl,
                                            std::span<const std::size_t> targets);

struct Contrastiveness {
    std::vector<double> per_var;                      // aligned with the input groups
    std::map<std::string, double> per_below;          // per vehicle_group, all-feature update
    std::map<std::string, double> per_below_single;   // any single-feature update suffices
};

Contrastiveness contrastiveness(const Recommendations& recs);

// Pairs surviving the monotonicity filter over pairs before, per feature.
std::map<std::string, double> per_mon(std::span<const ExplanationRow> raw, const FeatureRegistry& registry,
                                      MonotoneFilterMode mode = MonotoneFilterMode::by_direction);

struct Catalog {
    std::map<GroupRouteKey, double> fuel;

    std::optional<double> find(const GroupRouteKey& key) const;
    std::string to_text(std::string_view header_line) const;
    static Catalog from_text(const std::vector<std::string>& lines);
};

struct CatalogCheck {
    double mape_vs_catalog = 0.0;
    double pct_below_catalog = 0.0;
    std::size_t n = 0;
    std::size_t missing = 0;
};

CatalogCheck catalog_checks(std::span<const GroupRecommendation> groups, const Catalog& catalog, double offset = 1.0);

// Regularized upper incomplete gamma Q(a, x); series below a + 1, Lentz
// continued fraction above.
double gamma_q(double a, double x);
double chi_square_sf(double x, double dof);

struct KruskalWallis {
    double h = 0.0;
    double p_value = 1.0;
    std::size_t dof = 0;
};

// Tie-corrected H. Throws DataError on an empty group or fewer than three values.
KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct Contrast {
    std::string metric;
    std::string method1;
    std::string method2;
    double mean1 = 0.0;
    double mean2 = 0.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    double p_value = 1.0;
};

Contrast contrast(std::string metric, std::string method1, std::span<const double> a, std::string method2,
                  std::span<const double> b);
std::string contrasts_to_text(std::span<const Contrast> rows, std::string_view header_line);

}  // namespace fuelrec
