#include "fuelrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fuelrec {

double mape(std::span<const double> pred, std::span<const double> real, std::span<const std::string> vehicle_of) {
    if (pred.size() != real.size()) throw DataError("mape: prediction and target sizes differ");
    if (!vehicle_of.empty() && vehicle_of.size() != real.size()) throw DataError("mape: one vehicle id per row");
    std::map<std::string, std::pair<double, std::size_t>> acc;
    static const std::string all;
    for (std::size_t i = 0; i < real.size(); ++i) {
        if (!(real[i] > 0.0)) continue;
        auto& a = acc[vehicle_of.empty() ? all : vehicle_of[i]];
        a.first += std::abs(pred[i] - real[i]) / real[i];
        ++a.second;
    }
    if (acc.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [v, a] : acc) sum += a.first / static_cast<double>(a.second);
    return sum / static_cast<double>(acc.size());
}

double r2(std::span<const double> pred, std::span<const double> real) {
    if (pred.size() != real.size() || real.empty()) throw DataError("r2: sizes differ or empty");
    const double m = mean(real);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) {
        ss_res += (real[i] - pred[i]) * (real[i] - pred[i]);
        ss_tot += (real[i] - m) * (real[i] - m);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

double adj_r2(std::span<const double> pred, std::span<const double> real, std::size_t p) {
    const std::size_t n = real.size();
    if (n <= p + 1) throw DataError("adj_r2 needs n > p + 1 (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");
    const double nn = static_cast<double>(n);
    return 1.0 - (1.0 - r2(pred, real)) * (nn - 1.0) / (nn - static_cast<double>(p) - 1.0);
}

std::vector<Representativeness> representativeness(std::span<const ExplanationRow> raw,
                                                   std::span<const ExplanationRow> filtered) {
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, double>> kept;
    for (const auto& r : filtered) {
        auto& k = kept[{r.vehicle_id, r.date_tx}];
        ++k.first;
        k.second += r.relevance;
    }
    std::vector<Representativeness> out;
    for (const auto& [b, e] : vehicle_date_ranges(raw)) {
        const auto& head = raw[b];
        Representativeness r;
        r.vehicle_id = head.vehicle_id;
        r.date_tx = head.date_tx;
        r.y_real = head.y_real;
        r.y_expl = head.intercept;
        if (const auto it = kept.find({head.vehicle_id, head.date_tx}); it != kept.end()) {
            r.n_features = it->second.first;
            r.y_expl += it->second.second;
        }
        r.rel_importance = r.y_expl / r.y_real;
        out.push_back(std::move(r));
    }
    return out;
}

std::map<std::string, double> xai_mape(std::span<const Representativeness> rep) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& r : rep) {
        if (!(r.y_real > 0.0)) continue;
        auto& a = acc[r.vehicle_id];
        a.first += std::abs(r.y_expl - r.y_real) / r.y_real;
        ++a.second;
    }
    std::map<std::string, double> out;
    for (const auto& [v, a] : acc) out[v] = a.first / static_cast<double>(a.second);
    return out;
}

std::vector<StabilityPoint> stability_error(const DesignMatrix& x, std::span<const double> f_expl,
                                            std::span<const std::size_t> targets) {
    const std::size_t n = x.n_rows, p = x.columns.size();
    if (f_expl.size() != n) throw DataError("stability_error: one explanation value per row");
    if (n < 2) throw DataError("stability_error needs at least two points");
    std::vector<double> z(n * p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        const auto col = x.column(j);
        const double m = mean(col), s = stddev(col);
        if (s > 0.0)
            for (std::size_t i = 0; i < n; ++i) z[i * p + j] = (col[i] - m) / s;
    }
    std::vector<StabilityPoint> out;
    out.reserve(targets.size());
    for (auto i : targets) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = i;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            double d2 = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double d = z[i * p + j] - z[k * p + j];
                d2 += d * d;
            }
            if (d2 < best) {
                best = d2;
                arg = k;
            }
        }
        const double h = std::sqrt(best);
        out.push_back({i, arg, h, std::abs(f_expl[i] - f_expl[arg]) / std::max(h, 1e-9)});
    }
    return out;
}

Contrastiveness contrastiveness(const Recommendations& recs) {
    Contrastiveness out;
    std::map<std::string, std::pair<std::size_t, std::size_t>> below, single;
    std::map<std::pair<std::string, std::string>, bool> any_single;
    for (const auto& r : recs.rows)
        if (r.becomes_inlier) any_single[{r.vehicle_id, r.date_tx}] = true;
    for (const auto& g : recs.groups) {
        out.per_var.push_back(g.y_real > 0.0 ? (g.y_real - g.y_updated_all) / g.y_real : 0.0);
        auto& b = below[g.vehicle_group];
        ++b.second;
        if (g.y_updated_all <= g.lim_sup) ++b.first;
        auto& s = single[g.vehicle_group];
        ++s.second;
        if (any_single.count({g.vehicle_id, g.date_tx})) ++s.first;
    }
    for (const auto& [m, b] : below) out.per_below[m] = static_cast<double>(b.first) / static_cast<double>(b.second);
    for (const auto& [m, s] : single)
        out.per_below_single[m] = static_cast<double>(s.first) / static_cast<double>(s.second);
    return out;
}

std::map<std::string, double> per_mon(std::span<const ExplanationRow> raw, const FeatureRegistry& registry,
                                      MonotoneFilterMode mode) {
    const auto res = filter_monotonic(raw, registry, mode);
    std::map<std::string, std::pair<std::size_t, std::size_t>> acc;
    for (const auto& [key, st] : res.stats) {
        auto& a = acc[key.first];
        a.first += st.pairs_after;
        a.second += st.pairs_before;
    }
    std::map<std::string, double> out;
    for (const auto& [f, a] : acc)
        out[f] = a.second ? static_cast<double>(a.first) / static_cast<double>(a.second) : 1.0;
    return out;
}

std::optional<double> Catalog::find(const GroupRouteKey& key) const {
    const auto it = fuel.find(key);
    if (it == fuel.end()) return std::nullopt;
    return it->second;
}

std::string Catalog::to_text(std::string_view header_line) const {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "vehicle_group,route_type,catalog_fuel\n";
    for (const auto& [k, v] : fuel) out << k.first << ',' << to_string(k.second) << ',' << format_double(v) << '\n';
    return out.str();
}

Catalog Catalog::from_text(const std::vector<std::string>& lines) {
    if (lines.empty() || lines[0] != "vehicle_group,route_type,catalog_fuel")
        throw DataError("catalog header must be vehicle_group,route_type,catalog_fuel");
    Catalog c;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        if (f.size() != 3) throw DataError("malformed catalog line " + std::to_string(i + 1));
        c.fuel[{f[0], parse_route_type(f[1])}] = parse_double(f[2]);
    }
    return c;
}

CatalogCheck catalog_checks(std::span<const GroupRecommendation> groups, const Catalog& catalog, double offset) {
    CatalogCheck out;
    double ape = 0.0;
    std::size_t hits = 0;
    for (const auto& g : groups) {
        const auto c = catalog.find({g.vehicle_group, g.route_type});
        if (!c || !(*c > 0.0)) {
            ++out.missing;
            continue;
        }
        ++out.n;
        ape += std::abs(g.y_updated_all - *c) / *c;
        if (g.y_updated_all < *c - offset) ++hits;
    }
    if (out.n) {
        out.mape_vs_catalog = ape / static_cast<double>(out.n);
        out.pct_below_catalog = static_cast<double>(hits) / static_cast<double>(out.n);
    }
    return out;
}

double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw DataError("gamma_q needs a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
    constexpr int kMaxIter = 1000;
    constexpr double kEps = 1e-15;
    if (x < a + 1.0) {
        double ap = a, term = 1.0 / a, sum = term;
        for (int n = 0; n < kMaxIter; ++n) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * kEps) break;
        }
        return 1.0 - sum * std::exp(log_prefix);
    }
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return std::exp(log_prefix) * h;
}

double chi_square_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return gamma_q(dof / 2.0, x / 2.0);
}

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw DataError("kruskal_wallis needs at least two groups");
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw DataError("kruskal_wallis: empty group");
        for (double v : groups[g]) pooled.emplace_back(v, g);
    }
    const std::size_t n = pooled.size();
    if (n < 3) throw DataError("kruskal_wallis needs at least three values");
    std::sort(pooled.begin(), pooled.end());

    std::vector<double> rank_sum(groups.size(), 0.0);
    double ties = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && pooled[j].first == pooled[i].first) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank_sum[pooled[k].second] += avg;
        const double t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    const double nn = static_cast<double>(n);
    KruskalWallis out;
    out.dof = groups.size() - 1;
    const double correction = 1.0 - ties / (nn * nn * nn - nn);
    if (correction <= 0.0) return out;  // all values identical
    double s = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) s += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
    out.h = std::max(0.0, (12.0 / (nn * (nn + 1.0)) * s - 3.0 * (nn + 1.0)) / correction);
    out.p_value = chi_square_sf(out.h, static_cast<double>(out.dof));
    return out;
}

Contrast contrast(std::string metric, std::string method1, std::span<const double> a, std::string method2,
                  std::span<const double> b) {
    Contrast c{std::move(metric), std::move(method1), std::move(method2), mean(a), mean(b), a.size(), b.size(),
               std::numeric_limits<double>::quiet_NaN()};
    if (!a.empty() && !b.empty() && a.size() + b.size() >= 3)
        c.p_value = kruskal_wallis({std::vector<double>(a.begin(), a.end()), std::vector<double>(b.begin(), b.end())})
                        .p_value;
    return c;
}

std::string contrasts_to_text(std::span<const Contrast> rows, std::string_view header_line) {
    std::ostringstream out;
    if (!header_line.empty()) out << header_line << '\n';
    out << "metric,method1,method2,mean1,mean2,n,p_value,n1,n2\n";
    for (const auto& c : rows)
        out << c.metric << ',' << c.method1 << ',' << c.method2 << ',' << format_double(c.mean1) << ','
            << format_double(c.mean2) << ',' << c.n1 + c.n2 << ',' << format_double(c.p_value) << ',' << c.n1 << ','
            << c.n2 << '\n';
    return out.str();
}

}  // namespace fuelrec
