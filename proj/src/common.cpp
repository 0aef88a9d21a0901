#include "fuelrec/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fuelrec {

std::string_view to_string(RouteType r) noexcept {
    switch (r) {
        case RouteType::city: return "city";
        case RouteType::hwy: return "hwy";
        case RouteType::combined: return "combined";
    }
    return "combined";
}

RouteType parse_route_type(std::string_view s) {
    if (s == "city") return RouteType::city;
    if (s == "hwy") return RouteType::hwy;
    if (s == "combined") return RouteType::combined;
    throw DataError("unknown route type '" + std::string(s) + "'");
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DataError("quantile of an empty collection");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double lower_median(std::vector<double> values) {
    if (values.empty()) throw DataError("median of an empty collection");
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
    if (values.empty()) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size()));
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    if (v == 0.0) return "0";  // folds -0
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

bool try_parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

double parse_double(std::string_view s) {
    double v = 0.0;
    if (!try_parse_double(s, v)) throw DataError("not a number: '" + std::string(s) + "'");
    return v;
}

std::vector<std::string> split(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_hash(std::uint64_t seed, std::uint64_t index) noexcept {
    const std::uint64_t h = splitmix64(splitmix64(seed) ^ index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::vector<std::string> read_data_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        lines.emplace_back(t);
    }
    return lines;
}

AtomicFileSet::~AtomicFileSet() {
    std::error_code ec;
    for (const auto& p : pending_) std::filesystem::remove(p.path + ".tmp", ec);
}

void AtomicFileSet::add(std::string path, std::string contents) {
    pending_.push_back({std::move(path), std::move(contents)});
}

void AtomicFileSet::commit() {
    for (const auto& p : pending_) {
        const std::filesystem::path target(p.path);
        if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
        std::ofstream out(p.path + ".tmp", std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + p.path + "'");
        out << p.contents;
        out.close();
        if (!out) throw DataError("write failed for '" + p.path + "'");
    }
    for (const auto& p : pending_) std::filesystem::rename(p.path + ".tmp", p.path);
    pending_.clear();
}

}  // namespace fuelrec
