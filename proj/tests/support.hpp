#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fuelrec/far.hpp"
#include "fuelrec/gam.hpp"

namespace fuelrec::testing {

inline FarRow far_row(std::string vehicle, std::string date, std::string group, RouteType route, double fuel,
                      std::vector<double> values, double trip_kms = 50.0) {
    FarRow r;
    r.vehicle_id = std::move(vehicle);
    r.date_tx = std::move(date);
    r.vehicle_group = std::move(group);
    r.route_type = route;
    r.fuel_consumption = fuel;
    r.trip_kms = trip_kms;
    r.imputed.assign(values.size(), 0);
    r.values = std::move(values);
    return r;
}

inline std::string day(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "2023-%02d-%02d", 1 + i / 28, 1 + i % 28);
    return buf;
}

// Hand-built one-feature shape: bins [e0,e1), [e1,e2], ... with the given values.
inline ShapeFunction shape(std::string feature, std::vector<double> edges, std::vector<double> values) {
    ShapeFunction s;
    s.feature = std::move(feature);
    s.bin_edges = std::move(edges);
    s.bin_weights.assign(values.size(), 1.0);
    s.bin_values = std::move(values);
    return s;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path = std::filesystem::temp_directory_path() / ("fuelrec_" + tag + "_" + std::to_string(rng() % 1000000007));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// Data lines of an in-memory text: no blank or `#` lines.
inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::size_t p = 0;
    while (p < text.size()) {
        auto q = text.find('\n', p);
        if (q == std::string::npos) q = text.size();
        auto line = text.substr(p, q - p);
        if (!line.empty() && line[0] != '#') out.push_back(std::move(line));
        p = q + 1;
    }
    return out;
}

}  // namespace fuelrec::testing
