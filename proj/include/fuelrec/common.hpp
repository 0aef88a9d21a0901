#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fuelrec {

inline constexpr std::string_view kToolVersion = "fuelrec 1.0.0";

// Error taxonomy. The CLI maps each family to its own exit code.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModelFormatError : public DataError {
public:
    using DataError::DataError;
};

enum class RouteType { city, hwy, combined };

std::string_view to_string(RouteType r) noexcept;
RouteType parse_route_type(std::string_view s);

// Linear interpolation between order statistics (Hyndman-Fan type 7).
// `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

// Lower middle element for even counts, so the result is always an observed value.
double lower_median(std::vector<double> values);

double mean(std::span<const double> values);
double stddev(std::span<const double> values);  // population
double pearson(std::span<const double> a, std::span<const double> b);

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);
bool try_parse_double(std::string_view s, double& out);

std::vector<std::string> split(std::string_view line, char delim = ',');
std::string_view trim(std::string_view s);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

// Deterministic stateless hash used for split and bagging decisions.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
double unit_hash(std::uint64_t seed, std::uint64_t index) noexcept;

// Reads a text file, skipping `#` comment lines and blank lines.
std::vector<std::string> read_data_lines(const std::string& path);

// Writes files through a temporary sibling and renames on commit(); an uncommitted
// writer removes its temporary file, so failed stages leave nothing behind.
class AtomicFileSet {
public:
    AtomicFileSet() = default;
    AtomicFileSet(const AtomicFileSet&) = delete;
    AtomicFileSet& operator=(const AtomicFileSet&) = delete;
    ~AtomicFileSet();

    void add(std::string path, std::string contents);
    void commit();

private:
    struct Pending {
        std::string path;
        std::string contents;
    };
    std::vector<Pending> pending_;
};

}  // namespace fuelrec
