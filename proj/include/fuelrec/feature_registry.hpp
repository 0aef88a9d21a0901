#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fuelrec {

enum class FeatureGroup { Index, Categorical, VehicleParameters, DrivingBehaviour, EnvironmentParameters, Target };
enum class Direction { Positive, Negative, None };

std::string_view to_string(FeatureGroup g) noexcept;
std::string_view to_string(Direction d) noexcept;
FeatureGroup parse_feature_group(std::string_view s);
Direction parse_direction(std::string_view s);

struct FeatureSpec {
    std::string name;
    FeatureGroup group = FeatureGroup::VehicleParameters;
    Direction direction = Direction::None;
    bool zero_reference = false;
    bool actionable = false;
    std::string units;

    bool explainable() const noexcept {
        return group == FeatureGroup::VehicleParameters || group == FeatureGroup::DrivingBehaviour ||
               group == FeatureGroup::EnvironmentParameters;
    }

    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// Validated, immutable feature catalog. Construction throws ConfigError on any
// invariant breach (duplicate names, categorical with a direction, zero-reference
// without a direction, anything other than exactly one target).
class FeatureRegistry {
public:
    explicit FeatureRegistry(std::vector<FeatureSpec> specs);

    // The built-in catalog of daily telematics features.
    static FeatureRegistry builtin();

    const std::vector<FeatureSpec>& specs() const noexcept { return specs_; }
    const FeatureSpec* find(std::string_view name) const noexcept;
    const FeatureSpec& at(std::string_view name) const;
    const FeatureSpec& target() const;

    std::vector<std::string> categorical() const;
    std::vector<std::string> explainable_numeric() const;
    std::vector<std::string> actionable() const;
    std::vector<std::string> zero_reference() const;

    // Same catalog with some directions replaced (per-deployment override).
    FeatureRegistry with_directions(const std::vector<std::pair<std::string, Direction>>& overrides) const;

    std::string to_text() const;
    std::string hash() const;

    friend bool operator==(const FeatureRegistry&, const FeatureRegistry&) = default;

private:
    std::vector<FeatureSpec> specs_;
};

// Parses the `name,group,direction,zero_reference,actionable,units` text form.
FeatureRegistry parse_registry(std::string_view text);

// Loads a registry file, or the built-in catalog when `path` is empty.
FeatureRegistry load_registry(const std::optional<std::string>& path);

}  // namespace fuelrec
