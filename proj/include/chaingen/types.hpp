#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace chaingen {

// The eight activity categories used for chains and the 96-slot encoding.
enum class Category {
    life_services,
    sports_leisure,
    employment,
    tourism,
    residence,
    shopping,
    dining,
    travel,
};

inline constexpr std::size_t kCategoryCount = 8;

inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::life_services, Category::sports_leisure, Category::employment, Category::tourism,
    Category::residence,     Category::shopping,       Category::dining,     Category::travel,
};

std::string_view to_string(Category c) noexcept;

/// Parses a canonical category name, or maps a finer POI label ("cafe",
/// "office", "mall", ...) onto its category. Throws invalid_category.
Category parse_category(std::string_view label);
std::optional<Category> try_parse_category(std::string_view label) noexcept;

enum class TravelMode { walk, transit, drive, cycle };

inline constexpr std::array<TravelMode, 4> kAllModes = {TravelMode::walk, TravelMode::transit,
                                                        TravelMode::drive, TravelMode::cycle};

std::string_view to_string(TravelMode m) noexcept;
/// Throws unknown_mode.
TravelMode parse_mode(std::string_view name);

struct GeoPoint {
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Throws invalid_coordinate when outside lon [-180,180] / lat [-90,90] or non-finite.
void check_coordinate(const GeoPoint& p);

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Great-circle distance on a spherical earth, meters.
double haversine_distance(const GeoPoint& a, const GeoPoint& b);

}  // namespace chaingen
