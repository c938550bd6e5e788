#include "chaingen/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <utility>

#include "chaingen/error.hpp"

namespace chaingen {

std::string_view to_string(Category c) noexcept {
    switch (c) {
        case Category::life_services: return "life_services";
        case Category::sports_leisure: return "sports_leisure";
        case Category::employment: return "employment";
        case Category::tourism: return "tourism";
        case Category::residence: return "residence";
        case Category::shopping: return "shopping";
        case Category::dining: return "dining";
        case Category::travel: return "travel";
    }
    return "?";
}

namespace {

std::string normalize_label(std::string_view label) {
    std::string out;
    out.reserve(label.size());
    for (char ch : label) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || ch == '-' || ch == '&') {
            if (!out.empty() && out.back() != '_') out.push_back('_');
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

// Finer POI labels seen in typical POI feeds.
constexpr std::pair<std::string_view, Category> kFineLabels[] = {
    {"home", Category::residence},
    {"residential", Category::residence},
    {"apartment", Category::residence},
    {"housing", Category::residence},
    {"office", Category::employment},
    {"work", Category::employment},
    {"workplace", Category::employment},
    {"company", Category::employment},
    {"factory", Category::employment},
    {"restaurant", Category::dining},
    {"cafe", Category::dining},
    {"coffee", Category::dining},
    {"bar", Category::dining},
    {"food", Category::dining},
    {"fast_food", Category::dining},
    {"mall", Category::shopping},
    {"store", Category::shopping},
    {"shop", Category::shopping},
    {"supermarket", Category::shopping},
    {"market", Category::shopping},
    {"retail", Category::shopping},
    {"gym", Category::sports_leisure},
    {"park", Category::sports_leisure},
    {"sports", Category::sports_leisure},
    {"leisure", Category::sports_leisure},
    {"cinema", Category::sports_leisure},
    {"sports_and_leisure", Category::sports_leisure},
    {"museum", Category::tourism},
    {"attraction", Category::tourism},
    {"landmark", Category::tourism},
    {"hotel", Category::tourism},
    {"sightseeing", Category::tourism},
    {"bank", Category::life_services},
    {"hospital", Category::life_services},
    {"clinic", Category::life_services},
    {"school", Category::life_services},
    {"post_office", Category::life_services},
    {"pharmacy", Category::life_services},
    {"services", Category::life_services},
    {"station", Category::travel},
    {"metro", Category::travel},
    {"bus_stop", Category::travel},
    {"transport", Category::travel},
};

}  // namespace

std::optional<Category> try_parse_category(std::string_view label) noexcept {
    const std::string key = normalize_label(label);
    for (Category c : kAllCategories) {
        if (key == to_string(c)) return c;
    }
    for (const auto& [name, cat] : kFineLabels) {
        if (key == name) return cat;
    }
    return std::nullopt;
}

Category parse_category(std::string_view label) {
    if (auto c = try_parse_category(label)) return *c;
    throw Error(Errc::invalid_category, "unknown activity category '" + std::string(label) + "'");
}

std::string_view to_string(TravelMode m) noexcept {
    switch (m) {
        case TravelMode::walk: return "walk";
        case TravelMode::transit: return "transit";
        case TravelMode::drive: return "drive";
        case TravelMode::cycle: return "cycle";
    }
    return "?";
}

TravelMode parse_mode(std::string_view name) {
    for (TravelMode m : kAllModes) {
        if (name == to_string(m)) return m;
    }
    throw Error(Errc::unknown_mode, "unknown travel mode '" + std::string(name) + "'");
}

void check_coordinate(const GeoPoint& p) {
    if (!std::isfinite(p.lon) || !std::isfinite(p.lat) || p.lon < -180.0 || p.lon > 180.0 ||
        p.lat < -90.0 || p.lat > 90.0) {
        throw Error(Errc::invalid_coordinate, "coordinate out of range (" + std::to_string(p.lon) +
                                                  ", " + std::to_string(p.lat) + ")");
    }
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
    check_coordinate(a);
    check_coordinate(b);
    constexpr double deg = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * deg;
    const double dlon = (b.lon - a.lon) * deg;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    const double h = s1 * s1 + std::cos(a.lat * deg) * std::cos(b.lat * deg) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

}  // namespace chaingen
