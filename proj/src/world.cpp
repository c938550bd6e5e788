#include "chaingen/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "chaingen/chain.hpp"
#include "chaingen/random.hpp"

namespace chaingen::world {

GeoPoint offset(const GeoPoint& origin, double east_m, double north_m) {
    constexpr double deg = 180.0 / std::numbers::pi;
    const double dlat = north_m / kEarthRadiusM * deg;
    const double dlon = east_m / (kEarthRadiusM * std::cos(origin.lat / deg)) * deg;
    return {origin.lon + dlon, origin.lat + dlat};
}

GeoPoint centroid(const spatial::SpatialWorld& world) {
    double lon = 0.0, lat = 0.0;
    const auto& pois = world.pois.pois();
    if (pois.empty()) return {};
    for (const auto& p : pois) {
        lon += p.location.lon;
        lat += p.location.lat;
    }
    return {lon / static_cast<double>(pois.size()), lat / static_cast<double>(pois.size())};
}

namespace {

struct CategoryTemplate {
    Category category;
    double share;
    std::vector<std::string_view> labels;
    int open_min;
    int close_min;
    std::vector<std::string_view> tags;
};

const std::vector<CategoryTemplate>& templates() {
    static const std::vector<CategoryTemplate> t = {
        {Category::residence, 0.20, {"apartment", "housing"}, 0, 1440, {"home"}},
        {Category::employment, 0.14, {"office", "company"}, 420, 1320, {"work", "business"}},
        {Category::dining, 0.20, {"restaurant", "cafe", "fast_food"}, 600, 1380, {"food", "meal", "lunch", "dinner"}},
        {Category::shopping, 0.14, {"supermarket", "mall", "store"}, 570, 1320, {"shop", "groceries"}},
        {Category::life_services, 0.14, {"clinic", "bank", "school", "pharmacy"}, 480, 1200, {"service", "errand"}},
        {Category::sports_leisure, 0.10, {"gym", "park", "cinema"}, 360, 1380, {"exercise", "fun", "leisure"}},
        {Category::tourism, 0.08, {"museum", "landmark"}, 540, 1080, {"visit", "sightseeing"}},
    };
    return t;
}

std::array<double, 4> speeds(double walk, double transit, double drive, double cycle) {
    std::array<double, 4> s{};
    s[static_cast<std::size_t>(TravelMode::walk)] = walk;
    s[static_cast<std::size_t>(TravelMode::transit)] = transit;
    s[static_cast<std::size_t>(TravelMode::drive)] = drive;
    s[static_cast<std::size_t>(TravelMode::cycle)] = cycle;
    return s;
}

std::string node_id(int r, int c) { return "n" + std::to_string(r) + "_" + std::to_string(c); }

}  // namespace

std::shared_ptr<spatial::SpatialWorld> make_synthetic_world(const WorldSpec& spec) {
    Rng rng(mix_seed(spec.seed));
    auto world = std::make_shared<spatial::SpatialWorld>();

    const int n = spec.grid;
    const int transit_row = n / 2 - 1;
    const int transit_col = n / 2;
    auto& net = world->network;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            net.add_node(node_id(r, c), offset(spec.origin, c * spec.spacing_m, r * spec.spacing_m));
        }
    }
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            if (c + 1 < n) {
                const double transit = r == transit_row ? 24.0 : 0.0;
                net.add_edge(node_id(r, c), node_id(r, c + 1), 0.0, speeds(4.8, transit, 30.0, 15.0));
            }
            if (r + 1 < n) {
                const double transit = c == transit_col ? 24.0 : 0.0;
                net.add_edge(node_id(r, c), node_id(r + 1, c), 0.0, speeds(4.8, transit, 30.0, 15.0));
            }
        }
    }

    // Largest-remainder allocation of POIs to categories.
    const auto& tpl = templates();
    std::vector<std::size_t> counts(tpl.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        const double exact = tpl[i].share * static_cast<double>(spec.poi_count);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < spec.poi_count; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];

    const double extent = (n - 1) * spec.spacing_m;
    std::vector<spatial::PoiRecord> pois;
    for (std::size_t t = 0; t < tpl.size(); ++t) {
        for (std::size_t k = 0; k < counts[t]; ++k) {
            const auto& c = tpl[t];
            spatial::PoiRecord p;
            p.id = std::string(to_string(c.category)) + "_" + std::to_string(k + 1);
            p.label = std::string(c.labels[k % c.labels.size()]);
            p.category = c.category;
            p.name = p.label + " " + std::to_string(k + 1);
            p.location = offset(spec.origin, rng.uniform(0.0, extent), rng.uniform(0.0, extent));
            p.open_min = c.open_min;
            p.close_min = c.close_min;
            if (p.label == "cafe") {
                p.open_min = 420;
                p.close_min = 1200;
            } else if (p.label == "school") {
                p.open_min = 420;
                p.close_min = 1080;
            } else if (p.label == "park") {
                p.open_min = 0;
                p.close_min = 1440;
            }
            p.rating = std::round(rng.uniform(3.0, 5.0) * 10.0) / 10.0;
            p.price = static_cast<int>(rng.integer(1, 4));
            for (auto tag : c.tags) p.tags.emplace_back(tag);
            pois.push_back(std::move(p));
        }
    }
    world->pois = spatial::PoiDataset(std::move(pois));
    return world;
}

env::Scenario make_synthetic_scenario(const WorldSpec& spec, std::uint64_t seed) {
    Rng rng(mix_seed(seed ^ 0x5ca1ab1eULL));
    env::Scenario s;
    const double base_temp = rng.uniform(12.0, 26.0);
    const bool rainy_afternoon = rng.uniform() < 0.3;
    s.weather = {
        {0.0, {"clear", base_temp - 4.0}},
        {600.0, {"cloudy", base_temp}},
        {840.0, {rainy_afternoon ? "rain" : "clear", base_temp + 2.0}},
        {1140.0, {"clear", base_temp - 2.0}},
    };
    s.crowd = {40.0, 25.0, 1080.0, 1440.0};
    const double extent = (spec.grid - 1) * spec.spacing_m;
    env::ZoneWindow event;
    event.name = "evening market";
    event.from_min = 1080.0;
    event.to_min = 1320.0;
    event.center = offset(spec.origin, rng.uniform(0.0, extent), rng.uniform(0.0, extent));
    event.radius_m = 300.0;
    event.multiplier = 2.5;
    s.events.push_back(event);
    s.lambda_per_hour = 0.1;
    s.current_time_min = kDayStartMin;
    return s;
}

}  // namespace chaingen::world
