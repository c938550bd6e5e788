#pragma once

#include <cstdint>
#include <memory>

#include "chaingen/environment.hpp"
#include "chaingen/spatial.hpp"

namespace chaingen::world {

struct WorldSpec {
    GeoPoint origin{8.50, 47.35};  // south-west corner of the grid
    int grid = 8;                   // nodes per side
    double spacing_m = 250.0;
    std::size_t poi_count = 50;
    std::uint64_t seed = 7;
};

/// Grid road network with two transit lines and a seeded POI set covering
/// every activity category except travel.
std::shared_ptr<spatial::SpatialWorld> make_synthetic_world(const WorldSpec& spec = {});

/// Seeded day scenario: weather script, crowd curve, one evening event.
env::Scenario make_synthetic_scenario(const WorldSpec& spec, std::uint64_t seed);

/// Point `east_m` / `north_m` meters from `origin` (local flat approximation).
GeoPoint offset(const GeoPoint& origin, double east_m, double north_m);

/// Geographic centre of a world's POIs.
GeoPoint centroid(const spatial::SpatialWorld& world);

}  // namespace chaingen::world
