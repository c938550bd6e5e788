#pragma once

#include <memory>
#include <string>

#include "chaingen/chain.hpp"
#include "chaingen/spatial.hpp"
#include "chaingen/world.hpp"

namespace fixture {

using namespace chaingen;

inline std::array<double, 4> speeds(double walk, double transit, double drive, double cycle) {
    return {walk, transit, drive, cycle};
}

/// n x n grid, `spacing_m` apart, walk/drive/cycle on every edge. Nodes are "r<row>c<col>".
inline spatial::RoadNetwork grid(int n, double spacing_m, GeoPoint origin = {8.50, 47.35}) {
    spatial::RoadNetwork net;
    auto id = [](int r, int c) { return "r" + std::to_string(r) + "c" + std::to_string(c); };
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) net.add_node(id(r, c), world::offset(origin, c * spacing_m, r * spacing_m));
    }
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            if (c + 1 < n) net.add_edge(id(r, c), id(r, c + 1), spacing_m, speeds(4.8, 0, 30, 15));
            if (r + 1 < n) net.add_edge(id(r, c), id(r + 1, c), spacing_m, speeds(4.8, 0, 30, 15));
        }
    }
    return net;
}

inline spatial::PoiRecord poi(std::string id, Category cat, std::string label, GeoPoint at, int open = 0,
                              int close = 1440, double rating = 4.0) {
    spatial::PoiRecord p;
    p.id = id;
    p.name = id;
    p.category = cat;
    p.label = std::move(label);
    p.location = at;
    p.open_min = open;
    p.close_min = close;
    p.rating = rating;
    return p;
}

/// A home and a workplace 1 km apart on a 5 x 5 grid. With `severed`, the
/// workplace sits next to an isolated node far from the grid.
inline std::shared_ptr<spatial::SpatialWorld> two_poi_world(bool severed = false) {
    auto w = std::make_shared<spatial::SpatialWorld>();
    const GeoPoint origin{8.50, 47.35};
    w->network = grid(5, 250.0, origin);
    GeoPoint work = world::offset(origin, 1000.0, 0.0);
    if (severed) {
        work = world::offset(origin, 20000.0, 20000.0);
        w->network.add_node("island", work);
    }
    w->pois = spatial::PoiDataset({poi("home", Category::residence, "residence", origin),
                                   poi("office", Category::employment, "office", work, 420, 1260)});
    return w;
}

inline Persona worker(const spatial::SpatialWorld& w) {
    Persona p;
    p.id = "worker";
    p.occupation = "worker";
    p.home = w.pois.by_id("home").location;
    p.home_poi_id = "home";
    p.anchor = w.pois.by_id("office").location;
    p.anchor_poi_id = "office";
    p.anchor_category = Category::employment;
    p.mode_propensity = {1.0, 0.0, 0.0, 1.0};
    return p;
}

inline ActivityRecord record(Category c, std::string poi_id, GeoPoint at, int start, int end,
                             std::optional<TravelMode> mode = std::nullopt, double travel = 0.0) {
    ActivityRecord r;
    r.category = c;
    r.poi_id = std::move(poi_id);
    r.location = at;
    r.start_min = start;
    r.end_min = end;
    r.mode = mode;
    r.travel_min = travel;
    return r;
}

}  // namespace fixture
