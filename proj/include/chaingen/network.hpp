#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/types.hpp"

namespace chaingen::spatial {

struct NetworkNode {
    std::string id;
    GeoPoint location;
};

struct NetworkEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    double length_m = 0.0;
    /// km/h per TravelMode (index = enum value); 0 means the mode cannot use the edge.
    std::array<double, 4> speed_kmh{};
    /// Share of area demand loaded onto this segment in traffic prediction.
    double demand_weight = 1.0;

    double speed(TravelMode m) const noexcept { return speed_kmh[static_cast<std::size_t>(m)]; }
    bool allows(TravelMode m) const noexcept { return speed(m) > 0.0; }
};

/// Directed multimodal road graph. Nodes incident to a transit edge act as
/// transfer points between walking and the other modes.
class RoadNetwork {
public:
    std::size_t add_node(const std::string& id, const GeoPoint& location);
    /// Adds from->to (and to->from unless oneway). length <= 0 uses the haversine length.
    void add_edge(const std::string& from, const std::string& to, double length_m,
                  const std::array<double, 4>& speed_kmh, bool oneway = false, double demand_weight = 1.0);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    const std::vector<NetworkNode>& nodes() const noexcept { return nodes_; }
    const std::vector<NetworkEdge>& edges() const noexcept { return edges_; }
    const std::vector<std::size_t>& out_edges(std::size_t node) const { return adjacency_.at(node); }
    const NetworkNode& node(std::size_t i) const { return nodes_.at(i); }
    /// Throws unknown_node.
    std::size_t node_index(const std::string& id) const;
    std::optional<std::size_t> find_node(const std::string& id) const;
    bool is_transfer(std::size_t node) const { return transfer_.at(node); }
    /// Nearest node by great-circle distance. Throws empty_dataset on an empty network.
    std::size_t nearest_node(const GeoPoint& p) const;

private:
    std::vector<NetworkNode> nodes_;
    std::vector<NetworkEdge> edges_;
    std::vector<std::vector<std::size_t>> adjacency_;
    std::vector<bool> transfer_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Weighted criteria for route cost: time (per minute), distance (per km) and money.
struct CostWeights {
    double time = 1.0;
    double distance = 0.0;
    double money = 2.0;
    /// Monetary fare per km by mode.
    std::array<double, 4> fare_per_km{0.0, 0.15, 0.6, 0.0};
    /// Minutes charged per mode switch.
    double transfer_penalty_min = 0.0;
};

struct RouteLeg {
    TravelMode mode = TravelMode::walk;
    std::vector<std::string> waypoints;
    double distance_m = 0.0;
    double duration_min = 0.0;
    double cost = 0.0;
};

struct Route {
    std::string label;  // e.g. "walk", "walk+transit"
    std::vector<RouteLeg> legs;
    double distance_m = 0.0;
    double duration_min = 0.0;
    double cost = 0.0;

    /// Mode covering the most distance, used to tag a chain's travel legs.
    TravelMode main_mode() const;
};

nlohmann::json to_json(const Route& r);

/// One route per requested mode plus a walk+X hybrid for each other mode when
/// walking is requested. Unreachable candidates are omitted.
/// Throws unknown_node, unknown_mode (empty mode list).
std::vector<Route> route_candidates(const RoadNetwork& net, std::size_t origin, std::size_t destination,
                                    const std::vector<TravelMode>& modes, const CostWeights& weights);

/// Minimum weighted-cost candidate (first generated wins ties).
/// origin == destination gives an empty zero-duration route.
/// Throws unreachable_destination.
Route route_plan(const RoadNetwork& net, std::size_t origin, std::size_t destination,
                 const std::vector<TravelMode>& modes, const CostWeights& weights);

/// Point-to-point travel: walking access to the nearest node, a network route,
/// and walking egress. Identical points give a zero route.
Route travel_between(const RoadNetwork& net, const GeoPoint& from, const GeoPoint& to,
                     const std::vector<TravelMode>& modes, const CostWeights& weights);

inline constexpr double kWalkSpeedKmh = 4.8;

// --- traffic prediction ---

struct EventWindow {
    double from_min = 0.0;
    double to_min = 0.0;
    double multiplier = 1.0;
};

/// Piecewise-constant demand (vehicles/km) plus event multipliers.
struct DemandProfile {
    std::vector<std::pair<double, double>> steps;  // (from minute, demand), sorted by minute
    std::vector<EventWindow> events;

    double base(double t_min) const;
    double impact(double t_min) const;
    double at(double t_min) const { return base(t_min) * impact(t_min); }
};

struct TrafficParams {
    double jam_density = 150.0;  // vehicles/km
    double min_speed_ratio = 0.05;
    double relaxation_min = 15.0;
};

/// Monotone congestion law: free_flow * max(eps, 1 - density / jam).
double congested_speed(double free_flow_kmh, double density, const TrafficParams& p);

struct SegmentState {
    std::size_t edge = 0;
    double density = 0.0;
    double speed_kmh = 0.0;
};

struct TrafficSnapshot {
    double t_min = 0.0;
    std::vector<SegmentState> segments;
};

struct TimedPath {
    double t_min = 0.0;
    std::size_t origin = 0;
    std::size_t destination = 0;
    std::vector<std::string> nodes;
    double duration_min = 0.0;
    bool reachable = false;
};

struct TrafficPrediction {
    std::vector<TrafficSnapshot> snapshots;
    std::vector<TimedPath> paths;  // per snapshot, per od pair
};

struct BoundingBox {
    double min_lon = -180.0, min_lat = -90.0, max_lon = 180.0, max_lat = 90.0;
    bool contains(const GeoPoint& p) const {
        return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
    }
};

/// Steps t = 0, dt, ... <= horizon. Driveable segments inside `area` relax
/// toward the demand at start_time + t and update speed through the
/// congestion law; drive paths for each od pair are recomputed on the
/// predicted speeds. Throws invalid_horizon.
TrafficPrediction traffic_predict(const RoadNetwork& net, const BoundingBox& area, double start_time_min,
                                  double horizon_min, double dt_min, const DemandProfile& demand,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& od_pairs,
                                  const TrafficParams& params = {});

}  // namespace chaingen::spatial
