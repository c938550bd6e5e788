#include "chaingen/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include "chaingen/error.hpp"

namespace chaingen::spatial {

using nlohmann::json;

std::size_t RoadNetwork::add_node(const std::string& id, const GeoPoint& location) {
    if (auto it = index_.find(id); it != index_.end()) return it->second;
    check_coordinate(location);
    const std::size_t i = nodes_.size();
    nodes_.push_back({id, location});
    adjacency_.emplace_back();
    transfer_.push_back(false);
    index_.emplace(id, i);
    return i;
}

void RoadNetwork::add_edge(const std::string& from, const std::string& to, double length_m,
                           const std::array<double, 4>& speed_kmh, bool oneway, double demand_weight) {
    const std::size_t a = node_index(from);
    const std::size_t b = node_index(to);
    if (length_m <= 0.0) length_m = haversine_distance(nodes_[a].location, nodes_[b].location);
    auto push = [&](std::size_t u, std::size_t v) {
        adjacency_[u].push_back(edges_.size());
        edges_.push_back(NetworkEdge{u, v, length_m, speed_kmh, demand_weight});
    };
    push(a, b);
    if (!oneway) push(b, a);
    if (speed_kmh[static_cast<std::size_t>(TravelMode::transit)] > 0.0) {
        transfer_[a] = true;
        transfer_[b] = true;
    }
}

std::optional<std::size_t> RoadNetwork::find_node(const std::string& id) const {
    if (auto it = index_.find(id); it != index_.end()) return it->second;
    return std::nullopt;
}

std::size_t RoadNetwork::node_index(const std::string& id) const {
    if (auto i = find_node(id)) return *i;
    throw Error(Errc::unknown_node, "network has no node '" + id + "'");
}

std::size_t RoadNetwork::nearest_node(const GeoPoint& p) const {
    if (nodes_.empty()) throw Error(Errc::empty_dataset, "road network has no nodes");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double d = haversine_distance(p, nodes_[i].location);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

TravelMode Route::main_mode() const {
    TravelMode best = TravelMode::walk;
    double best_d = -1.0;
    for (const auto& leg : legs) {
        if (leg.distance_m > best_d) {
            best_d = leg.distance_m;
            best = leg.mode;
        }
    }
    return best;
}

json to_json(const Route& r) {
    json legs = json::array();
    for (const auto& l : r.legs) {
        legs.push_back({{"mode", to_string(l.mode)},
                        {"waypoints", l.waypoints},
                        {"distance_m", l.distance_m},
                        {"duration_min", l.duration_min},
                        {"cost", l.cost}});
    }
    return {{"label", r.label},
            {"legs", legs},
            {"distance_m", r.distance_m},
            {"duration_min", r.duration_min},
            {"cost", r.cost}};
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

double edge_minutes(double length_m, double speed_kmh) { return length_m / 1000.0 / speed_kmh * 60.0; }

double edge_cost(const NetworkEdge& e, TravelMode m, const CostWeights& w) {
    const double km = e.length_m / 1000.0;
    return w.time * edge_minutes(e.length_m, e.speed(m)) + w.distance * km +
           w.money * w.fare_per_km[static_cast<std::size_t>(m)] * km;
}

// Dijkstra over (node, layer) states. Each layer is one travel mode; with
// more than one layer, zero-length transfer edges join layers at transfer nodes.
std::optional<Route> layered_search(const RoadNetwork& net, std::size_t origin, std::size_t destination,
                                    const std::vector<TravelMode>& layers, const CostWeights& w) {
    const std::size_t L = layers.size();
    const std::size_t n = net.node_count() * L;
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> pred_state(n, kNone);
    std::vector<std::size_t> pred_edge(n, kNone);  // kNone with a pred_state marks a transfer

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t l = 0; l < L; ++l) {
        dist[origin * L + l] = 0.0;
        heap.emplace(0.0, origin * L + l);
    }
    while (!heap.empty()) {
        const auto [d, s] = heap.top();
        heap.pop();
        if (d > dist[s]) continue;
        const std::size_t node = s / L;
        const std::size_t layer = s % L;
        const TravelMode mode = layers[layer];
        for (std::size_t ei : net.out_edges(node)) {
            const NetworkEdge& e = net.edges()[ei];
            if (!e.allows(mode)) continue;
            const std::size_t t = e.to * L + layer;
            const double nd = d + edge_cost(e, mode, w);
            if (nd < dist[t]) {
                dist[t] = nd;
                pred_state[t] = s;
                pred_edge[t] = ei;
                heap.emplace(nd, t);
            }
        }
        if (L > 1 && net.is_transfer(node)) {
            for (std::size_t other = 0; other < L; ++other) {
                if (other == layer) continue;
                const std::size_t t = node * L + other;
                const double nd = d + w.time * w.transfer_penalty_min;
                if (nd < dist[t]) {
                    dist[t] = nd;
                    pred_state[t] = s;
                    pred_edge[t] = kNone;
                    heap.emplace(nd, t);
                }
            }
        }
    }

    std::size_t end_state = kNone;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t s = destination * L + l;
        if (std::isfinite(dist[s]) && (end_state == kNone || dist[s] < dist[end_state])) end_state = s;
    }
    if (end_state == kNone) return std::nullopt;

    // Walk back to the origin, then assemble legs forward.
    struct Step {
        std::size_t edge;
        TravelMode mode;
        bool transfer;
    };
    std::vector<Step> steps;
    for (std::size_t s = end_state; pred_state[s] != kNone; s = pred_state[s]) {
        steps.push_back({pred_edge[s], layers[s % L], pred_edge[s] == kNone});
    }
    std::reverse(steps.begin(), steps.end());

    Route route;
    double pending_penalty = 0.0;
    for (const Step& st : steps) {
        if (st.transfer) {
            pending_penalty += w.transfer_penalty_min;
            continue;
        }
        const NetworkEdge& e = net.edges()[st.edge];
        if (route.legs.empty() || route.legs.back().mode != st.mode) {
            RouteLeg leg;
            leg.mode = st.mode;
            leg.waypoints.push_back(net.node(e.from).id);
            leg.duration_min = pending_penalty;
            leg.cost = w.time * pending_penalty;
            pending_penalty = 0.0;
            route.legs.push_back(std::move(leg));
        }
        RouteLeg& leg = route.legs.back();
        leg.waypoints.push_back(net.node(e.to).id);
        leg.distance_m += e.length_m;
        leg.duration_min += edge_minutes(e.length_m, e.speed(st.mode));
        leg.cost += edge_cost(e, st.mode, w);
    }
    for (const auto& leg : route.legs) {
        route.distance_m += leg.distance_m;
        route.duration_min += leg.duration_min;
        route.cost += leg.cost;
    }
    for (std::size_t i = 0; i < L; ++i) {
        if (i) route.label += "+";
        route.label += to_string(layers[i]);
    }
    return route;
}

}  // namespace

std::vector<Route> route_candidates(const RoadNetwork& net, std::size_t origin, std::size_t destination,
                                    const std::vector<TravelMode>& modes, const CostWeights& weights) {
    if (modes.empty()) throw Error(Errc::unknown_mode, "at least one travel mode is required");
    if (origin >= net.node_count()) throw Error(Errc::unknown_node, "origin index out of range");
    if (destination >= net.node_count()) throw Error(Errc::unknown_node, "destination index out of range");

    std::vector<TravelMode> unique;
    for (TravelMode m : modes) {
        if (std::find(unique.begin(), unique.end(), m) == unique.end()) unique.push_back(m);
    }
    std::vector<Route> out;
    for (TravelMode m : unique) {
        if (auto r = layered_search(net, origin, destination, {m}, weights)) out.push_back(std::move(*r));
    }
    const bool has_walk = std::find(unique.begin(), unique.end(), TravelMode::walk) != unique.end();
    if (has_walk) {
        for (TravelMode m : unique) {
            if (m == TravelMode::walk) continue;
            if (auto r = layered_search(net, origin, destination, {TravelMode::walk, m}, weights)) {
                out.push_back(std::move(*r));
            }
        }
    }
    return out;
}

Route route_plan(const RoadNetwork& net, std::size_t origin, std::size_t destination,
                 const std::vector<TravelMode>& modes, const CostWeights& weights) {
    if (modes.empty()) throw Error(Errc::unknown_mode, "at least one travel mode is required");
    if (origin == destination) {
        if (origin >= net.node_count()) throw Error(Errc::unknown_node, "origin index out of range");
        Route r;
        r.label = std::string(to_string(modes.front()));
        return r;
    }
    auto candidates = route_candidates(net, origin, destination, modes, weights);
    if (candidates.empty()) {
        throw Error(Errc::unreachable_destination,
                    "no route from '" + net.node(origin).id + "' to '" + net.node(destination).id + "'");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i].cost < candidates[best].cost) best = i;
    }
    return std::move(candidates[best]);
}

Route travel_between(const RoadNetwork& net, const GeoPoint& from, const GeoPoint& to,
                     const std::vector<TravelMode>& modes, const CostWeights& weights) {
    check_coordinate(from);
    check_coordinate(to);
    if (from == to) {
        Route r;
        r.label = "stay";
        return r;
    }
    const std::size_t a = net.nearest_node(from);
    const std::size_t b = net.nearest_node(to);
    Route core = route_plan(net, a, b, modes, weights);

    auto walk_leg = [&](const std::string& p, const std::string& q, double meters) {
        RouteLeg leg;
        leg.mode = TravelMode::walk;
        leg.waypoints = {p, q};
        leg.distance_m = meters;
        leg.duration_min = edge_minutes(meters, kWalkSpeedKmh);
        leg.cost = weights.time * leg.duration_min + weights.distance * meters / 1000.0;
        return leg;
    };

    Route out;
    out.label = a == b ? "walk" : core.label;
    if (const double access = haversine_distance(from, net.node(a).location); access > 0.0) {
        out.legs.push_back(walk_leg("origin", net.node(a).id, access));
    }
    for (auto& leg : core.legs) out.legs.push_back(std::move(leg));
    if (const double egress = haversine_distance(net.node(b).location, to); egress > 0.0) {
        out.legs.push_back(walk_leg(net.node(b).id, "destination", egress));
    }
    for (const auto& leg : out.legs) {
        out.distance_m += leg.distance_m;
        out.duration_min += leg.duration_min;
        out.cost += leg.cost;
    }
    return out;
}

// --- traffic prediction ---

double DemandProfile::base(double t_min) const {
    double value = 0.0;
    for (const auto& [from, demand] : steps) {
        if (from <= t_min) value = demand;
        else break;
    }
    return value;
}

double DemandProfile::impact(double t_min) const {
    double m = 1.0;
    for (const auto& e : events) {
        if (t_min >= e.from_min && t_min < e.to_min) m *= e.multiplier;
    }
    return m;
}

double congested_speed(double free_flow_kmh, double density, const TrafficParams& p) {
    return free_flow_kmh * std::max(p.min_speed_ratio, 1.0 - density / p.jam_density);
}

namespace {

TimedPath drive_path(const RoadNetwork& net, std::size_t origin, std::size_t destination,
                     const std::vector<double>& speed_by_edge) {
    TimedPath out;
    out.origin = origin;
    out.destination = destination;
    std::vector<double> dist(net.node_count(), std::numeric_limits<double>::infinity());
    std::vector<std::size_t> pred(net.node_count(), kNone);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[origin] = 0.0;
    heap.emplace(0.0, origin);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (std::size_t ei : net.out_edges(u)) {
            const NetworkEdge& e = net.edges()[ei];
            if (speed_by_edge[ei] <= 0.0) continue;
            const double nd = d + edge_minutes(e.length_m, speed_by_edge[ei]);
            if (nd < dist[e.to]) {
                dist[e.to] = nd;
                pred[e.to] = ei;
                heap.emplace(nd, e.to);
            }
        }
    }
    if (!std::isfinite(dist[destination])) return out;
    out.reachable = true;
    out.duration_min = dist[destination];
    std::vector<std::string> rev{net.node(destination).id};
    for (std::size_t v = destination; pred[v] != kNone; v = net.edges()[pred[v]].from) {
        rev.push_back(net.node(net.edges()[pred[v]].from).id);
    }
    out.nodes.assign(rev.rbegin(), rev.rend());
    return out;
}

}  // namespace

TrafficPrediction traffic_predict(const RoadNetwork& net, const BoundingBox& area, double start_time_min,
                                  double horizon_min, double dt_min, const DemandProfile& demand,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& od_pairs,
                                  const TrafficParams& params) {
    if (!(horizon_min > 0.0) || !(dt_min > 0.0)) {
        throw Error(Errc::invalid_horizon, "horizon and time step must be positive");
    }
    for (const auto& [o, d] : od_pairs) {
        if (o >= net.node_count() || d >= net.node_count()) throw Error(Errc::unknown_node, "od pair out of range");
    }

    std::vector<std::size_t> segments;
    for (std::size_t i = 0; i < net.edges().size(); ++i) {
        const NetworkEdge& e = net.edges()[i];
        if (e.allows(TravelMode::drive) && area.contains(net.node(e.from).location) &&
            area.contains(net.node(e.to).location)) {
            segments.push_back(i);
        }
    }

    auto clamp_density = [&](double rho) { return std::clamp(rho, 0.0, params.jam_density); };
    std::vector<double> density(segments.size());
    const double initial = demand.at(start_time_min);
    for (std::size_t s = 0; s < segments.size(); ++s) {
        density[s] = clamp_density(initial * net.edges()[segments[s]].demand_weight);
    }

    std::vector<double> speed_by_edge(net.edges().size());
    for (std::size_t i = 0; i < net.edges().size(); ++i) speed_by_edge[i] = net.edges()[i].speed(TravelMode::drive);

    const double relax = std::min(1.0, dt_min / params.relaxation_min);
    TrafficPrediction out;
    for (double t = 0.0; t <= horizon_min + 1e-9; t += dt_min) {
        const double load = demand.at(start_time_min + t);
        TrafficSnapshot snap;
        snap.t_min = t;
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const NetworkEdge& e = net.edges()[segments[s]];
            density[s] = clamp_density(density[s] + relax * (load * e.demand_weight - density[s]));
            const double v = congested_speed(e.speed(TravelMode::drive), density[s], params);
            speed_by_edge[segments[s]] = v;
            snap.segments.push_back({segments[s], density[s], v});
        }
        for (const auto& [o, d] : od_pairs) {
            TimedPath p = drive_path(net, o, d, speed_by_edge);
            p.t_min = t;
            out.paths.push_back(std::move(p));
        }
        out.snapshots.push_back(std::move(snap));
    }
    return out;
}

}  // namespace chaingen::spatial
