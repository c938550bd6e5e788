#include "chaingen/validation.hpp"

#include <cmath>
#include <limits>

#include "chaingen/error.hpp"
#include "chaingen/network.hpp"

namespace chaingen::eval {

using nlohmann::json;

std::string_view to_string(ViolationType t) noexcept {
    switch (t) {
        case ViolationType::ordering: return "ordering";
        case ViolationType::overlap: return "overlap";
        case ViolationType::travel_infeasible: return "travel_infeasible";
        case ViolationType::opening_hours: return "opening_hours";
        case ViolationType::category: return "category";
        case ViolationType::home_anchor: return "home_anchor";
    }
    return "?";
}

std::map<std::string, std::size_t> ValidationReport::counts() const {
    std::map<std::string, std::size_t> out;
    for (const auto& v : violations) ++out[std::string(to_string(v.type))];
    return out;
}

json to_json(const ValidationReport& r) {
    json vs = json::array();
    for (const auto& v : r.violations) {
        vs.push_back({{"type", to_string(v.type)}, {"records", v.records}, {"message", v.message}});
    }
    return {{"violations", vs}, {"notes", r.notes}, {"counts", r.counts()}};
}

ValidationOptions options_for(const Persona& persona) {
    ValidationOptions o;
    o.modes = persona.modes();
    o.home = persona.home;
    o.require_home_anchor = persona.home_anchored;
    return o;
}

namespace {

/// Minutes needed to get from a to b, or nullopt when no route exists.
std::optional<double> leg_minutes(const spatial::SpatialWorld& world, const GeoPoint& a, const GeoPoint& b,
                                  const std::vector<TravelMode>& modes) {
    try {
        if (!modes.empty()) return spatial::travel_between(world.network, a, b, modes, world.cost_weights).duration_min;
        std::optional<double> best;
        for (TravelMode m : kAllModes) {
            try {
                const double d = spatial::travel_between(world.network, a, b, {m}, world.cost_weights).duration_min;
                if (!best || d < *best) best = d;
            } catch (const Error&) {
            }
        }
        return best;
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

ValidationReport validate_chain(const ActivityChain& chain, const spatial::SpatialWorld& world,
                                const ValidationOptions& options) {
    ValidationReport report;
    const auto& recs = chain.records;
    if (recs.empty()) {
        report.notes.push_back("empty chain");
        return report;
    }
    auto add = [&](ViolationType t, std::vector<std::size_t> idx, std::string msg) {
        report.violations.push_back({t, std::move(idx), std::move(msg)});
    };

    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        if (r.end_min <= r.start_min) add(ViolationType::ordering, {i}, "record ends before it starts");
        if (i > 0) {
            const auto& p = recs[i - 1];
            if (r.start_min < p.start_min) {
                add(ViolationType::ordering, {i - 1, i}, "records out of time order");
            } else if (r.start_min < p.end_min) {
                add(ViolationType::overlap, {i - 1, i}, "records overlap");
            } else if (haversine_distance(p.location, r.location) > 1.0) {
                const auto need = leg_minutes(world, p.location, r.location, options.modes);
                const int gap = r.start_min - p.end_min;
                if (!need) {
                    add(ViolationType::travel_infeasible, {i - 1, i}, "no route between records");
                } else if (std::ceil(*need - 1e-9) > gap) {
                    add(ViolationType::travel_infeasible, {i - 1, i},
                        "leg needs " + std::to_string(static_cast<int>(std::ceil(*need))) + " min but gap is " +
                            std::to_string(gap));
                }
            }
        }
        if (!r.poi_id.empty()) {
            if (auto idx = world.pois.find(r.poi_id)) {
                const auto& poi = world.pois.at(*idx);
                if (poi.category != r.category) {
                    add(ViolationType::category, {i},
                        "record category " + std::string(to_string(r.category)) + " disagrees with POI '" + poi.id +
                            "' (" + std::string(to_string(poi.category)) + ")");
                }
                if (r.end_min > r.start_min && !poi.open_during(r.start_min, r.end_min)) {
                    add(ViolationType::opening_hours, {i}, "POI '" + poi.id + "' is closed during the visit");
                }
            } else {
                report.notes.push_back("record " + std::to_string(i) + " references unknown POI '" + r.poi_id + "'");
            }
        }
    }

    if (options.require_home_anchor) {
        for (std::size_t i : {std::size_t{0}, recs.size() - 1}) {
            const auto& r = recs[i];
            if (r.category != Category::residence) {
                add(ViolationType::home_anchor, {i}, i == 0 ? "chain does not start at home" : "chain does not end at home");
            } else if (options.home && haversine_distance(*options.home, r.location) > options.home_tolerance_m) {
                add(ViolationType::home_anchor, {i}, "residence record is away from the persona's home");
            }
            if (recs.size() == 1) break;
        }
        if (!options.home && recs.size() > 1 &&
            haversine_distance(recs.front().location, recs.back().location) > options.home_tolerance_m) {
            add(ViolationType::home_anchor, {0, recs.size() - 1}, "chain starts and ends at different homes");
        }
    }
    return report;
}

}  // namespace chaingen::eval
