#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/chain.hpp"
#include "chaingen/spatial.hpp"

namespace chaingen::eval {

enum class ViolationType { ordering, overlap, travel_infeasible, opening_hours, category, home_anchor };

std::string_view to_string(ViolationType t) noexcept;

struct Violation {
    ViolationType type = ViolationType::ordering;
    std::vector<std::size_t> records;  // indices into the chain
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> notes;

    bool ok() const noexcept { return violations.empty(); }
    std::map<std::string, std::size_t> counts() const;
};

nlohmann::json to_json(const ValidationReport& r);

struct ValidationOptions {
    /// Modes used to re-plan each leg; empty means the fastest of all modes.
    std::vector<TravelMode> modes;
    /// Home location to check the first and last records against.
    std::optional<GeoPoint> home;
    bool require_home_anchor = true;
    double home_tolerance_m = 50.0;
};

/// Feasibility checks: ordering, overlap, travel time against the gap
/// between consecutive records, opening hours, category agreement with the
/// referenced POI, and home anchoring. Violations are data, never thrown.
ValidationReport validate_chain(const ActivityChain& chain, const spatial::SpatialWorld& world,
                                const ValidationOptions& options = {});

/// Options derived from a persona (modes, home, anchoring flag).
ValidationOptions options_for(const Persona& persona);

}  // namespace chaingen::eval
