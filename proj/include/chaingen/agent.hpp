#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/chain.hpp"
#include "chaingen/environment.hpp"
#include "chaingen/memory.hpp"
#include "chaingen/protocol.hpp"
#include "chaingen/reasoner.hpp"
#include "chaingen/spatial.hpp"
#include "chaingen/temporal.hpp"
#include "chaingen/validation.hpp"

namespace chaingen::agent {

struct AgentConfig {
    S4Weights weights;
    std::size_t candidate_k = 8;
    double search_radius_m = 3000.0;
    int max_repairs = 3;
    /// Throw unrepairable_chain instead of returning the chain with its report.
    bool strict = false;
    /// Wall-clock budget for one day; exceeded -> timeout.
    std::optional<std::chrono::milliseconds> deadline;
    /// A gap at least this long sends the agent home between activities.
    int home_return_gap_min = 120;
    /// Latest end (onward trip included) of a discretionary activity.
    int evening_limit_min = 1410;
};

nlohmann::json to_json(const AgentConfig& c);
/// Throws invalid_config.
AgentConfig agent_config_from_json(const nlohmann::json& j);
void validate(const AgentConfig& c);

/// Shared, read-only world services plus the persona-owned memory store.
struct Services {
    std::shared_ptr<const spatial::SpatialWorld> world;
    std::shared_ptr<const env::Environment> environment;
    std::shared_ptr<memory::MemoryStore> memory;  // fresh store when null
    std::shared_ptr<Reasoner> reasoner;            // heuristic when null
};

struct DayContext {
    int day = 0;
    std::uint64_t seed = 0;
    std::string date = "2024-05-06";
};

/// High-level block fixed in the structure-planning phase.
struct Block {
    Category category = Category::residence;
    std::string label;
    int planned_start = 0;
    int duration = 0;
    int window_start = 0;
    /// Fixed blocks end here; discretionary blocks must finish their onward
    /// trip by this minute.
    int window_end = 0;
    bool fixed = false;              // anchor commitment (work, school)
    std::string poi_id;              // fixed blocks only
    std::optional<GeoPoint> onward;  // next fixed location, home when absent
};

nlohmann::json to_json(const Block& b);

struct DecisionInput {
    Block block;
    int now = 0;
    GeoPoint location;
    temporal::Timeline commitments;  // fixed blocks still ahead
};

struct Decision {
    std::vector<StageRecord> stages;
    std::string poi_id;
    Category category = Category::residence;
    GeoPoint location;
    int start = 0;
    int end = 0;
    double travel_min = 0.0;
    std::optional<TravelMode> mode;
    double score = 0.0;
    bool safety_override = false;  // agent replaced an infeasible S5 choice
};

struct DayResult {
    ActivityChain chain;
    eval::ValidationReport report;
    int repairs = 0;
};

/// One persona's agent for one day: owns the session, bus and timeline.
class DayAgent {
public:
    DayAgent(Persona persona, DayContext context, Services services, AgentConfig config);

    /// Phase 2: fixed anchor blocks plus seeded discretionary tasks placed
    /// through the temporal scheduler.
    std::vector<Block> plan_structure();

    /// S1..S5 for one block. Throws no_feasible_option, reasoner_failure, timeout.
    Decision decide(const DecisionInput& input);

    /// Phases 1-6. Returns the best chain and its validation report.
    DayResult run();

    const protocol::Session& session() const noexcept { return session_; }
    const Persona& persona() const noexcept { return persona_; }

private:
    nlohmann::json ask(const std::string& tool, nlohmann::json payload, std::vector<std::string>& calls);
    void perform(const std::string& tool, nlohmann::json payload);
    StageOutput propose(Stage stage, const nlohmann::json& inputs);
    void complete(StageRecord& record);
    void check_deadline() const;
    double hours(int minute) const { return context_.day * 24.0 + minute / 60.0; }

    Persona persona_;
    DayContext context_;
    Services services_;
    AgentConfig config_;
    protocol::Bus bus_;
    protocol::Session session_;
    int clock_min_ = kDayStartMin;
    std::chrono::steady_clock::time_point started_;
};

/// Runs the six-phase day. Throws unrepairable_chain (strict), reasoner_failure, timeout.
DayResult run_day(const Persona& persona, const DayContext& context, const Services& services,
                  const AgentConfig& config = {});

/// Removes violating records (never the home anchors) and re-links the
/// neighbouring legs. Returns the number of records removed.
int repair_chain(ActivityChain& chain, const spatial::SpatialWorld& world, const eval::ValidationReport& report,
                 const std::vector<TravelMode>& modes);

}  // namespace chaingen::agent
