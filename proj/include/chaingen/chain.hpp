#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/types.hpp"

namespace chaingen {

// Planning clock: a day runs from 05:00 to 05:00 the next morning, in
// minutes since the calendar day's midnight.
inline constexpr int kDayStartMin = 300;
inline constexpr int kDayEndMin = 1740;

enum class Stage { situational_awareness, constraints, options, evaluation, decision };

inline constexpr std::array<Stage, 5> kAllStages = {Stage::situational_awareness, Stage::constraints, Stage::options,
                                                    Stage::evaluation, Stage::decision};

std::string_view to_string(Stage s) noexcept;
/// "S1".."S5".
std::string_view stage_code(Stage s) noexcept;
Stage parse_stage(std::string_view name);

struct StageRecord {
    Stage stage = Stage::situational_awareness;
    nlohmann::json inputs = nlohmann::json::object();
    std::vector<std::string> tool_calls;  // ids of the envelopes sent during this stage
    nlohmann::json output = nlohmann::json::object();
    std::string rationale;
    bool fallback = false;  // heuristic backend stood in for the configured one
};

struct ActivityRecord {
    Category category = Category::residence;
    std::string poi_id;
    GeoPoint location;
    int start_min = 0;
    int end_min = 0;
    std::optional<TravelMode> mode;  // mode of the leg arriving here
    double travel_min = 0.0;         // duration of that leg
    std::vector<std::string> companions;
    std::vector<StageRecord> stages;  // the S1..S5 bundle that placed this record, if any
};

struct ActivityChain {
    std::string persona_id;
    int day = 0;
    std::uint64_t seed = 0;
    std::vector<ActivityRecord> records;
    std::vector<std::string> notes;
};

struct Persona {
    std::string id;
    std::string age_band = "30-44";
    std::string occupation = "worker";  // worker, student, retiree, homemaker, unemployed
    std::string household_role = "adult";
    std::string income_tier = "middle";
    GeoPoint home;
    std::string home_poi_id;
    std::optional<GeoPoint> anchor;  // workplace or school
    std::string anchor_poi_id;
    Category anchor_category = Category::employment;
    std::array<double, kCategoryCount> preferences{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    std::array<double, 4> mode_propensity{1.0, 1.0, 0.0, 0.0};  // walk, transit, drive, cycle
    bool home_anchored = true;  // chain must start and end at home

    double preference(Category c) const noexcept { return preferences[static_cast<std::size_t>(c)]; }
    std::vector<TravelMode> modes() const;
};

/// Throws invalid_profile.
void validate(const Persona& p);

nlohmann::json to_json(const StageRecord& s);
StageRecord stage_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActivityRecord& r, bool with_stages = true);
ActivityRecord activity_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActivityChain& c, bool with_stages = true);
/// Throws parse_error.
ActivityChain chain_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Persona& p);
Persona persona_from_json(const nlohmann::json& j);

/// One JSONL line per chain. Throws io_failure / parse_error (with line number).
std::vector<ActivityChain> read_chains_jsonl(const std::string& path);
std::vector<ActivityChain> parse_chains_jsonl(const std::string& text);

}  // namespace chaingen
