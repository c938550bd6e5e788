#include "chaingen/chain.hpp"

#include <fstream>
#include <sstream>

#include "chaingen/error.hpp"

namespace chaingen {

using nlohmann::json;

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::situational_awareness: return "situational_awareness";
        case Stage::constraints: return "constraints";
        case Stage::options: return "options";
        case Stage::evaluation: return "evaluation";
        case Stage::decision: return "decision";
    }
    return "?";
}

std::string_view stage_code(Stage s) noexcept {
    static constexpr std::string_view codes[] = {"S1", "S2", "S3", "S4", "S5"};
    return codes[static_cast<std::size_t>(s)];
}

Stage parse_stage(std::string_view name) {
    for (Stage s : kAllStages) {
        if (name == to_string(s) || name == stage_code(s)) return s;
    }
    throw Error(Errc::parse_error, "unknown stage '" + std::string(name) + "'");
}

std::vector<TravelMode> Persona::modes() const {
    std::vector<TravelMode> out;
    for (TravelMode m : kAllModes) {
        if (mode_propensity[static_cast<std::size_t>(m)] > 0.0) out.push_back(m);
    }
    if (out.empty()) out.push_back(TravelMode::walk);
    return out;
}

void validate(const Persona& p) {
    if (p.id.empty()) throw Error(Errc::invalid_profile, "persona id must be nonempty");
    for (double w : p.preferences) {
        if (!(w >= 0.0)) throw Error(Errc::invalid_profile, "preference weights must be nonnegative");
    }
    for (double w : p.mode_propensity) {
        if (!(w >= 0.0)) throw Error(Errc::invalid_profile, "mode propensities must be nonnegative");
    }
    try {
        check_coordinate(p.home);
        if (p.anchor) check_coordinate(*p.anchor);
    } catch (const Error& e) {
        throw Error(Errc::invalid_profile, e.detail());
    }
}

json to_json(const StageRecord& s) {
    json j = {{"stage", stage_code(s.stage)},
              {"inputs", s.inputs},
              {"tool_calls", s.tool_calls},
              {"output", s.output},
              {"rationale", s.rationale}};
    if (s.fallback) j["fallback"] = true;
    return j;
}

StageRecord stage_record_from_json(const json& j) {
    StageRecord s;
    s.stage = parse_stage(j.at("stage").get<std::string>());
    s.inputs = j.value("inputs", json::object());
    s.tool_calls = j.value("tool_calls", std::vector<std::string>{});
    s.output = j.value("output", json::object());
    s.rationale = j.value("rationale", "");
    s.fallback = j.value("fallback", false);
    return s;
}

json to_json(const ActivityRecord& r, bool with_stages) {
    json j = {{"category", to_string(r.category)},
              {"poi_id", r.poi_id},
              {"lon", r.location.lon},
              {"lat", r.location.lat},
              {"start", r.start_min},
              {"end", r.end_min},
              {"travel_min", r.travel_min}};
    if (r.mode) j["mode"] = to_string(*r.mode);
    if (!r.companions.empty()) j["companions"] = r.companions;
    if (with_stages && !r.stages.empty()) {
        json stages = json::array();
        for (const auto& s : r.stages) stages.push_back(to_json(s));
        j["stages"] = stages;
    }
    return j;
}

ActivityRecord activity_record_from_json(const json& j) {
    ActivityRecord r;
    r.category = parse_category(j.at("category").get<std::string>());
    r.poi_id = j.value("poi_id", "");
    r.location = {j.at("lon").get<double>(), j.at("lat").get<double>()};
    r.start_min = j.at("start").get<int>();
    r.end_min = j.at("end").get<int>();
    r.travel_min = j.value("travel_min", 0.0);
    if (j.contains("mode")) r.mode = parse_mode(j.at("mode").get<std::string>());
    r.companions = j.value("companions", std::vector<std::string>{});
    for (const auto& s : j.value("stages", json::array())) r.stages.push_back(stage_record_from_json(s));
    return r;
}

json to_json(const ActivityChain& c, bool with_stages) {
    json records = json::array();
    for (const auto& r : c.records) records.push_back(to_json(r, with_stages));
    return {{"persona_id", c.persona_id}, {"day", c.day}, {"seed", c.seed}, {"records", records}, {"notes", c.notes}};
}

ActivityChain chain_from_json(const json& j) {
    try {
        ActivityChain c;
        c.persona_id = j.value("persona_id", "");
        c.day = j.value("day", 0);
        c.seed = j.value("seed", std::uint64_t{0});
        for (const auto& r : j.at("records")) c.records.push_back(activity_record_from_json(r));
        c.notes = j.value("notes", std::vector<std::string>{});
        return c;
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, std::string("chain: ") + e.what());
    }
}

json to_json(const Persona& p) {
    json prefs = json::object();
    for (Category c : kAllCategories) prefs[std::string(to_string(c))] = p.preference(c);
    json modes = json::object();
    for (TravelMode m : kAllModes) modes[std::string(to_string(m))] = p.mode_propensity[static_cast<std::size_t>(m)];
    json j = {{"id", p.id},
              {"age_band", p.age_band},
              {"occupation", p.occupation},
              {"household_role", p.household_role},
              {"income_tier", p.income_tier},
              {"home", {{"lon", p.home.lon}, {"lat", p.home.lat}}},
              {"home_poi_id", p.home_poi_id},
              {"preferences", prefs},
              {"mode_propensity", modes},
              {"home_anchored", p.home_anchored}};
    if (p.anchor) {
        j["anchor"] = {{"lon", p.anchor->lon}, {"lat", p.anchor->lat}};
        j["anchor_poi_id"] = p.anchor_poi_id;
        j["anchor_category"] = to_string(p.anchor_category);
    }
    return j;
}

Persona persona_from_json(const json& j) {
    Persona p;
    try {
        p.id = j.at("id").get<std::string>();
        p.age_band = j.value("age_band", p.age_band);
        p.occupation = j.value("occupation", p.occupation);
        p.household_role = j.value("household_role", p.household_role);
        p.income_tier = j.value("income_tier", p.income_tier);
        p.home = {j.at("home").at("lon").get<double>(), j.at("home").at("lat").get<double>()};
        p.home_poi_id = j.value("home_poi_id", "");
        if (j.contains("anchor")) {
            p.anchor = GeoPoint{j.at("anchor").at("lon").get<double>(), j.at("anchor").at("lat").get<double>()};
            p.anchor_poi_id = j.value("anchor_poi_id", "");
            p.anchor_category = parse_category(j.value("anchor_category", "employment"));
        }
        const json preferences_json = j.value("preferences", json::object());
        for (const auto& [key, value] : preferences_json.items()) {
            p.preferences[static_cast<std::size_t>(parse_category(key))] = value.get<double>();
        }
        const json mode_propensity_json = j.value("mode_propensity", json::object());
        for (const auto& [key, value] : mode_propensity_json.items()) {
            p.mode_propensity[static_cast<std::size_t>(parse_mode(key))] = value.get<double>();
        }
        p.home_anchored = j.value("home_anchored", true);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_profile, std::string("persona: ") + e.what());
    }
    validate(p);
    return p;
}

std::vector<ActivityChain> parse_chains_jsonl(const std::string& text) {
    std::vector<ActivityChain> out;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(chain_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw Error(Errc::parse_error, "line " + std::to_string(n) + ": " + e.what(), e.byte);
        } catch (const Error& e) {
            throw Error(Errc::parse_error, "line " + std::to_string(n) + ": " + e.detail());
        }
    }
    return out;
}

std::vector<ActivityChain> read_chains_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_chains_jsonl(ss.str());
}

}  // namespace chaingen
