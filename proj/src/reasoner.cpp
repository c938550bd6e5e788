#include "chaingen/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "chaingen/error.hpp"
#include "chaingen/types.hpp"

namespace chaingen::agent {

using nlohmann::json;

json to_json(const S4Weights& w) {
    return {{"time", w.time},
            {"distance", w.distance},
            {"value", w.value},
            {"preference", w.preference},
            {"habit", w.habit}};
}

S4Weights s4_weights_from_json(const json& j) {
    S4Weights w;
    if (!j.is_object()) return w;
    w.time = j.value("time", w.time);
    w.distance = j.value("distance", w.distance);
    w.value = j.value("value", w.value);
    w.preference = j.value("preference", w.preference);
    w.habit = j.value("habit", w.habit);
    return w;
}

double habit_strength(const json& memories) {
    double mass = 0.0;
    if (memories.is_array()) {
        for (const auto& m : memories) {
            const double rel = std::max(0.0, m.value("relevance", 0.0));
            const double emotion = std::clamp(m.value("emotion", 0.0), -1.0, 1.0);
            mass += rel * (1.0 + emotion) / 2.0;
        }
    }
    return 1.0 - std::exp(-mass);
}

OptionFactors option_factors(const json& o) {
    OptionFactors f;
    f.time = 1.0 - std::clamp(o.value("travel_min", 0.0) / 60.0, 0.0, 1.0);
    const double radius = o.value("search_radius_m", 3000.0);
    f.distance = radius > 0.0 ? 1.0 - std::clamp(o.value("distance_m", 0.0) / radius, 0.0, 1.0) : 0.0;
    double value = std::clamp(o.value("rating", 0.0) / 5.0, 0.0, 1.0);
    if (o.value("outdoor", false) && o.value("wet", false)) value *= 0.6;
    f.value = value;
    f.preference = std::clamp(o.value("category_preference", 0.0), 0.0, 1.0);
    f.habit = o.contains("habit") ? std::clamp(o.at("habit").get<double>(), 0.0, 1.0)
                                  : habit_strength(o.value("memories", json::array()));
    return f;
}

double option_score(const OptionFactors& f, const S4Weights& w) {
    return w.time * f.time + w.distance * f.distance + w.value * f.value + w.preference * f.preference +
           w.habit * f.habit;
}

bool open_window_fits(int open_min, int close_min, int start_min, int end_min) {
    if (close_min - open_min >= 1440) return true;
    if (start_min >= 1440) {
        start_min -= 1440;
        end_min -= 1440;
    }
    return open_min <= start_min && end_min <= close_min;
}

std::string screen_candidate(const json& c, const json& constraints) {
    if (!c.value("reachable", true)) return "unreachable";
    const int start = c.at("start").get<int>();
    const int end = c.at("end").get<int>();
    if (!open_window_fits(c.value("open_min", 0), c.value("close_min", 1440), start, end)) return "closed";
    if (start < constraints.value("earliest_start", 0)) return "too_early";
    const double onward = c.value("onward_min", 0.0);
    if (end + static_cast<int>(std::ceil(onward)) > constraints.value("latest_end", kDayEndMin)) return "too_late";
    for (const auto& b : constraints.value("blocked", json::array())) {
        if (start < b.at(1).get<int>() && end > b.at(0).get<int>()) return "conflict";
    }
    if (c.contains("location")) {
        const GeoPoint p{c.at("location").at("lon").get<double>(), c.at("location").at("lat").get<double>()};
        for (const auto& z : constraints.value("avoid_zones", json::array())) {
            const GeoPoint center{z.at("center").at("lon").get<double>(), z.at("center").at("lat").get<double>()};
            if (haversine_distance(center, p) <= z.at("radius_m").get<double>()) return "emergency_zone";
        }
    }
    return {};
}

namespace {

StageOutput situational(const json& in) {
    const json& block = in.at("block");
    const json& envs = in.value("environment", json::object());
    const json weather = envs.value("weather", json::object());
    const std::string condition = weather.value("condition", "clear");
    json habit = nullptr;
    double best = 0.0;
    const json masses = in.value("memory", json::object()).value("category_mass", json::object());
    for (const auto& [cat, mass] : masses.items()) {
        if (mass.get<double>() > best) {
            best = mass.get<double>();
            habit = cat;
        }
    }
    StageOutput out;
    out.output = {{"goal", "place a " + block.at("category").get<std::string>() + " activity"},
                  {"category", block.at("category")},
                  {"planned_start", block.at("planned_start")},
                  {"duration", block.at("duration")},
                  {"window", block.at("window")},
                  {"weather", condition},
                  {"wet", condition == "rain" || condition == "storm" || condition == "snow"},
                  {"crowd", envs.value("pedestrian_density", 0.0)},
                  {"emergencies", envs.value("emergencies", json::array()).size()},
                  {"habit_category", habit}};
    out.rationale = "at " + std::to_string(in.value("now", 0)) + " with " + condition + " weather, next block is " +
                    block.at("category").get<std::string>();
    return out;
}

StageOutput constraints(const json& in) {
    const json& s1 = in.at("situation");
    const json forecast = in.value("forecast", json::object());
    json blocked = json::array();
    for (const auto& e : in.value("timeline", json::array())) {
        const int s = e.at("start").get<int>();
        blocked.push_back({s, s + e.at("duration").get<int>()});
    }
    json zones = json::array();
    for (const auto& z : forecast.value("emergencies", json::array())) {
        zones.push_back({{"center", z.at("center")}, {"radius_m", z.at("radius_m")}});
    }
    const std::string condition = forecast.value("weather", json::object()).value("condition", s1.value("weather", "clear"));
    StageOutput out;
    out.output = {{"earliest_start", s1.at("window").at(0)},
                  {"latest_end", s1.at("window").at(1)},
                  {"duration", s1.at("duration")},
                  {"blocked", blocked},
                  {"avoid_zones", zones},
                  {"wet", condition == "rain" || condition == "storm" || condition == "snow"},
                  {"forecast_confidence", forecast.value("confidence", 1.0)}};
    out.rationale = std::to_string(blocked.size()) + " fixed commitments, " + std::to_string(zones.size()) +
                    " zones to avoid";
    return out;
}

StageOutput options(const json& in) {
    const json& cons = in.at("constraints");
    json feasible = json::array();
    json rejected = json::array();
    for (const auto& c : in.at("candidates")) {
        const std::string reason = screen_candidate(c, cons);
        if (reason.empty()) {
            feasible.push_back(c.at("id"));
        } else {
            rejected.push_back({{"id", c.at("id")}, {"reason", reason}});
        }
    }
    StageOutput out;
    out.output = {{"feasible", feasible}, {"rejected", rejected}};
    out.rationale = std::to_string(feasible.size()) + " of " + std::to_string(in.at("candidates").size()) +
                    " candidates pass screening";
    return out;
}

StageOutput evaluation(const json& in) {
    const S4Weights w = s4_weights_from_json(in.value("weights", json::object()));
    json scores = json::array();
    for (const auto& o : in.at("options")) {
        const OptionFactors f = option_factors(o);
        scores.push_back({{"id", o.at("id")},
                          {"score", option_score(f, w)},
                          {"factors",
                           {{"time", f.time},
                            {"distance", f.distance},
                            {"value", f.value},
                            {"preference", f.preference},
                            {"habit", f.habit}}}});
    }
    std::stable_sort(scores.begin(), scores.end(), [](const json& a, const json& b) {
        const double sa = a.at("score").get<double>(), sb = b.at("score").get<double>();
        if (sa != sb) return sa > sb;
        return a.at("id").get<std::string>() < b.at("id").get<std::string>();
    });
    StageOutput out;
    out.output = {{"scores", scores}};
    out.rationale = scores.empty() ? "no options to score"
                                   : "best option " + scores.front().at("id").get<std::string>();
    return out;
}

StageOutput decision(const json& in) {
    const json& scores = in.at("scores");
    if (scores.empty()) throw Error(Errc::no_feasible_option, "no scored options");
    const std::string choice = scores.front().at("id").get<std::string>();
    json chosen;
    for (const auto& o : in.at("options")) {
        if (o.at("id") == choice) chosen = o;
    }
    if (chosen.is_null()) throw Error(Errc::no_feasible_option, "top-scored option missing from option list");
    const int end = chosen.at("end").get<int>();
    const int onward = static_cast<int>(std::ceil(chosen.value("onward_min", 0.0)));
    StageOutput out;
    out.output = {{"choice", choice},
                  {"start", chosen.at("start")},
                  {"end", end},
                  {"predicted", {{"slack_min", in.value("latest_end", kDayEndMin) - (end + onward)},
                                 {"next_free", end + onward}}}};
    out.rationale = "choose " + choice;
    return out;
}

}  // namespace

StageOutput HeuristicReasoner::propose(Stage stage, const json& inputs) {
    try {
        switch (stage) {
            case Stage::situational_awareness: return situational(inputs);
            case Stage::constraints: return constraints(inputs);
            case Stage::options: return options(inputs);
            case Stage::evaluation: return evaluation(inputs);
            case Stage::decision: return decision(inputs);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("stage inputs: ") + e.what());
    }
    throw Error(Errc::schema_violation, "unknown stage");
}

StageOutput LatencyReasoner::propose(Stage stage, const json& inputs) {
    std::this_thread::sleep_for(latency_);
    return inner_.propose(stage, inputs);
}

}  // namespace chaingen::agent
