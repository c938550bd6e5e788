#include "chaingen/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "chaingen/error.hpp"
#include "chaingen/spatial.hpp"

namespace chaingen::env {

using nlohmann::json;

std::string_view to_string(Mode m) noexcept {
    switch (m) {
        case Mode::historical: return "historical";
        case Mode::realtime: return "realtime";
        case Mode::predictive: return "predictive";
    }
    return "?";
}

std::string_view to_string(Scale s) noexcept {
    switch (s) {
        case Scale::macro: return "macro";
        case Scale::micro: return "micro";
        case Scale::venue: return "venue";
    }
    return "?";
}

Mode parse_mode(std::string_view name) {
    if (name == "historical") return Mode::historical;
    if (name == "realtime") return Mode::realtime;
    if (name == "predictive") return Mode::predictive;
    throw Error(Errc::unknown_env_mode, "unknown environment mode '" + std::string(name) + "'");
}

double CrowdCurve::at(double t_min) const {
    const double phase = 2.0 * std::numbers::pi * (t_min - peak_min) / period_min;
    return std::max(0.0, base + amplitude * std::cos(phase));
}

Weather Scenario::weather_at(double t_min) const {
    if (weather.empty()) return {};
    const WeatherSpan* current = &weather.front();
    for (const auto& span : weather) {
        if (span.from_min <= t_min) current = &span;
    }
    return current->weather;
}

// --- json ---

json to_json(const ZoneWindow& z) {
    return {{"name", z.name},
            {"from_min", z.from_min},
            {"to_min", z.to_min},
            {"center", spatial::point_to_json(z.center)},
            {"radius_m", z.radius_m},
            {"multiplier", z.multiplier}};
}

ZoneWindow zone_from_json(const json& j) {
    ZoneWindow z;
    z.name = j.value("name", "");
    z.from_min = j.at("from_min").get<double>();
    z.to_min = j.at("to_min").get<double>();
    z.center = spatial::point_from_json(j.at("center"));
    z.radius_m = j.value("radius_m", 500.0);
    z.multiplier = j.value("multiplier", 1.0);
    return z;
}

namespace {

json weather_json(const Weather& w) { return {{"condition", w.condition}, {"temperature_c", w.temperature_c}}; }

Weather weather_from_json(const json& j) {
    return {j.value("condition", "clear"), j.value("temperature_c", 20.0)};
}

json zones_json(const std::vector<ZoneWindow>& zs) {
    json arr = json::array();
    for (const auto& z : zs) arr.push_back(to_json(z));
    return arr;
}

std::vector<ZoneWindow> zones_from_json(const json& j) {
    std::vector<ZoneWindow> out;
    if (j.is_array()) {
        for (const auto& z : j) out.push_back(zone_from_json(z));
    }
    return out;
}

}  // namespace

json to_json(const EnvState& s) {
    return {{"weather", weather_json(s.weather)},
            {"pedestrian_density", s.pedestrian_density},
            {"events", zones_json(s.events)},
            {"emergencies", zones_json(s.emergencies)},
            {"confidence", s.confidence},
            {"scale_weights",
             {{"macro", s.scale_weights[0]}, {"micro", s.scale_weights[1]}, {"venue", s.scale_weights[2]}}}};
}

EnvState env_state_from_json(const json& j) {
    EnvState s;
    s.weather = weather_from_json(j.value("weather", json::object()));
    s.pedestrian_density = j.value("pedestrian_density", 0.0);
    s.events = zones_from_json(j.value("events", json::array()));
    s.emergencies = zones_from_json(j.value("emergencies", json::array()));
    s.confidence = j.value("confidence", 1.0);
    if (j.contains("scale_weights")) {
        const auto& w = j.at("scale_weights");
        s.scale_weights = {w.value("macro", 0.0), w.value("micro", 0.0), w.value("venue", 0.0)};
    }
    return s;
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    try {
        for (const auto& w : j.value("weather", json::array())) {
            s.weather.push_back({w.at("from_min").get<double>(), weather_from_json(w)});
        }
        std::stable_sort(s.weather.begin(), s.weather.end(),
                         [](const WeatherSpan& a, const WeatherSpan& b) { return a.from_min < b.from_min; });
        s.events = zones_from_json(j.value("events", json::array()));
        s.emergencies = zones_from_json(j.value("emergencies", json::array()));
        if (j.contains("crowd")) {
            const auto& c = j.at("crowd");
            s.crowd.base = c.value("base", s.crowd.base);
            s.crowd.amplitude = c.value("amplitude", s.crowd.amplitude);
            s.crowd.peak_min = c.value("peak_min", s.crowd.peak_min);
            s.crowd.period_min = c.value("period_min", s.crowd.period_min);
        }
        for (const auto& h : j.value("history", json::array())) {
            s.history.push_back({h.at("time_min").get<double>(), spatial::point_from_json(h.at("location")),
                                 env_state_from_json(h.at("state"))});
        }
        s.lambda_per_hour = j.value("lambda_per_hour", s.lambda_per_hour);
        s.current_time_min = j.value("current_time_min", s.current_time_min);
        s.micro_radius_m = j.value("micro_radius_m", s.micro_radius_m);
        s.venue_radius_m = j.value("venue_radius_m", s.venue_radius_m);
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, std::string("scenario: ") + e.what());
    }
    if (s.crowd.period_min <= 0.0) throw Error(Errc::invalid_config, "crowd period must be positive");
    if (s.lambda_per_hour < 0.0) throw Error(Errc::invalid_config, "lambda must be nonnegative");
    return s;
}

json to_json(const Scenario& s) {
    json weather = json::array();
    for (const auto& w : s.weather) {
        json e = weather_json(w.weather);
        e["from_min"] = w.from_min;
        weather.push_back(e);
    }
    json history = json::array();
    for (const auto& h : s.history) {
        history.push_back(
            {{"time_min", h.time_min}, {"location", spatial::point_to_json(h.location)}, {"state", to_json(h.state)}});
    }
    return {{"weather", weather},
            {"events", zones_json(s.events)},
            {"emergencies", zones_json(s.emergencies)},
            {"crowd",
             {{"base", s.crowd.base},
              {"amplitude", s.crowd.amplitude},
              {"peak_min", s.crowd.peak_min},
              {"period_min", s.crowd.period_min}}},
            {"history", history},
            {"lambda_per_hour", s.lambda_per_hour},
            {"current_time_min", s.current_time_min},
            {"micro_radius_m", s.micro_radius_m},
            {"venue_radius_m", s.venue_radius_m}};
}

// --- aggregation ---

std::array<double, 3> scale_relevance(std::optional<Category> category) {
    if (!category) return {1.0, 1.0, 1.0};
    switch (*category) {
        case Category::life_services: return {0.2, 0.3, 0.5};
        case Category::sports_leisure: return {0.5, 0.3, 0.2};
        case Category::employment: return {0.2, 0.4, 0.4};
        case Category::tourism: return {0.4, 0.3, 0.3};
        case Category::residence: return {0.3, 0.4, 0.3};
        case Category::shopping: return {0.2, 0.3, 0.5};
        case Category::dining: return {0.2, 0.3, 0.5};
        case Category::travel: return {0.3, 0.5, 0.2};
    }
    return {1.0, 1.0, 1.0};
}

namespace {

void union_into(std::vector<ZoneWindow>& out, const std::vector<ZoneWindow>& in) {
    for (const auto& z : in) {
        if (std::find(out.begin(), out.end(), z) == out.end()) out.push_back(z);
    }
}

}  // namespace

EnvState aggregate_multiscale(const std::vector<ScaleReading>& raw, const GeoPoint& /*location*/,
                              const EnvQuery& query) {
    if (raw.empty()) throw Error(Errc::empty_input, "no scale readings to aggregate");
    const auto relevance = scale_relevance(query.category);
    std::array<double, 3> w{0.0, 0.0, 0.0};
    std::vector<double> per_reading(raw.size());
    double total = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].weight < 0.0) throw Error(Errc::invalid_weights, "scale weights must be nonnegative");
        per_reading[i] = raw[i].weight * relevance[static_cast<std::size_t>(raw[i].scale)];
        total += per_reading[i];
    }
    if (total <= 0.0) {
        std::fill(per_reading.begin(), per_reading.end(), 1.0);
        total = static_cast<double>(raw.size());
    }

    EnvState state;
    std::size_t dominant = 0;
    double temperature = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double share = per_reading[i] / total;
        w[static_cast<std::size_t>(raw[i].scale)] += share;
        state.pedestrian_density += share * raw[i].pedestrian_density;
        temperature += share * raw[i].weather.temperature_c;
        if (per_reading[i] > per_reading[dominant]) dominant = i;
        union_into(state.events, raw[i].events);
        union_into(state.emergencies, raw[i].emergencies);
    }
    state.weather = {raw[dominant].weather.condition, temperature};
    state.scale_weights = w;
    state.confidence = 1.0;
    return state;
}

double prediction_confidence(double lambda_per_hour, double dt_hours) { return std::exp(-lambda_per_hour * dt_hours); }

// --- environment ---

Environment::Environment(Scenario scenario) : scenario_(std::move(scenario)) {
    std::stable_sort(scenario_.weather.begin(), scenario_.weather.end(),
                     [](const WeatherSpan& a, const WeatherSpan& b) { return a.from_min < b.from_min; });
}

EnvState Environment::historical(double time_min, const GeoPoint& location) const {
    for (const auto& rec : scenario_.history) {
        if (rec.time_min == time_min && haversine_distance(rec.location, location) <= 1.0) {
            EnvState s = rec.state;
            s.confidence = 1.0;
            return s;
        }
    }
    throw Error(Errc::missing_data, "no historical record at t=" + std::to_string(time_min));
}

std::vector<ScaleReading> Environment::readings(double t, const GeoPoint& loc) const {
    check_coordinate(loc);
    const Weather weather = scenario_.weather_at(t);
    const double crowd = scenario_.crowd.at(t);

    auto within = [&](const ZoneWindow& z, double reach) {
        return z.active(t) && haversine_distance(z.center, loc) <= z.radius_m + reach;
    };
    auto build = [&](Scale scale, double reach) {
        ScaleReading r;
        r.scale = scale;
        r.weather = weather;
        double multiplier = 1.0;
        for (const auto& e : scenario_.events) {
            if (!within(e, reach)) continue;
            r.events.push_back(e);
            multiplier = std::max(multiplier, e.multiplier);
        }
        for (const auto& e : scenario_.emergencies) {
            if (within(e, reach)) r.emergencies.push_back(e);
        }
        r.pedestrian_density = crowd * (scale == Scale::macro ? 1.0 : multiplier);
        return r;
    };

    constexpr double kEverywhere = 4.1e7;
    return {build(Scale::macro, kEverywhere), build(Scale::micro, scenario_.micro_radius_m),
            build(Scale::venue, scenario_.venue_radius_m)};
}

EnvState Environment::realtime(const EnvQuery& query) const {
    return aggregate_multiscale(readings(query.time_min, query.location), query.location, query);
}

EnvState Environment::predict_environment(double target_time_min, const GeoPoint& location, double now_min,
                                          std::optional<Category> category) const {
    const double dt = target_time_min - now_min;
    if (dt < 0.0) throw Error(Errc::past_target_time, "target time precedes the current time");
    EnvQuery q{target_time_min, location, category, now_min};
    EnvState s = aggregate_multiscale(readings(target_time_min, location), location, q);
    s.confidence = prediction_confidence(scenario_.lambda_per_hour, dt / 60.0);
    return s;
}

EnvState Environment::perceive(const EnvQuery& query, Mode mode) const {
    switch (mode) {
        case Mode::historical: return historical(query.time_min, query.location);
        case Mode::realtime: return realtime(query);
        case Mode::predictive:
            return predict_environment(query.time_min, query.location,
                                       query.now_min.value_or(scenario_.current_time_min), query.category);
    }
    throw Error(Errc::unknown_env_mode, "unknown environment mode");
}

json EnvironmentService::query(const json& payload, const json& /*ctx*/) {
    const std::string op = payload.value("op", "perceive");
    try {
        EnvQuery q;
        q.time_min = payload.at("time_min").get<double>();
        q.location = spatial::point_from_json(payload.at("location"));
        if (payload.contains("category")) q.category = parse_category(payload.at("category").get<std::string>());
        if (payload.contains("now_min")) q.now_min = payload.at("now_min").get<double>();
        if (op == "perceive") return to_json(env_->perceive(q, parse_mode(payload.value("mode", "realtime"))));
        if (op == "predict") return to_json(env_->perceive(q, Mode::predictive));
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("environment payload: ") + e.what());
    }
    throw Error(Errc::unsupported_operation, "environment has no op '" + op + "'");
}

}  // namespace chaingen::env
