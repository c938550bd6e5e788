#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/protocol.hpp"
#include "chaingen/types.hpp"

namespace chaingen::env {

enum class Mode { historical, realtime, predictive };
enum class Scale { macro, micro, venue };

inline constexpr std::array<Scale, 3> kAllScales = {Scale::macro, Scale::micro, Scale::venue};

std::string_view to_string(Mode m) noexcept;
std::string_view to_string(Scale s) noexcept;
/// Throws unknown_env_mode.
Mode parse_mode(std::string_view name);

struct Weather {
    std::string condition = "clear";
    double temperature_c = 20.0;

    bool wet() const noexcept { return condition == "rain" || condition == "storm" || condition == "snow"; }
    friend bool operator==(const Weather&, const Weather&) = default;
};

/// Windowed zone annotation: a circle active over [from_min, to_min).
struct ZoneWindow {
    std::string name;
    double from_min = 0.0;
    double to_min = 0.0;
    GeoPoint center;
    double radius_m = 0.0;
    /// Crowd multiplier inside the zone (events) or 1 (emergencies).
    double multiplier = 1.0;

    bool active(double t) const noexcept { return from_min <= t && t < to_min; }
    bool covers(const GeoPoint& p) const { return haversine_distance(center, p) <= radius_m; }
    friend bool operator==(const ZoneWindow&, const ZoneWindow&) = default;
};

/// Conditions as seen at one spatial scale, with its raw (unnormalized) weight.
struct ScaleReading {
    Scale scale = Scale::macro;
    Weather weather;
    double pedestrian_density = 0.0;  // persons per hectare
    std::vector<ZoneWindow> events;
    std::vector<ZoneWindow> emergencies;
    double weight = 1.0;

    friend bool operator==(const ScaleReading&, const ScaleReading&) = default;
};

struct EnvState {
    Weather weather;
    double pedestrian_density = 0.0;
    std::vector<ZoneWindow> events;
    std::vector<ZoneWindow> emergencies;
    double confidence = 1.0;
    std::array<double, 3> scale_weights{1.0, 0.0, 0.0};  // macro, micro, venue

    friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct EnvQuery {
    double time_min = 0.0;
    GeoPoint location;
    std::optional<Category> category;
    /// Reference instant for predictive mode; defaults to the scenario's current time.
    std::optional<double> now_min;
};

/// Sinusoidal daily crowd curve, clamped at 0.
struct CrowdCurve {
    double base = 40.0;
    double amplitude = 25.0;
    double peak_min = 1080.0;
    double period_min = 1440.0;

    double at(double t_min) const;
};

struct WeatherSpan {
    double from_min = 0.0;
    Weather weather;
};

struct HistoricalRecord {
    double time_min = 0.0;
    GeoPoint location;
    EnvState state;
};

/// Deterministic scenario tables driving the realtime and predictive sources.
struct Scenario {
    std::vector<WeatherSpan> weather;  // sorted by from_min
    std::vector<ZoneWindow> events;
    std::vector<ZoneWindow> emergencies;
    CrowdCurve crowd;
    std::vector<HistoricalRecord> history;
    double lambda_per_hour = 0.1;
    double current_time_min = 0.0;
    double micro_radius_m = 1000.0;
    double venue_radius_m = 150.0;

    Weather weather_at(double t_min) const;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
nlohmann::json to_json(const EnvState& s);
EnvState env_state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ZoneWindow& z);
ZoneWindow zone_from_json(const nlohmann::json& j);

/// Relevance of each scale to an activity category; uniform when untyped.
std::array<double, 3> scale_relevance(std::optional<Category> category);

/// Combines per-scale readings: weight_s = raw weight x category relevance,
/// normalized to sum 1; density and temperature are weight-averaged, events
/// and emergencies are unioned. Throws empty_input.
EnvState aggregate_multiscale(const std::vector<ScaleReading>& raw, const GeoPoint& location,
                              const EnvQuery& query);

/// exp(-lambda * dt), dt in hours.
double prediction_confidence(double lambda_per_hour, double dt_hours);

class Environment {
public:
    explicit Environment(Scenario scenario);

    const Scenario& scenario() const noexcept { return scenario_; }

    /// Throws missing_data (historical miss), past_target_time (predictive).
    EnvState perceive(const EnvQuery& query, Mode mode) const;
    /// Exact time match within 1 m; the stored state is returned verbatim.
    EnvState historical(double time_min, const GeoPoint& location) const;
    /// Raw per-scale readings synthesized from the scenario at time t.
    std::vector<ScaleReading> readings(double time_min, const GeoPoint& location) const;
    EnvState realtime(const EnvQuery& query) const;
    EnvState predict_environment(double target_time_min, const GeoPoint& location, double now_min,
                                 std::optional<Category> category = std::nullopt) const;

private:
    Scenario scenario_;
};

/// "environment" tool: ops perceive / predict.
class EnvironmentService : public protocol::ToolService {
public:
    explicit EnvironmentService(std::shared_ptr<const Environment> env) : env_(std::move(env)) {}
    std::string name() const override { return "environment"; }
    nlohmann::json query(const nlohmann::json& payload, const nlohmann::json& session_context) override;

private:
    std::shared_ptr<const Environment> env_;
};

}  // namespace chaingen::env
