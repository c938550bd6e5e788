#include "chaingen/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "chaingen/error.hpp"
#include "chaingen/random.hpp"
#include "chaingen/reasoner.hpp"

namespace chaingen::config {

using nlohmann::json;

namespace {

template <typename T>
void take(const json& j, const char* key, T& field) {
    if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

json point_json(const GeoPoint& p) { return json::array({p.lon, p.lat}); }

GeoPoint point_of(const json& j) {
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    return {j.at("lon").get<double>(), j.at("lat").get<double>()};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

json world_json(const world::WorldSpec& w) {
    return {{"origin", point_json(w.origin)},
            {"grid", w.grid},
            {"spacing_m", w.spacing_m},
            {"poi_count", w.poi_count},
            {"seed", w.seed}};
}

world::WorldSpec world_from(const json& j) {
    world::WorldSpec w;
    if (j.contains("origin")) w.origin = point_of(j.at("origin"));
    take(j, "grid", w.grid);
    take(j, "spacing_m", w.spacing_m);
    take(j, "poi_count", w.poi_count);
    take(j, "seed", w.seed);
    if (w.grid < 2 || w.spacing_m <= 0.0 || w.poi_count == 0) {
        throw Error(Errc::invalid_config, "world needs grid >= 2, spacing_m > 0 and poi_count > 0");
    }
    return w;
}

json score_json(const spatial::ScoreWeights& w) {
    return {{"semantic", w.semantic},
            {"preference", w.preference},
            {"distance", w.distance},
            {"semantic_threshold", w.semantic_threshold}};
}

spatial::ScoreWeights score_from(const json& j) {
    spatial::ScoreWeights w;
    take(j, "semantic", w.semantic);
    take(j, "preference", w.preference);
    take(j, "distance", w.distance);
    take(j, "semantic_threshold", w.semantic_threshold);
    spatial::validate(w);
    return w;
}

json cost_json(const spatial::CostWeights& w) {
    return {{"time", w.time},
            {"distance", w.distance},
            {"money", w.money},
            {"fare_per_km", w.fare_per_km},
            {"transfer_penalty_min", w.transfer_penalty_min}};
}

spatial::CostWeights cost_from(const json& j) {
    spatial::CostWeights w;
    take(j, "time", w.time);
    take(j, "distance", w.distance);
    take(j, "money", w.money);
    take(j, "fare_per_km", w.fare_per_km);
    take(j, "transfer_penalty_min", w.transfer_penalty_min);
    if (w.time < 0.0 || w.distance < 0.0 || w.money < 0.0 || w.transfer_penalty_min < 0.0) {
        throw Error(Errc::invalid_config, "route cost weights must be nonnegative");
    }
    return w;
}

json memory_json(const memory::RelevanceWeights& w) {
    return {{"a_cos", w.a_cos},
            {"a_time", w.a_time},
            {"a_space", w.a_space},
            {"a_semantic", w.a_semantic},
            {"cos_dim_weights", w.cos_dim_weights},
            {"lambda_time_per_hour", w.lambda_time_per_hour},
            {"period_hours", w.period_hours},
            {"spatial_sigma_m", w.spatial_sigma_m},
            {"theta_transfer", w.theta_transfer},
            {"theta_forget", w.theta_forget},
            {"decay_per_hour", w.decay_per_hour},
            {"w_frequency", w.w_frequency},
            {"w_recency", w.w_recency},
            {"w_salience", w.w_salience},
            {"attention_temperature", w.attention_temperature},
            {"consistency_tau", w.consistency_tau}};
}

memory::RelevanceWeights memory_from(const json& j) {
    memory::RelevanceWeights w;
    take(j, "a_cos", w.a_cos);
    take(j, "a_time", w.a_time);
    take(j, "a_space", w.a_space);
    take(j, "a_semantic", w.a_semantic);
    take(j, "cos_dim_weights", w.cos_dim_weights);
    take(j, "lambda_time_per_hour", w.lambda_time_per_hour);
    take(j, "period_hours", w.period_hours);
    take(j, "spatial_sigma_m", w.spatial_sigma_m);
    take(j, "theta_transfer", w.theta_transfer);
    take(j, "theta_forget", w.theta_forget);
    take(j, "decay_per_hour", w.decay_per_hour);
    take(j, "w_frequency", w.w_frequency);
    take(j, "w_recency", w.w_recency);
    take(j, "w_salience", w.w_salience);
    take(j, "attention_temperature", w.attention_temperature);
    take(j, "consistency_tau", w.consistency_tau);
    memory::validate(w);
    return w;
}

json backend_json(const Backend& b) {
    return {{"kind", b.kind},
            {"mock_latency_us", b.mock_latency_us},
            {"llm",
             {{"tau_reason", b.llm.tau_reason},
              {"tau_output", b.llm.tau_output},
              {"max_retries", b.llm.max_retries},
              {"token_budget", b.llm.token_budget},
              {"model", b.llm.model}}},
            {"endpoint",
             {{"url", b.endpoint.url},
              {"model", b.endpoint.model},
              {"api_key_env", b.endpoint.api_key_env},
              {"timeout_s", b.endpoint.timeout_s}}}};
}

Backend backend_from(const json& j) {
    Backend b;
    take(j, "kind", b.kind);
    take(j, "mock_latency_us", b.mock_latency_us);
    if (j.contains("llm")) {
        const json& l = j.at("llm");
        take(l, "tau_reason", b.llm.tau_reason);
        take(l, "tau_output", b.llm.tau_output);
        take(l, "max_retries", b.llm.max_retries);
        take(l, "token_budget", b.llm.token_budget);
        take(l, "model", b.llm.model);
    }
    if (j.contains("endpoint")) {
        const json& e = j.at("endpoint");
        if (e.contains("api_key")) {
            throw Error(Errc::invalid_config, "keys do not belong in config files; set endpoint.api_key_env instead");
        }
        take(e, "url", b.endpoint.url);
        take(e, "model", b.endpoint.model);
        take(e, "api_key_env", b.endpoint.api_key_env);
        take(e, "timeout_s", b.endpoint.timeout_s);
    }
    if (b.kind != "heuristic" && b.kind != "mock" && b.kind != "external_llm") {
        throw Error(Errc::invalid_config, "backend.kind must be heuristic, mock or external_llm");
    }
    if (b.mock_latency_us < 0 || b.llm.max_retries < 0 || b.endpoint.timeout_s <= 0) {
        throw Error(Errc::invalid_config, "backend latency, retries and timeout must be nonnegative");
    }
    return b;
}

}  // namespace

Config config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");
    Config c;
    try {
        if (j.contains("world")) c.world = world_from(j.at("world"));
        if (j.contains("poi_file")) c.poi_file = resolve(base_dir, j.at("poi_file").get<std::string>());
        if (j.contains("network_file")) c.network_file = resolve(base_dir, j.at("network_file").get<std::string>());
        if (c.poi_file.has_value() != c.network_file.has_value()) {
            throw Error(Errc::invalid_config, "poi_file and network_file must be given together");
        }
        if (j.contains("scenario") && !j.at("scenario").is_null()) c.scenario = j.at("scenario");
        take(j, "scenario_seed", c.scenario_seed);
        if (j.contains("score")) c.score = score_from(j.at("score"));
        if (j.contains("cost")) c.cost = cost_from(j.at("cost"));
        if (j.contains("memory")) c.memory = memory_from(j.at("memory"));
        if (j.contains("agent")) c.agent = agent::agent_config_from_json(j.at("agent"));
        if (j.contains("backend")) c.backend = backend_from(j.at("backend"));
        if (j.contains("personas")) c.personas = pipeline::persona_profile_from_json(j.at("personas"));
        if (j.contains("persona_file")) c.persona_file = resolve(base_dir, j.at("persona_file").get<std::string>());
        if (j.contains("evaluation")) c.evaluation = eval::evaluation_options_from_json(j.at("evaluation"));
        take(j, "day", c.day);
        take(j, "date", c.date);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_config, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::invalid_config) throw;
        throw Error(Errc::invalid_config, std::string("config: ") + e.what());
    }
    return c;
}

json to_json(const Config& c) {
    json j = {{"world", world_json(c.world)},
              {"scenario_seed", c.scenario_seed},
              {"score", score_json(c.score)},
              {"cost", cost_json(c.cost)},
              {"memory", memory_json(c.memory)},
              {"agent", agent::to_json(c.agent)},
              {"backend", backend_json(c.backend)},
              {"personas", pipeline::to_json(c.personas)},
              {"evaluation", eval::to_json(c.evaluation)},
              {"day", c.day},
              {"date", c.date}};
    if (c.poi_file) j["poi_file"] = c.poi_file->string();
    if (c.network_file) j["network_file"] = c.network_file->string();
    if (c.persona_file) j["persona_file"] = c.persona_file->string();
    if (c.scenario) j["scenario"] = *c.scenario;
    return j;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_failure, "cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

std::shared_ptr<spatial::SpatialWorld> build_world(const Config& c) {
    std::shared_ptr<spatial::SpatialWorld> w;
    if (c.poi_file && c.network_file) {
        w = std::make_shared<spatial::SpatialWorld>();
        const auto ext = c.poi_file->extension().string();
        w->pois = spatial::PoiDataset(ext == ".geojson" || ext == ".json" ? spatial::load_pois_geojson(*c.poi_file)
                                                                          : spatial::load_pois_csv(*c.poi_file));
        w->network = spatial::load_network_csv(*c.network_file);
    } else {
        w = world::make_synthetic_world(c.world);
    }
    w->score_weights = c.score;
    w->cost_weights = c.cost;
    return w;
}

std::shared_ptr<const env::Environment> build_environment(const Config& c) {
    env::Scenario s = c.scenario ? env::scenario_from_json(*c.scenario) : world::make_synthetic_scenario(c.world, c.scenario_seed);
    return std::make_shared<const env::Environment>(std::move(s));
}

pipeline::ReasonerFactory build_reasoner_factory(const Config& c, std::ostream* trace) {
    const Backend b = c.backend;
    if (b.kind == "mock") {
        const std::chrono::microseconds latency(b.mock_latency_us);
        return [latency](std::size_t) { return std::make_shared<agent::LatencyReasoner>(latency); };
    }
    if (b.kind == "external_llm") {
        llm::EndpointConfig endpoint = b.endpoint;
        endpoint.trace = trace;
        auto client = std::make_shared<llm::HttpChatClient>(endpoint);
        llm::LlmConfig cfg = b.llm;
        if (cfg.model.empty()) cfg.model = endpoint.model;
        return [client, cfg](std::size_t) { return std::make_shared<llm::LlmReasoner>(client, cfg); };
    }
    return [](std::size_t) { return std::make_shared<agent::HeuristicReasoner>(); };
}

}  // namespace chaingen::config
