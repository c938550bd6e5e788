#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "chaingen/agent.hpp"
#include "chaingen/environment.hpp"
#include "chaingen/evaluation.hpp"
#include "chaingen/llm.hpp"
#include "chaingen/memory.hpp"
#include "chaingen/pipeline.hpp"
#include "chaingen/spatial.hpp"
#include "chaingen/world.hpp"

namespace chaingen::config {

struct Backend {
    std::string kind = "heuristic";  // heuristic | mock | external_llm
    long mock_latency_us = 2000;
    llm::LlmConfig llm;
    llm::EndpointConfig endpoint;  // the key itself is only read from endpoint.api_key_env
};

/// Every tunable of a run in one document. Missing keys keep their defaults.
struct Config {
    world::WorldSpec world;
    /// Real data replaces the synthetic world when both paths are set.
    std::optional<std::filesystem::path> poi_file;  // .csv or .geojson
    std::optional<std::filesystem::path> network_file;
    /// Inline scenario document; a seeded synthetic scenario otherwise.
    std::optional<nlohmann::json> scenario;
    std::uint64_t scenario_seed = 1;
    spatial::ScoreWeights score;
    spatial::CostWeights cost;
    memory::RelevanceWeights memory;
    agent::AgentConfig agent;
    Backend backend;
    pipeline::PersonaProfile personas;
    std::optional<std::filesystem::path> persona_file;  // JSONL personas
    eval::EvaluationOptions evaluation;
    int day = 0;
    std::string date = "2024-05-06";
};

/// Relative paths resolve against `base_dir`. Throws invalid_config.
Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const Config& c);
/// Throws io_failure / parse_error / invalid_config.
Config load_config(const std::filesystem::path& path);

std::shared_ptr<spatial::SpatialWorld> build_world(const Config& c);
std::shared_ptr<const env::Environment> build_environment(const Config& c);
/// One reasoner per sample; external_llm reads its key from the configured
/// environment variable.
pipeline::ReasonerFactory build_reasoner_factory(const Config& c, std::ostream* trace = nullptr);

}  // namespace chaingen::config
