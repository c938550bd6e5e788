#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/agent.hpp"
#include "chaingen/chain.hpp"
#include "chaingen/environment.hpp"
#include "chaingen/evaluation.hpp"
#include "chaingen/memory.hpp"
#include "chaingen/spatial.hpp"

namespace chaingen::pipeline {

using Weighted = std::vector<std::pair<std::string, double>>;

/// Marginal distributions personas are drawn from.
struct PersonaProfile {
    Weighted age_bands = {{"18-29", 0.2}, {"30-44", 0.3}, {"45-64", 0.3}, {"65+", 0.2}};
    Weighted occupations = {{"worker", 0.5}, {"student", 0.15}, {"retiree", 0.15}, {"homemaker", 0.1},
                            {"unemployed", 0.1}};
    Weighted incomes = {{"low", 0.3}, {"middle", 0.5}, {"high", 0.2}};
    /// Mode sets: "walk+transit", "walk+drive", "walk+cycle", "walk".
    Weighted mobility = {{"walk+transit", 0.6}, {"walk+drive", 0.25}, {"walk+cycle", 0.15}};
    double home_anchored = 1.0;  // share whose chain must start and end at home
    /// Per-category preference centre and uniform jitter around it.
    double preference_base = 0.6;
    double preference_jitter = 0.6;
};

/// Throws invalid_profile.
void validate(const PersonaProfile& p);
nlohmann::json to_json(const PersonaProfile& p);
PersonaProfile persona_profile_from_json(const nlohmann::json& j);

/// Occupations follow largest-remainder quotas of the marginals (then a
/// seeded shuffle); other fields are drawn per persona. Homes are residence
/// POIs, workplaces employment POIs, schools POIs labelled "school".
/// Throws invalid_profile.
std::vector<Persona> synthesize_personas(std::size_t n, std::uint64_t seed, const PersonaProfile& profile,
                                         const spatial::SpatialWorld& world);

/// One JSON persona per line.
std::vector<Persona> read_personas_jsonl(const std::string& path);

using ReasonerFactory = std::function<std::shared_ptr<agent::Reasoner>(std::size_t sample_index)>;

struct BatchConfig {
    std::size_t workers = 1;
    std::size_t samples = 1;
    std::uint64_t seed = 0;
    std::string out_path;  // empty: keep chains in memory only
    std::vector<Persona> personas;  // synthesized from `profile` when empty
    PersonaProfile profile;
    std::optional<std::chrono::milliseconds> sample_timeout;
    agent::AgentConfig agent;
    memory::RelevanceWeights memory;
    int day = 0;
    std::string date = "2024-05-06";
    bool with_stages = true;  // write S1..S5 bundles into the JSONL
};

struct BatchServices {
    std::shared_ptr<const spatial::SpatialWorld> world;
    std::shared_ptr<const env::Environment> environment;
    ReasonerFactory reasoner;  // heuristic when empty
};

struct SampleOutcome {
    std::size_t index = 0;
    std::string persona_id;
    double seconds = 0.0;
    bool ok = false;
    std::string error;  // "code: message" on failure
    std::size_t violations = 0;
};

struct RunMetrics {
    std::size_t workers = 0;
    std::size_t samples = 0;
    std::size_t successes = 0;
    std::size_t failures = 0;
    std::vector<SampleOutcome> outcomes;  // by sample index
    double mean_seconds = 0.0;
    double stdev_seconds = 0.0;
    double wall_seconds = 0.0;
    double throughput_per_min = 0.0;
    /// Process peak resident memory; not comparable to GPU memory figures.
    long peak_rss_kb = 0;
};

nlohmann::json to_json(const RunMetrics& m);
RunMetrics run_metrics_from_json(const nlohmann::json& j);

struct BatchResult {
    RunMetrics metrics;
    std::vector<ActivityChain> chains;  // successful samples, by index
};

/// Runs persona-days on a pool of workers. Sample i uses persona
/// i mod |personas| and seed sample_seed(seed, i); lines are written whole
/// and in sample order, so output does not depend on the worker count.
/// Throws invalid_config, io_failure, all_samples_failed.
BatchResult run_batch(const BatchConfig& config, const BatchServices& services);

struct Report {
    std::string text;
    nlohmann::json json;
};

/// Throughput table (workers x mean time per sample, ordered by workers)
/// plus the evaluation report when given.
Report report(const std::vector<RunMetrics>& runs, const eval::EvaluationReport* evaluation = nullptr);

long peak_rss_kb();

}  // namespace chaingen::pipeline
