#pragma once

#include <chrono>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "chaingen/chain.hpp"

namespace chaingen::agent {

/// Weights over the S4 factors; free parameters with uniform defaults.
struct S4Weights {
    double time = 0.2;
    double distance = 0.2;
    double value = 0.2;
    double preference = 0.2;
    double habit = 0.2;
};

nlohmann::json to_json(const S4Weights& w);
S4Weights s4_weights_from_json(const nlohmann::json& j);

struct StageOutput {
    nlohmann::json output = nlohmann::json::object();
    std::string rationale;
    bool fallback = false;
};

/// Produces the structured output of one reasoning stage from its inputs.
/// Stage input/output shapes are documented in data/prompts/*.txt.
class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual std::string name() const = 0;
    virtual StageOutput propose(Stage stage, const nlohmann::json& inputs) = 0;
};

/// Normalized S4 factors for one option, each in [0, 1].
struct OptionFactors {
    double time = 0.0;
    double distance = 0.0;
    double value = 0.0;
    double preference = 0.0;
    double habit = 0.0;
};

/// Builds factors from an S4 option document (travel_min, distance_m,
/// search_radius_m, rating, category_preference, habit, outdoor, wet).
OptionFactors option_factors(const nlohmann::json& option);
double option_score(const OptionFactors& f, const S4Weights& w);

/// Memory bias in [0, 1): 1 - exp(-sum max(0, rel_i) * (1 + emotion_i) / 2)
/// over memories attached to the option. Empty input gives 0.
double habit_strength(const nlohmann::json& memories);

/// Whether [start, end) fits a venue's opening window on the planning clock.
bool open_window_fits(int open_min, int close_min, int start_min, int end_min);

/// S3 hard screen shared by the heuristic backend and the agent's safety
/// check: opening hours, latest end (including the onward leg), blocked
/// intervals and avoided zones. Returns an empty string when feasible,
/// otherwise the rejection reason.
std::string screen_candidate(const nlohmann::json& candidate, const nlohmann::json& constraints);

/// Deterministic rule-table backend.
class HeuristicReasoner : public Reasoner {
public:
    std::string name() const override { return "heuristic"; }
    StageOutput propose(Stage stage, const nlohmann::json& inputs) override;
};

/// Mock backend: heuristic answers after a fixed simulated latency per call.
class LatencyReasoner : public Reasoner {
public:
    explicit LatencyReasoner(std::chrono::microseconds latency) : latency_(latency) {}
    std::string name() const override { return "mock"; }
    StageOutput propose(Stage stage, const nlohmann::json& inputs) override;

private:
    std::chrono::microseconds latency_;
    HeuristicReasoner inner_;
};

}  // namespace chaingen::agent
