#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/reasoner.hpp"

namespace chaingen::llm {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_tokens = 1024;
};

struct ChatResponse {
    std::string content;
    std::size_t total_tokens = 0;
};

/// Chat-completion transport. Throws endpoint_unreachable.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct EndpointConfig {
    std::string url = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "local-model";
    std::string api_key_env = "CHAINGEN_API_KEY";  // name of the env var holding the key
    int timeout_s = 60;
    std::ostream* trace = nullptr;  // request/response bodies when set
};

/// OpenAI-compatible HTTP client.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig config);
    ChatResponse complete(const ChatRequest& request) override;

private:
    EndpointConfig config_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
    std::mutex trace_mutex_;
};

/// Replaces {{name}} placeholders; unknown placeholders are left untouched.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars);

/// First balanced {...} block in the text (```json fences tolerated).
std::optional<nlohmann::json> extract_json_block(std::string_view text);

/// Checks that a stage output carries the keys later stages rely on.
bool stage_output_well_formed(Stage stage, const nlohmann::json& output);

/// Bundled prompt template text for a stage.
std::string_view stage_template(Stage stage);
std::string_view extraction_template();
std::string_view generation_rubric();
std::string_view reasoning_rubric();

struct LlmConfig {
    double tau_reason = 0.7;
    double tau_output = 0.1;
    int max_retries = 2;
    std::size_t token_budget = 200000;
    std::string model = "local-model";
};

/// Two-pass backend: a reasoning request at tau_reason, then a
/// format-forcing extraction request at tau_output. Unparseable output is
/// retried, then the heuristic backend answers and the stage is flagged.
/// Throws budget_exceeded once the token budget is spent.
class LlmReasoner : public agent::Reasoner {
public:
    LlmReasoner(std::shared_ptr<ChatClient> client, LlmConfig config);
    std::string name() const override { return "external_llm"; }
    agent::StageOutput propose(Stage stage, const nlohmann::json& inputs) override;

    std::size_t tokens_used() const noexcept { return tokens_used_; }
    /// The reasoning prompt that would be sent for a stage.
    static std::string build_prompt(Stage stage, const nlohmann::json& inputs);

private:
    ChatResponse call(const std::vector<ChatMessage>& messages, double temperature);

    std::shared_ptr<ChatClient> client_;
    LlmConfig config_;
    agent::HeuristicReasoner fallback_;
    std::size_t tokens_used_ = 0;
};

struct JudgeScores {
    double time_logic = 0.0;
    double purpose_coherence = 0.0;
    double persona_match = 0.0;
    double authenticity = 0.0;
    double comprehensive = 0.0;
};

/// Mean of four dimensions (25% each).
double comprehensive_score(double time_logic, double purpose_coherence, double persona_match, double authenticity);

/// External judge scoring a chain against the generation-quality rubric.
class JudgeClient {
public:
    JudgeClient(std::shared_ptr<ChatClient> client, std::string model = "judge", int max_retries = 2);
    /// Throws unparseable_response when no in-range parse is obtained.
    JudgeScores score(const nlohmann::json& chain, const nlohmann::json& persona);

private:
    std::shared_ptr<ChatClient> client_;
    std::string model_;
    int max_retries_;
};

}  // namespace chaingen::llm
