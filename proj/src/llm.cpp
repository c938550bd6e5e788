#include "chaingen/llm.hpp"

#include <cstdlib>

#include <httplib.h>

#include "chaingen/embedded.hpp"
#include "chaingen/error.hpp"

namespace chaingen::llm {

using nlohmann::json;

// --- transport ---

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::invalid_config, "endpoint URL needs a scheme");
    const auto path_start = config_.url.find('/', scheme_end + 3);
    base_ = config_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/v1/chat/completions" : config_.url.substr(path_start);
}

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    const json body = {{"model", request.model.empty() ? config_.model : request.model},
                       {"messages", messages},
                       {"temperature", request.temperature},
                       {"max_tokens", request.max_tokens}};
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    if (config_.trace) {
        std::lock_guard lock(trace_mutex_);
        *config_.trace << "> " << payload << '\n';
    }
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
        throw Error(Errc::endpoint_unreachable, base_ + ": " + httplib::to_string(res.error()));
    }
    if (config_.trace) {
        std::lock_guard lock(trace_mutex_);
        *config_.trace << "< " << res->status << ' ' << res->body << '\n';
    }
    if (res->status != 200) {
        throw Error(Errc::endpoint_unreachable, base_ + " answered HTTP " + std::to_string(res->status));
    }
    try {
        const json reply = json::parse(res->body);
        ChatResponse out;
        out.content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        if (reply.contains("usage")) out.total_tokens = reply.at("usage").value("total_tokens", std::size_t{0});
        return out;
    } catch (const json::exception& e) {
        throw Error(Errc::unparseable_response, std::string("chat completion body: ") + e.what());
    }
}

// --- templates ---

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t i = 0;
    while (i < tpl.size()) {
        const auto open = tpl.find("{{", i);
        if (open == std::string_view::npos) break;
        const auto close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(tpl.substr(i, open - i));
        const std::string key(tpl.substr(open + 2, close - open - 2));
        if (auto it = vars.find(key); it != vars.end()) {
            out += it->second;
        } else {
            out.append(tpl.substr(open, close + 2 - open));
        }
        i = close + 2;
    }
    out.append(tpl.substr(i));
    return out;
}

std::optional<json> extract_json_block(std::string_view text) {
    for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                try {
                    return json::parse(text.substr(start, i - start + 1));
                } catch (const json::parse_error&) {
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

bool stage_output_well_formed(Stage stage, const json& o) {
    if (!o.is_object()) return false;
    auto number = [&](const char* key) { return o.contains(key) && o.at(key).is_number(); };
    auto array = [&](const char* key) { return o.contains(key) && o.at(key).is_array(); };
    switch (stage) {
        case Stage::situational_awareness:
            return o.contains("category") && o.at("category").is_string() &&
                   try_parse_category(o.at("category").get<std::string>()).has_value() && number("planned_start") &&
                   number("duration") && array("window") && o.at("window").size() == 2;
        case Stage::constraints:
            return number("earliest_start") && number("latest_end") && array("blocked") && array("avoid_zones");
        case Stage::options:
            if (!array("feasible")) return false;
            for (const auto& id : o.at("feasible")) {
                if (!id.is_string()) return false;
            }
            return true;
        case Stage::evaluation:
            if (!array("scores")) return false;
            for (const auto& s : o.at("scores")) {
                if (!s.is_object() || !s.contains("id") || !s.at("id").is_string() || !s.contains("score") ||
                    !s.at("score").is_number()) {
                    return false;
                }
            }
            return true;
        case Stage::decision:
            return o.contains("choice") && o.at("choice").is_string() && number("start") && number("end");
    }
    return false;
}

std::string_view stage_template(Stage stage) {
    switch (stage) {
        case Stage::situational_awareness: return embedded::text("s1_situational_awareness");
        case Stage::constraints: return embedded::text("s2_constraints");
        case Stage::options: return embedded::text("s3_options");
        case Stage::evaluation: return embedded::text("s4_evaluation");
        case Stage::decision: return embedded::text("s5_decision");
    }
    return {};
}

std::string_view extraction_template() { return embedded::text("extraction"); }
std::string_view generation_rubric() { return embedded::text("generation_quality"); }
std::string_view reasoning_rubric() { return embedded::text("reasoning_quality"); }

namespace {

std::string_view output_schema(Stage stage) {
    switch (stage) {
        case Stage::situational_awareness:
            return R"({"goal": string, "category": one of the eight categories, "planned_start": int, "duration": int, "window": [int, int], "weather": string, "wet": bool, "crowd": number, "emergencies": int, "habit_category": string or null})";
        case Stage::constraints:
            return R"({"earliest_start": int, "latest_end": int, "duration": int, "blocked": [[int, int], ...], "avoid_zones": [{"center": {"lon": number, "lat": number}, "radius_m": number}, ...], "wet": bool, "forecast_confidence": number})";
        case Stage::options:
            return R"({"feasible": [candidate id, ...], "rejected": [{"id": string, "reason": string}, ...]})";
        case Stage::evaluation:
            return R"({"scores": [{"id": string, "score": number, "factors": {"time": number, "distance": number, "value": number, "preference": number, "habit": number}}, ...]})";
        case Stage::decision:
            return R"({"choice": option id, "start": int, "end": int, "predicted": {"slack_min": int, "next_free": int}})";
    }
    return "{}";
}

std::size_t estimate_tokens(const std::vector<ChatMessage>& messages, const std::string& reply) {
    std::size_t chars = reply.size();
    for (const auto& m : messages) chars += m.content.size();
    return chars / 4 + 1;
}

}  // namespace

// --- reasoner ---

LlmReasoner::LlmReasoner(std::shared_ptr<ChatClient> client, LlmConfig config)
    : client_(std::move(client)), config_(std::move(config)) {
    if (!(config_.tau_reason > 0.0 && config_.tau_reason <= 1.0 && config_.tau_output > 0.0 &&
          config_.tau_output <= 1.0)) {
        throw Error(Errc::invalid_config, "temperatures must lie in (0, 1]");
    }
}

std::string LlmReasoner::build_prompt(Stage stage, const json& inputs) {
    std::map<std::string, std::string> vars = {
        {"stage", std::string(to_string(stage))},
        {"stage_code", std::string(stage_code(stage))},
        {"inputs", inputs.dump(2)},
        {"persona", inputs.value("persona", json::object()).dump()},
        {"context", inputs.value("context", json::object()).dump()},
        {"now", std::to_string(inputs.value("now", 0))},
    };
    return render_template(stage_template(stage), vars);
}

ChatResponse LlmReasoner::call(const std::vector<ChatMessage>& messages, double temperature) {
    if (tokens_used_ >= config_.token_budget) {
        throw Error(Errc::budget_exceeded, "token budget of " + std::to_string(config_.token_budget) + " spent");
    }
    ChatResponse r = client_->complete({config_.model, messages, temperature, 1024});
    tokens_used_ += r.total_tokens > 0 ? r.total_tokens : estimate_tokens(messages, r.content);
    return r;
}

agent::StageOutput LlmReasoner::propose(Stage stage, const json& inputs) {
    const std::string prompt = build_prompt(stage, inputs);
    const std::string extraction =
        render_template(extraction_template(), {{"schema", std::string(output_schema(stage))},
                                                {"stage_code", std::string(stage_code(stage))}});
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        const std::vector<ChatMessage> reasoning_msgs = {{"user", prompt}};
        const ChatResponse reasoning = call(reasoning_msgs, config_.tau_reason);
        const std::vector<ChatMessage> extract_msgs = {{"system", extraction}, {"user", reasoning.content}};
        const ChatResponse structured = call(extract_msgs, config_.tau_output);
        if (auto block = extract_json_block(structured.content); block && stage_output_well_formed(stage, *block)) {
            return {*block, reasoning.content, false};
        }
    }
    agent::StageOutput out = fallback_.propose(stage, inputs);
    out.fallback = true;
    out.rationale = "external output unparseable; heuristic fallback: " + out.rationale;
    return out;
}

// --- judge ---

double comprehensive_score(double time_logic, double purpose_coherence, double persona_match, double authenticity) {
    return 0.25 * time_logic + 0.25 * purpose_coherence + 0.25 * persona_match + 0.25 * authenticity;
}

JudgeClient::JudgeClient(std::shared_ptr<ChatClient> client, std::string model, int max_retries)
    : client_(std::move(client)), model_(std::move(model)), max_retries_(max_retries) {}

JudgeScores JudgeClient::score(const json& chain, const json& persona) {
    const std::string prompt =
        render_template(generation_rubric(), {{"chain", chain.dump(2)}, {"persona", persona.dump(2)}});
    static constexpr const char* kKeys[] = {"time_logic", "purpose_coherence", "persona_match", "authenticity"};
    std::string last;
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
        const ChatResponse r = client_->complete({model_, {{"user", prompt}}, 0.1, 512});
        last = r.content;
        const auto block = extract_json_block(r.content);
        if (!block) continue;
        double v[4];
        bool ok = true;
        for (int i = 0; i < 4 && ok; ++i) {
            ok = block->contains(kKeys[i]) && block->at(kKeys[i]).is_number();
            if (ok) {
                v[i] = block->at(kKeys[i]).get<double>();
                ok = v[i] >= 1.0 && v[i] <= 10.0;
            }
        }
        if (!ok) continue;
        return {v[0], v[1], v[2], v[3], comprehensive_score(v[0], v[1], v[2], v[3])};
    }
    throw Error(Errc::unparseable_response, "judge reply lacked four scores in [1,10]: " + last.substr(0, 200));
}

}  // namespace chaingen::llm
