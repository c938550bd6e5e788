#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/error.hpp"

namespace chaingen::protocol {

using json = nlohmann::json;

enum class Kind { query, response, action, feedback };

std::string_view to_string(Kind k) noexcept;
/// Throws unknown_kind.
Kind parse_kind(std::string_view name);

struct Status {
    bool ok = true;
    std::string code;
    std::string message;

    static Status success() { return {}; }
    static Status failure(std::string code, std::string message) {
        return {false, std::move(code), std::move(message)};
    }

    friend bool operator==(const Status&, const Status&) = default;
};

/// One wire-level message. Immutable once built; safe to share across threads.
struct Envelope {
    std::string id;
    std::string session_id;
    std::optional<std::string> ref_id;
    Kind kind = Kind::query;
    std::optional<std::string> tool;
    json payload = json::object();
    std::optional<Status> status;
    double timestamp = 0.0;
    json metadata = json::object();

    friend bool operator==(const Envelope& a, const Envelope& b);
};

/// Checks the structural invariants (ref_id/tool/status presence per kind,
/// object-typed payload and metadata, finite numbers). Throws Error.
void validate(const Envelope& env);

/// Canonical JSON: sorted keys, no insignificant whitespace, integers without
/// exponent. Throws missing_ref_id / invalid_kind / schema_violation.
std::string encode_message(const Envelope& env);

/// Throws malformed_json (with byte offset), unknown_kind or schema_violation.
/// Inputs larger than max_payload_bytes() are rejected as schema_violation.
Envelope decode_message(std::string_view bytes);

/// Limit read from CHAINGEN_MAX_PAYLOAD_BYTES (default 1 MiB).
std::size_t max_payload_bytes();

/// Append-only message log for one conversation.
class Session {
public:
    explicit Session(std::string session_id) : id_(std::move(session_id)) {}

    const std::string& id() const noexcept { return id_; }
    const std::vector<Envelope>& log() const noexcept { return log_; }
    json& context() noexcept { return context_; }
    const json& context() const noexcept { return context_; }

    /// Throws session_mismatch, duplicate_id, or dangling_ref when a
    /// Response/Feedback references a message not in the log.
    void append(Envelope env);

    bool contains(const std::string& message_id) const { return ids_.count(message_id) != 0; }
    const Envelope* find(const std::string& message_id) const;

    /// Fresh message id unique within this session: "<prefix>-<n>".
    std::string next_id(std::string_view prefix);

private:
    std::string id_;
    std::vector<Envelope> log_;
    std::unordered_set<std::string> ids_;
    json context_ = json::object();
    std::size_t counter_ = 0;
};

/// A tool suite reachable over the bus. Implementations must tolerate
/// concurrent calls from many sessions.
class ToolService {
public:
    virtual ~ToolService() = default;
    virtual std::string name() const = 0;
    /// Answers a query payload; throw Error for tool-level failures.
    virtual json query(const json& payload, const json& session_context) = 0;
    /// Executes an action payload; the result becomes the Feedback payload.
    virtual json act(const json& payload, const json& session_context);
};

/// Routes envelopes to registered tool services.
class Bus {
public:
    using Clock = std::function<double()>;

    Bus();

    void register_service(std::shared_ptr<ToolService> service);
    bool has_service(const std::string& name) const;
    std::vector<std::string> service_names() const;
    void set_clock(Clock clock) { clock_ = std::move(clock); }

    /// Appends the query and its Response to the session. Tool failures come
    /// back as an error Status, never as an exception; a non-Query envelope
    /// throws wrong_kind.
    Envelope dispatch(Session& session, const Envelope& query) const;

    /// Action -> synchronous Feedback, logged like dispatch.
    Envelope perform(Session& session, const Envelope& action) const;

private:
    Envelope reply(Session& session, const Envelope& request, Kind reply_kind) const;

    std::map<std::string, std::shared_ptr<ToolService>> services_;
    Clock clock_;
};

/// Convenience for building requests inside a session.
Envelope make_query(Session& session, std::string tool, json payload, double timestamp = 0.0);
Envelope make_action(Session& session, std::string tool, json payload, double timestamp = 0.0);

/// Newline-delimited service mode: reads envelopes line by line and writes
/// one reply line per Query or Action. Undecodable lines produce an
/// {"error":{...}} line. Returns the number of lines handled.
std::size_t serve_stream(const Bus& bus, std::istream& in, std::ostream& out);

/// Handles a single NDJSON line against a per-connection session table.
/// Returns the reply line (without newline) or nothing.
std::optional<std::string> handle_line(const Bus& bus, std::map<std::string, Session>& sessions,
                                       std::string_view line);

/// TCP service mode. Binds host:port, serves each connection on its own
/// thread until `stop` becomes true. `bound_port` receives the actual port
/// (useful with port 0).
void serve_tcp(const Bus& bus, const std::string& host, int port, const std::atomic<bool>& stop,
               std::atomic<int>* bound_port = nullptr);

}  // namespace chaingen::protocol
