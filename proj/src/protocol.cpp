#include "chaingen/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

namespace chaingen::protocol {

std::string_view to_string(Kind k) noexcept {
    switch (k) {
        case Kind::query: return "query";
        case Kind::response: return "response";
        case Kind::action: return "action";
        case Kind::feedback: return "feedback";
    }
    return "?";
}

Kind parse_kind(std::string_view name) {
    if (name == "query") return Kind::query;
    if (name == "response") return Kind::response;
    if (name == "action") return Kind::action;
    if (name == "feedback") return Kind::feedback;
    throw Error(Errc::unknown_kind, "'" + std::string(name) + "' is not one of query/response/action/feedback");
}

bool operator==(const Envelope& a, const Envelope& b) {
    return a.id == b.id && a.session_id == b.session_id && a.ref_id == b.ref_id && a.kind == b.kind &&
           a.tool == b.tool && a.payload == b.payload && a.status == b.status &&
           a.timestamp == b.timestamp && a.metadata == b.metadata;
}

namespace {

bool all_finite(const json& j) {
    switch (j.type()) {
        case json::value_t::number_float: return std::isfinite(j.get<double>());
        case json::value_t::array:
        case json::value_t::object:
            for (const auto& v : j) {
                if (!all_finite(v)) return false;
            }
            return true;
        default: return true;
    }
}

[[noreturn]] void schema(const std::string& what) { throw Error(Errc::schema_violation, what); }

}  // namespace

void validate(const Envelope& env) {
    switch (env.kind) {
        case Kind::query:
        case Kind::response:
        case Kind::action:
        case Kind::feedback: break;
        default: throw Error(Errc::invalid_kind, "envelope kind out of range");
    }
    if (env.id.empty()) schema("id must be a nonempty string");
    if (env.session_id.empty()) schema("session_id must be a nonempty string");
    if (!std::isfinite(env.timestamp)) schema("timestamp must be finite");
    if (!env.payload.is_object()) schema("payload must be an object");
    if (!env.metadata.is_object()) schema("metadata must be an object");
    if (!all_finite(env.payload) || !all_finite(env.metadata)) schema("non-finite number in payload or metadata");

    const bool is_reply = env.kind == Kind::response || env.kind == Kind::feedback;
    if (is_reply && (!env.ref_id || env.ref_id->empty())) {
        throw Error(Errc::missing_ref_id, std::string(to_string(env.kind)) + " must reference a prior message");
    }
    if (!is_reply && env.status) schema("status is only carried by response/feedback");
    if ((env.kind == Kind::query || env.kind == Kind::action) && (!env.tool || env.tool->empty())) {
        schema(std::string(to_string(env.kind)) + " must name a tool");
    }
    if (env.kind == Kind::feedback && env.tool) schema("feedback carries no tool");
}

std::string encode_message(const Envelope& env) {
    validate(env);
    json j = json::object();
    j["id"] = env.id;
    j["session_id"] = env.session_id;
    if (env.ref_id) j["ref_id"] = *env.ref_id;
    j["kind"] = to_string(env.kind);
    if (env.tool) j["tool"] = *env.tool;
    j["payload"] = env.payload;
    if (env.status) {
        json s = {{"ok", env.status->ok}};
        if (!env.status->ok) {
            s["code"] = env.status->code;
            s["message"] = env.status->message;
        }
        j["status"] = std::move(s);
    }
    j["timestamp"] = env.timestamp;
    j["metadata"] = env.metadata;
    try {
        return j.dump();
    } catch (const json::exception& e) {
        schema(std::string("unencodable content: ") + e.what());
    }
}

std::size_t max_payload_bytes() {
    constexpr std::size_t kDefault = 1u << 20;
    if (const char* v = std::getenv("CHAINGEN_MAX_PAYLOAD_BYTES")) {
        char* end = nullptr;
        const unsigned long long n = std::strtoull(v, &end, 10);
        if (end != v && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
    }
    return kDefault;
}

namespace {

const std::string& require_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) schema(std::string("'") + key + "' must be a string");
    return it->get_ref<const std::string&>();
}

}  // namespace

Envelope decode_message(std::string_view bytes) {
    if (bytes.size() > max_payload_bytes()) {
        schema("message of " + std::to_string(bytes.size()) + " bytes exceeds limit of " +
               std::to_string(max_payload_bytes()));
    }
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw Error(Errc::malformed_json, e.what(), e.byte);
    }
    if (!j.is_object()) schema("envelope must be a JSON object");

    // kind is checked first so unknown kinds are reported as such.
    Envelope env;
    env.kind = parse_kind(require_string(j, "kind"));

    static const std::unordered_set<std::string> kKnown = {"id",      "session_id", "ref_id",   "kind",
                                                           "tool",    "payload",    "status",   "timestamp",
                                                           "metadata"};
    for (const auto& [key, _] : j.items()) {
        if (!kKnown.count(key)) schema("unexpected field '" + key + "'");
    }

    env.id = require_string(j, "id");
    env.session_id = require_string(j, "session_id");
    if (j.contains("ref_id")) env.ref_id = require_string(j, "ref_id");
    if (j.contains("tool")) env.tool = require_string(j, "tool");
    if (j.contains("payload")) env.payload = j.at("payload");
    if (j.contains("metadata")) env.metadata = j.at("metadata");
    if (auto it = j.find("timestamp"); it != j.end()) {
        if (!it->is_number()) schema("timestamp must be a number");
        env.timestamp = it->get<double>();
    }
    if (auto it = j.find("status"); it != j.end()) {
        if (!it->is_object() || !it->contains("ok") || !(*it)["ok"].is_boolean()) {
            schema("status must be an object with boolean 'ok'");
        }
        Status s;
        s.ok = (*it)["ok"].get<bool>();
        if (!s.ok) {
            s.code = require_string(*it, "code");
            s.message = require_string(*it, "message");
        } else if (it->size() != 1) {
            schema("ok status carries no code/message");
        }
        env.status = std::move(s);
    }
    validate(env);
    return env;
}

void Session::append(Envelope env) {
    validate(env);
    if (env.session_id != id_) {
        throw Error(Errc::session_mismatch, "envelope for session '" + env.session_id + "' appended to '" + id_ + "'");
    }
    if (ids_.count(env.id)) throw Error(Errc::duplicate_id, "message id '" + env.id + "' already in session");
    if (env.ref_id && !ids_.count(*env.ref_id)) {
        throw Error(Errc::dangling_ref, "ref_id '" + *env.ref_id + "' not found in session");
    }
    ids_.insert(env.id);
    log_.push_back(std::move(env));
}

const Envelope* Session::find(const std::string& message_id) const {
    if (!ids_.count(message_id)) return nullptr;
    for (const auto& e : log_) {
        if (e.id == message_id) return &e;
    }
    return nullptr;
}

std::string Session::next_id(std::string_view prefix) {
    for (;;) {
        std::string candidate = std::string(prefix) + "-" + std::to_string(++counter_);
        if (!ids_.count(candidate)) return candidate;
    }
}

json ToolService::act(const json& /*payload*/, const json& /*session_context*/) {
    throw Error(Errc::unsupported_operation, "tool '" + name() + "' accepts no actions");
}

Bus::Bus()
    : clock_([] {
          using namespace std::chrono;
          return duration<double>(system_clock::now().time_since_epoch()).count();
      }) {}

void Bus::register_service(std::shared_ptr<ToolService> service) {
    auto name = service->name();
    services_[name] = std::move(service);
}

bool Bus::has_service(const std::string& name) const { return services_.count(name) != 0; }

std::vector<std::string> Bus::service_names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : services_) out.push_back(name);
    return out;
}

Envelope Bus::reply(Session& session, const Envelope& request, Kind reply_kind) const {
    Envelope out;
    out.session_id = session.id();
    out.ref_id = request.id;
    out.kind = reply_kind;
    if (reply_kind == Kind::response) out.tool = request.tool;

    auto it = services_.find(*request.tool);
    if (it == services_.end()) {
        out.status = Status::failure("unknown_tool", "no tool service named '" + *request.tool + "'");
    } else {
        try {
            out.payload = request.kind == Kind::query ? it->second->query(request.payload, session.context())
                                                      : it->second->act(request.payload, session.context());
            if (!out.payload.is_object()) out.payload = json{{"result", out.payload}};
            out.status = Status::success();
        } catch (const Error& e) {
            out.payload = json::object();
            out.status = Status::failure(std::string(to_string(e.code())), e.detail());
        } catch (const std::exception& e) {
            out.payload = json::object();
            out.status = Status::failure("tool_internal", e.what());
        }
    }
    out.id = session.next_id(reply_kind == Kind::response ? "r" : "f");
    out.timestamp = std::max(request.timestamp, clock_());
    session.append(out);
    return out;
}

Envelope Bus::dispatch(Session& session, const Envelope& query) const {
    if (query.kind != Kind::query) {
        throw Error(Errc::wrong_kind, "dispatch expects a query, got " + std::string(to_string(query.kind)));
    }
    session.append(query);
    return reply(session, query, Kind::response);
}

Envelope Bus::perform(Session& session, const Envelope& action) const {
    if (action.kind != Kind::action) {
        throw Error(Errc::wrong_kind, "perform expects an action, got " + std::string(to_string(action.kind)));
    }
    session.append(action);
    return reply(session, action, Kind::feedback);
}

Envelope make_query(Session& session, std::string tool, json payload, double timestamp) {
    Envelope e;
    e.id = session.next_id("q");
    e.session_id = session.id();
    e.kind = Kind::query;
    e.tool = std::move(tool);
    e.payload = std::move(payload);
    e.timestamp = timestamp;
    return e;
}

Envelope make_action(Session& session, std::string tool, json payload, double timestamp) {
    Envelope e = make_query(session, std::move(tool), std::move(payload), timestamp);
    e.kind = Kind::action;
    return e;
}

namespace {

std::string error_line(const Error& e) {
    json err = {{"code", to_string(e.code())}, {"message", e.detail()}};
    if (e.offset()) err["offset"] = *e.offset();
    return json{{"error", err}}.dump();
}

}  // namespace

std::optional<std::string> handle_line(const Bus& bus, std::map<std::string, Session>& sessions,
                                       std::string_view line) {
    try {
        Envelope env = decode_message(line);
        auto it = sessions.find(env.session_id);
        if (it == sessions.end()) it = sessions.emplace(env.session_id, Session(env.session_id)).first;
        Session& session = it->second;
        switch (env.kind) {
            case Kind::query: return encode_message(bus.dispatch(session, env));
            case Kind::action: return encode_message(bus.perform(session, env));
            case Kind::response:
            case Kind::feedback: session.append(std::move(env)); return std::nullopt;
        }
    } catch (const Error& e) {
        return error_line(e);
    }
    return std::nullopt;
}

std::size_t serve_stream(const Bus& bus, std::istream& in, std::ostream& out) {
    std::map<std::string, Session> sessions;
    std::size_t handled = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++handled;
        if (auto reply = handle_line(bus, sessions, line)) {
            out << *reply << '\n';
            out.flush();
        }
    }
    return handled;
}

namespace {

bool send_all(int fd, const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

void serve_connection(const Bus& bus, int fd, const std::atomic<bool>& stop) {
    std::map<std::string, Session> sessions;
    std::string buffer;
    char chunk[4096];
    const std::size_t limit = max_payload_bytes();
    while (!stop.load()) {
        pollfd p{fd, POLLIN, 0};
        const int ready = ::poll(&p, 1, 100);
        if (ready < 0) break;
        if (ready == 0) continue;
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (auto reply = handle_line(bus, sessions, line)) {
                if (!send_all(fd, *reply + "\n")) {
                    ::close(fd);
                    return;
                }
            }
        }
        if (buffer.size() > limit) {
            send_all(fd, error_line(Error(Errc::schema_violation, "line exceeds payload limit")) + "\n");
            buffer.clear();
        }
    }
    ::close(fd);
}

}  // namespace

void serve_tcp(const Bus& bus, const std::string& host, int port, const std::atomic<bool>& stop,
               std::atomic<int>* bound_port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res) {
        throw Error(Errc::io_failure, "cannot resolve listen address " + host);
    }
    const int listener = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (listener < 0 || ::bind(listener, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listener, 16) != 0) {
        ::freeaddrinfo(res);
        if (listener >= 0) ::close(listener);
        throw Error(Errc::io_failure, "cannot listen on " + host + ":" + port_str + ": " + std::strerror(errno));
    }
    ::freeaddrinfo(res);
    if (bound_port) {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
        bound_port->store(ntohs(addr.sin_port));
    }

    std::vector<std::thread> workers;
    while (!stop.load()) {
        pollfd p{listener, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept(listener, nullptr, nullptr);
        if (fd < 0) continue;
        workers.emplace_back(serve_connection, std::cref(bus), fd, std::cref(stop));
    }
    ::close(listener);
    for (auto& t : workers) t.join();
}

}  // namespace chaingen::protocol
