#include "chaingen/agent.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "chaingen/error.hpp"
#include "chaingen/network.hpp"
#include "chaingen/random.hpp"

namespace chaingen::agent {

using nlohmann::json;

json to_json(const AgentConfig& c) {
    json j = {{"weights", to_json(c.weights)},
              {"candidate_k", c.candidate_k},
              {"search_radius_m", c.search_radius_m},
              {"max_repairs", c.max_repairs},
              {"strict", c.strict},
              {"home_return_gap_min", c.home_return_gap_min},
              {"evening_limit_min", c.evening_limit_min}};
    if (c.deadline) j["deadline_ms"] = c.deadline->count();
    return j;
}

AgentConfig agent_config_from_json(const json& j) {
    AgentConfig c;
    if (!j.is_object()) return c;
    c.weights = s4_weights_from_json(j.value("weights", json::object()));
    c.candidate_k = j.value("candidate_k", c.candidate_k);
    c.search_radius_m = j.value("search_radius_m", c.search_radius_m);
    c.max_repairs = j.value("max_repairs", c.max_repairs);
    c.strict = j.value("strict", c.strict);
    c.home_return_gap_min = j.value("home_return_gap_min", c.home_return_gap_min);
    c.evening_limit_min = j.value("evening_limit_min", c.evening_limit_min);
    if (j.contains("deadline_ms") && !j.at("deadline_ms").is_null()) {
        c.deadline = std::chrono::milliseconds(j.at("deadline_ms").get<long>());
    }
    validate(c);
    return c;
}

void validate(const AgentConfig& c) {
    if (c.max_repairs < 0 || c.candidate_k == 0 || c.search_radius_m <= 0.0) {
        throw Error(Errc::invalid_config, "agent: max_repairs >= 0, candidate_k >= 1, search_radius_m > 0");
    }
}

json to_json(const Block& b) {
    json j = {{"category", to_string(b.category)},
              {"label", b.label},
              {"planned_start", b.planned_start},
              {"duration", b.duration},
              {"window", {b.window_start, b.window_end}},
              {"fixed", b.fixed}};
    if (!b.poi_id.empty()) j["poi_id"] = b.poi_id;
    return j;
}

namespace {

// Discretionary activity templates: base rate, duration, deadline and
// preferred start windows (from, to, weight).
struct ActivityTemplate {
    Category category;
    double base_rate;
    int duration;
    int deadline;
    std::vector<std::tuple<int, int, double>> windows;
    const char* label;
};

const std::vector<ActivityTemplate>& activity_templates() {
    static const std::vector<ActivityTemplate> t = {
        {Category::dining, 0.30, 60, 1350, {{690, 810, 0.6}, {1080, 1260, 1.0}}, "meal restaurant dinner"},
        {Category::shopping, 0.20, 45, 1290, {{600, 720, 0.5}, {960, 1200, 1.0}}, "shopping groceries"},
        {Category::sports_leisure, 0.15, 75, 1380, {{420, 540, 0.6}, {1020, 1260, 1.0}}, "exercise leisure"},
        {Category::life_services, 0.20, 40, 1140, {{540, 1020, 1.0}}, "errand service"},
        {Category::tourism, 0.15, 120, 1080, {{600, 1020, 1.0}}, "sightseeing visit"},
    };
    return t;
}

constexpr int kScheduleStart = 420;
constexpr int kScheduleEnd = 1380;
constexpr int kCommuteBuffer = 30;

int ceil_min(double minutes) { return static_cast<int>(std::ceil(minutes - 1e-9)); }

bool outdoor_label(const std::string& label) { return label == "park" || label == "landmark"; }

TravelMode main_mode_of(const json& route) {
    TravelMode best = TravelMode::walk;
    double best_d = -1.0;
    for (const auto& leg : route.value("legs", json::array())) {
        if (leg.at("distance_m").get<double>() > best_d) {
            best_d = leg.at("distance_m").get<double>();
            best = parse_mode(leg.at("mode").get<std::string>());
        }
    }
    return best;
}

json modes_json(const Persona& p) {
    json arr = json::array();
    for (TravelMode m : p.modes()) arr.push_back(to_string(m));
    return arr;
}

json preferences_json(const Persona& p) {
    json prefs = json::object();
    for (Category c : kAllCategories) prefs[std::string(to_string(c))] = p.preference(c);
    return prefs;
}

StageRecord stage_record(Stage stage) {
    StageRecord r;
    r.stage = stage;
    return r;
}

bool same_place(const GeoPoint& a, const GeoPoint& b) { return haversine_distance(a, b) <= 1.0; }

// Closing minute caps how long an agent may linger at a venue.
int linger_limit(const spatial::SpatialWorld& world, const ActivityRecord& r) {
    if (r.category == Category::residence || r.poi_id.empty()) return kDayEndMin;
    const auto idx = world.pois.find(r.poi_id);
    if (!idx) return kDayEndMin;
    const auto& poi = world.pois.at(*idx);
    return poi.always_open() ? kDayEndMin : poi.close_min;
}

}  // namespace

DayAgent::DayAgent(Persona persona, DayContext context, Services services, AgentConfig config)
    : persona_(std::move(persona)),
      context_(std::move(context)),
      services_(std::move(services)),
      config_(std::move(config)),
      session_(persona_.id + "/day" + std::to_string(context_.day)) {
    validate(persona_);
    validate(config_);
    if (!services_.world) throw Error(Errc::invalid_config, "agent needs a spatial world");
    if (!services_.environment) services_.environment = std::make_shared<env::Environment>(env::Scenario{});
    if (!services_.memory) services_.memory = std::make_shared<memory::MemoryStore>();
    if (!services_.reasoner) services_.reasoner = std::make_shared<HeuristicReasoner>();
    bus_.register_service(std::make_shared<temporal::TemporalService>());
    bus_.register_service(std::make_shared<spatial::SpatialService>(services_.world));
    bus_.register_service(std::make_shared<env::EnvironmentService>(services_.environment));
    bus_.register_service(std::make_shared<memory::MemoryService>(services_.memory));
    bus_.set_clock([this] { return static_cast<double>(clock_min_); });
    session_.context() = {{"now_min", clock_min_}, {"date", context_.date}, {"persona_id", persona_.id}};
    started_ = std::chrono::steady_clock::now();
}

json DayAgent::ask(const std::string& tool, json payload, std::vector<std::string>& calls) {
    session_.context()["now_min"] = clock_min_;
    const auto query = protocol::make_query(session_, tool, std::move(payload), clock_min_);
    calls.push_back(query.id);
    const auto reply = bus_.dispatch(session_, query);
    if (!reply.status || !reply.status->ok) {
        const std::string code = reply.status ? reply.status->code : "no_status";
        return {{"error", {{"code", code}, {"message", reply.status ? reply.status->message : ""}}}};
    }
    return reply.payload;
}

void DayAgent::perform(const std::string& tool, json payload) {
    session_.context()["now_min"] = clock_min_;
    const auto action = protocol::make_action(session_, tool, std::move(payload), clock_min_);
    const auto feedback = bus_.perform(session_, action);
    if (!feedback.status || !feedback.status->ok) {
        throw Error(Errc::schema_violation,
                    tool + " action failed: " + (feedback.status ? feedback.status->message : std::string("?")));
    }
}

void DayAgent::check_deadline() const {
    if (config_.deadline && std::chrono::steady_clock::now() - started_ > *config_.deadline) {
        throw Error(Errc::timeout, "persona " + persona_.id + " exceeded its " +
                                       std::to_string(config_.deadline->count()) + " ms budget");
    }
}

StageOutput DayAgent::propose(Stage stage, const json& inputs) {
    StageOutput out;
    try {
        out = services_.reasoner->propose(stage, inputs);
    } catch (const Error& e) {
        if (e.code() == Errc::no_feasible_option) throw;
        throw Error(Errc::reasoner_failure, std::string(stage_code(stage)) + " (" + services_.reasoner->name() +
                                                "): " + e.what());
    } catch (const std::exception& e) {
        throw Error(Errc::reasoner_failure, std::string(stage_code(stage)) + ": " + e.what());
    }
    check_deadline();
    return out;
}

void DayAgent::complete(StageRecord& record) {
    auto out = propose(record.stage, record.inputs);
    record.output = std::move(out.output);
    record.rationale = std::move(out.rationale);
    record.fallback = out.fallback;
}

std::vector<Block> DayAgent::plan_structure() {
    Rng rng(mix_seed(context_.seed ^ 0xb10c5ULL));
    const auto& world = *services_.world;
    std::vector<Block> fixed;

    const bool has_anchor = persona_.anchor && !persona_.anchor_poi_id.empty();
    if (has_anchor && persona_.occupation == "worker") {
        const int ws = 480 + 15 * static_cast<int>(rng.integer(0, 6));
        const int pm_end = ws + 540;
        fixed.push_back({persona_.anchor_category, "work", ws, 240, ws, ws + 240, true, persona_.anchor_poi_id, {}});
        fixed.push_back({persona_.anchor_category, "work", ws + 300, pm_end - ws - 300, ws + 300, pm_end, true,
                         persona_.anchor_poi_id, {}});
    } else if (has_anchor && persona_.occupation == "student") {
        const int ws = 480 + 15 * static_cast<int>(rng.integer(0, 4));
        fixed.push_back({persona_.anchor_category, "school", ws, 420, ws, ws + 420, true, persona_.anchor_poi_id, {}});
    }

    std::vector<Block> blocks = fixed;
    temporal::Timeline events;
    for (const auto& b : fixed) {
        events.push_back({b.window_start - kCommuteBuffer, b.window_end - b.window_start + 2 * kCommuteBuffer, "fixed"});
    }
    if (fixed.size() == 2) {
        // Lunch between the two work halves, returning to the anchor.
        const int from = fixed[0].window_end;
        const int to = fixed[1].window_start;
        blocks.push_back({Category::dining, "lunch meal cafe", from, 30, from, to, false, {}, persona_.anchor});
    }

    // Discretionary tasks, weighted by persona preference over base rates.
    const bool busy = !fixed.empty();
    const int n_tasks = busy ? static_cast<int>(rng.integer(0, 2)) : static_cast<int>(rng.integer(2, 4));
    const auto& tpl = activity_templates();
    std::vector<double> weights;
    for (const auto& t : tpl) weights.push_back(t.base_rate * persona_.preference(t.category));
    std::vector<temporal::Task> tasks;
    std::vector<std::size_t> task_tpl;
    for (int i = 0; i < n_tasks; ++i) {
        const long pick = rng.weighted(weights);
        if (pick < 0) break;
        const auto& t = tpl[static_cast<std::size_t>(pick)];
        bool available = false;
        for (const auto& p : world.pois.pois()) available = available || p.category == t.category;
        if (!available) continue;
        tasks.push_back({persona_.preference(t.category), t.deadline, t.duration + 30, std::string(t.label)});
        task_tpl.push_back(static_cast<std::size_t>(pick));
    }

    std::vector<std::string> calls;
    for (std::size_t idx : temporal::task_order(tasks, kDayStartMin)) {
        const auto& t = tpl[task_tpl[idx]];
        json windows = json::array();
        for (const auto& [from, to, w] : t.windows) windows.push_back({from, to, w});
        const json reply = ask("temporal",
                               {{"op", "schedule"},
                                {"events", temporal::to_json(events)},
                                {"tasks", json::array({{{"priority", tasks[idx].priority},
                                                        {"deadline", tasks[idx].deadline},
                                                        {"estimate", tasks[idx].estimate},
                                                        {"kind", tasks[idx].kind}}})},
                                {"constraints",
                                 {{"start_bound", kScheduleStart},
                                  {"end_bound", kScheduleEnd},
                                  {"step", 15},
                                  {"now", kDayStartMin},
                                  {"time_pref", windows}}}},
                               calls);
        const auto schedule = reply.value("schedule", json::array());
        if (schedule.empty()) continue;
        const int start = schedule.at(0).at("start").get<int>();
        const int end = schedule.at(0).at("end").get<int>();
        events.push_back({start, end - start, "task"});
        blocks.push_back({t.category, t.label, start + 15, t.duration, start, config_.evening_limit_min, false, {}, {}});
    }

    std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
        if (a.planned_start != b.planned_start) return a.planned_start < b.planned_start;
        return a.fixed && !b.fixed;
    });
    // A discretionary block must be done (onward trip included) before the
    // next fixed commitment.
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].fixed || blocks[i].onward) continue;
        for (std::size_t j = i + 1; j < blocks.size(); ++j) {
            if (!blocks[j].fixed) continue;
            blocks[i].window_end = std::min(blocks[i].window_end, blocks[j].window_start);
            blocks[i].onward = persona_.anchor;
            break;
        }
    }
    return blocks;
}

Decision DayAgent::decide(const DecisionInput& in) {
    const Block& b = in.block;
    clock_min_ = in.now;
    const json here = spatial::point_to_json(in.location);
    const std::string category(to_string(b.category));
    Decision d;
    d.category = b.category;

    // S1: where am I, what is going on, what do I remember.
    StageRecord s1 = stage_record(Stage::situational_awareness);
    const json env_now = ask("environment",
                             {{"op", "perceive"}, {"mode", "realtime"}, {"time_min", in.now}, {"location", here},
                              {"category", category}},
                             s1.tool_calls);
    const json recalled = ask("memory",
                              {{"op", "integrate"},
                               {"k", 8},
                               {"context",
                                {{"time_h", hours(in.now)}, {"location", here}, {"activity", b.label},
                                 {"category", category}}}},
                              s1.tool_calls);
    s1.inputs = {{"now", in.now},
                 {"location", here},
                 {"block", to_json(b)},
                 {"environment", env_now},
                 {"memory",
                  {{"category_mass", recalled.value("category_mass", json::object())},
                   {"consistency", recalled.value("consistency", 1.0)}}},
                 {"persona", to_json(persona_)},
                 {"context", session_.context()}};
    complete(s1);

    // S2: hard constraints from commitments and the forecast.
    StageRecord s2 = stage_record(Stage::constraints);
    const int target = std::max(in.now, b.planned_start);
    const json conflicts = ask("temporal",
                               {{"op", "find_conflicts"},
                                {"timeline", temporal::to_json(in.commitments)},
                                {"candidate", {{"start", target}, {"duration", std::max(1, b.duration)}, {"kind", b.label}}}},
                               s2.tool_calls);
    const json forecast = ask("environment",
                              {{"op", "predict"}, {"time_min", target}, {"now_min", in.now}, {"location", here},
                               {"category", category}},
                              s2.tool_calls);
    s2.inputs = {{"now", in.now},
                 {"situation", s1.output},
                 {"timeline", temporal::to_json(in.commitments)},
                 {"conflicts", conflicts.value("conflicts", json::array())},
                 {"forecast", forecast}};
    complete(s2);

    // S3: candidates with travel there and onward, screened.
    StageRecord s3 = stage_record(Stage::options);
    json pois = json::array();
    if (b.fixed) {
        const json poi = ask("spatial", {{"op", "poi"}, {"id", b.poi_id}}, s3.tool_calls);
        if (!poi.contains("error")) pois.push_back(poi);
    } else {
        const json found = ask("spatial",
                               {{"op", "poi_search"},
                                {"origin", here},
                                {"text", b.label},
                                {"category", category},
                                {"radius_m", config_.search_radius_m},
                                {"k", config_.candidate_k},
                                {"preferences", preferences_json(persona_)}},
                               s3.tool_calls);
        pois = found.value("results", json::array());
    }
    const json modes = modes_json(persona_);
    const json onward_to = spatial::point_to_json(b.onward.value_or(persona_.home));
    json candidates = json::array();
    for (const auto& poi : pois) {
        const json loc = poi.contains("location") ? poi.at("location")
                                                  : spatial::point_to_json({poi.at("lon").get<double>(), poi.at("lat").get<double>()});
        json cand = {{"id", poi.at("id")},
                     {"category", poi.value("category", category)},
                     {"label", poi.value("label", "")},
                     {"location", loc},
                     {"open_min", poi.value("open_min", 0)},
                     {"close_min", poi.value("close_min", 1440)},
                     {"rating", poi.value("rating", 0.0)},
                     {"distance_m", haversine_distance(in.location, spatial::point_from_json(loc))}};
        const json there = ask("spatial", {{"op", "travel"}, {"from", here}, {"to", loc}, {"modes", modes}},
                               s3.tool_calls);
        bool reachable = !there.contains("error");
        double travel = reachable ? there.at("duration_min").get<double>() : 0.0;
        double onward = 0.0;
        if (reachable && !b.fixed) {
            const json back = ask("spatial", {{"op", "travel"}, {"from", loc}, {"to", onward_to}, {"modes", modes}},
                                  s3.tool_calls);
            reachable = !back.contains("error");
            if (reachable) onward = back.at("duration_min").get<double>();
        }
        const int start = std::max(in.now + ceil_min(travel), b.fixed ? b.window_start : b.planned_start);
        const int end = b.fixed ? b.window_end : start + b.duration;
        cand["reachable"] = reachable;
        cand["travel_min"] = travel;
        cand["mode"] = reachable ? json(to_string(main_mode_of(there))) : json(nullptr);
        cand["onward_min"] = onward;
        cand["start"] = start;
        cand["end"] = end;
        candidates.push_back(std::move(cand));
    }
    s3.inputs = {{"now", in.now}, {"constraints", s2.output}, {"candidates", candidates}};
    complete(s3);

    // Safety net: whatever the backend says, a candidate must pass the
    // agent's own hard screen.
    json hard = {{"earliest_start", b.window_start}, {"latest_end", b.window_end}, {"blocked", json::array()},
                 {"avoid_zones", json::array()}};
    for (const auto& e : in.commitments) hard["blocked"].push_back({e.start, e.end()});
    for (const auto& z : forecast.value("emergencies", json::array())) {
        hard["avoid_zones"].push_back({{"center", z.at("center")}, {"radius_m", z.at("radius_m")}});
    }
    json feasible = json::array();
    for (const auto& id : s3.output.value("feasible", json::array())) {
        for (const auto& c : candidates) {
            if (c.at("id") == id && screen_candidate(c, hard).empty()) feasible.push_back(c);
        }
    }
    if (feasible.empty()) {
        throw Error(Errc::no_feasible_option, "no feasible " + category + " option for '" + b.label + "'");
    }

    // S4: score each option, with habit drawn from event memories at the venue.
    StageRecord s4 = stage_record(Stage::evaluation);
    const bool wet = s2.output.value("wet", false);
    json options = json::array();
    for (auto opt : feasible) {
        const json memories = ask("memory",
                                  {{"op", "retrieve"},
                                   {"k", 1'000'000},
                                   {"poi_id", opt.at("id")},
                                   {"context",
                                    {{"time_h", hours(opt.at("start").get<int>())},
                                     {"location", opt.at("location")},
                                     {"activity", b.label},
                                     {"category", category}}}},
                                  s4.tool_calls);
        json events = json::array();
        for (const auto& m : memories.value("items", json::array())) {
            if (m.value("tier", "") == "event") events.push_back(m);
        }
        opt["search_radius_m"] = std::max(config_.search_radius_m, opt.at("distance_m").get<double>());
        opt["category_preference"] = persona_.preference(b.category);
        opt["memories"] = events;
        opt["habit"] = habit_strength(events);
        opt["outdoor"] = outdoor_label(opt.value("label", ""));
        opt["wet"] = wet;
        options.push_back(std::move(opt));
    }
    s4.inputs = {{"now", in.now}, {"weights", to_json(config_.weights)}, {"options", options}};
    complete(s4);

    // S5: choose and predict the rest of the day.
    StageRecord s5 = stage_record(Stage::decision);
    s5.inputs = {{"now", in.now},
                 {"scores", s4.output.value("scores", json::array())},
                 {"options", options},
                 {"latest_end", b.window_end}};
    complete(s5);

    auto find_option = [&](const json& id) -> const json* {
        for (const auto& o : options) {
            if (o.at("id") == id) return &o;
        }
        return nullptr;
    };
    const json* chosen = s5.output.contains("choice") ? find_option(s5.output.at("choice")) : nullptr;
    if (!chosen) {
        d.safety_override = true;
        for (const auto& s : s4.output.value("scores", json::array())) {
            if ((chosen = find_option(s.value("id", json()))) != nullptr) break;
        }
        if (!chosen) chosen = &options.front();
    }
    const json& c = *chosen;
    d.poi_id = c.at("id").get<std::string>();
    d.location = spatial::point_from_json(c.at("location"));
    d.start = c.at("start").get<int>();
    d.end = c.at("end").get<int>();
    // Accept a backend's own timing when it stays feasible.
    if (s5.output.contains("start") && s5.output.contains("end") && s5.output.at("start").is_number_integer() &&
        s5.output.at("end").is_number_integer()) {
        json trial = c;
        trial["start"] = s5.output.at("start");
        trial["end"] = s5.output.at("end");
        const int ts = trial.at("start").get<int>(), te = trial.at("end").get<int>();
        if (ts >= d.start && te > ts && (!b.fixed || te == d.end) && screen_candidate(trial, hard).empty()) {
            d.start = ts;
            d.end = te;
        }
    }
    d.travel_min = c.at("travel_min").get<double>();
    if (c.at("mode").is_string()) d.mode = parse_mode(c.at("mode").get<std::string>());
    for (const auto& s : s4.output.value("scores", json::array())) {
        if (s.value("id", json()) == c.at("id")) d.score = s.value("score", 0.0);
    }
    d.stages = {std::move(s1), std::move(s2), std::move(s3), std::move(s4), std::move(s5)};
    return d;
}

namespace {

std::optional<spatial::Route> route_or_none(const spatial::SpatialWorld& world, const GeoPoint& a, const GeoPoint& b,
                                            const std::vector<TravelMode>& modes) {
    try {
        return spatial::travel_between(world.network, a, b, modes, world.cost_weights);
    } catch (const Error&) {
        return std::nullopt;
    }
}

ActivityRecord home_record(const Persona& p, int start, int end) {
    ActivityRecord r;
    r.category = Category::residence;
    r.poi_id = p.home_poi_id;
    r.location = p.home;
    r.start_min = start;
    r.end_min = end;
    return r;
}

}  // namespace

DayResult DayAgent::run() {
    const auto& world = *services_.world;
    const auto modes = persona_.modes();
    ActivityChain chain;
    chain.persona_id = persona_.id;
    chain.day = context_.day;
    chain.seed = context_.seed;

    // Phase 1: context; phase 2: coarse structure.
    clock_min_ = kDayStartMin;
    const std::vector<Block> blocks = plan_structure();
    chain.records.push_back(home_record(persona_, kDayStartMin, kDayStartMin));

    // Phases 3-5: refine each block, route to it, update state.
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        check_deadline();
        const Block& block = blocks[bi];
        ActivityRecord& prev = chain.records.back();
        DecisionInput in;
        in.block = block;
        in.now = prev.end_min;
        in.location = prev.location;
        for (std::size_t j = bi + 1; j < blocks.size(); ++j) {
            if (blocks[j].fixed) {
                in.commitments.push_back({blocks[j].window_start, blocks[j].window_end - blocks[j].window_start,
                                          blocks[j].label});
            }
        }

        Decision d;
        try {
            d = decide(in);
        } catch (const Error& e) {
            if (e.code() != Errc::no_feasible_option) throw;
            if (block.fixed) {
                chain.notes.push_back("anchor '" + block.poi_id + "' unreachable or unavailable; " + block.label +
                                      " block omitted and time spent elsewhere");
            }
            continue;
        }

        if (d.poi_id == prev.poi_id && same_place(d.location, prev.location)) {
            prev.end_min = std::max(prev.end_min, d.end);
            continue;
        }

        const int leave_prev = std::max(prev.end_min, d.start - ceil_min(d.travel_min));
        // Long idle gaps away from home are spent at home.
        if (prev.category != Category::residence && leave_prev - prev.end_min >= config_.home_return_gap_min) {
            const auto to_home = route_or_none(world, prev.location, persona_.home, modes);
            const auto from_home = route_or_none(world, persona_.home, d.location, modes);
            if (to_home && from_home) {
                const int arrive = prev.end_min + ceil_min(to_home->duration_min);
                const int leave = d.start - ceil_min(from_home->duration_min);
                if (leave - arrive >= 30) {
                    ActivityRecord home = home_record(persona_, arrive, leave);
                    home.mode = to_home->main_mode();
                    home.travel_min = to_home->duration_min;
                    chain.records.push_back(home);
                    d.travel_min = from_home->duration_min;
                    d.mode = from_home->main_mode();
                }
            }
        }
        ActivityRecord& last = chain.records.back();
        const int depart = std::max(last.end_min, d.start - ceil_min(d.travel_min));
        last.end_min = std::max(last.end_min, std::min(depart, linger_limit(world, last)));

        ActivityRecord rec;
        rec.category = d.category;
        rec.poi_id = d.poi_id;
        rec.location = d.location;
        rec.start_min = d.start;
        rec.end_min = d.end;
        rec.mode = d.mode;
        rec.travel_min = d.travel_min;
        rec.stages = std::move(d.stages);
        const std::string weather = rec.stages.front().output.value("weather", "clear");
        chain.records.push_back(std::move(rec));

        clock_min_ = d.end;
        memory::Event ev;
        ev.time_h = hours(d.start);
        ev.location = d.location;
        ev.activity = block.label;
        ev.category = d.category;
        ev.conditions = {{"weather", weather}};
        ev.emotion = std::clamp((d.score - 0.5) * 2.0, -1.0, 1.0);
        ev.poi_id = d.poi_id;
        perform("memory", {{"op", "record"}, {"event", memory::to_json(ev)}});
    }

    // Back home for the night; the overnight stay is split at midnight.
    ActivityRecord& last = chain.records.back();
    int arrive = last.end_min;
    std::optional<TravelMode> mode;
    double travel = 0.0;
    const bool at_home = last.category == Category::residence && same_place(last.location, persona_.home);
    if (!at_home) {
        if (const auto route = route_or_none(world, last.location, persona_.home, modes)) {
            arrive = last.end_min + ceil_min(route->duration_min);
            mode = route->main_mode();
            travel = route->duration_min;
        } else {
            chain.notes.push_back("no route home from '" + last.poi_id + "'");
        }
    }
    if (at_home) {
        last.end_min = std::max(last.end_min, 1440);
    } else {
        ActivityRecord home = home_record(persona_, arrive, arrive < 1440 ? 1440 : kDayEndMin);
        home.mode = mode;
        home.travel_min = travel;
        chain.records.push_back(home);
    }
    if (chain.records.back().end_min < kDayEndMin) {
        const int from = chain.records.back().end_min;
        chain.records.push_back(home_record(persona_, from, kDayEndMin));
    }

    clock_min_ = kDayEndMin;
    perform("memory", {{"op", "consolidate"}, {"now_h", context_.day * 24.0 + kDayEndMin / 60.0}});
    perform("memory", {{"op", "sleep"}});

    // Phase 6: validate and repair.
    const auto options = eval::options_for(persona_);
    DayResult result;
    result.report = eval::validate_chain(chain, world, options);
    while (!result.report.ok() && result.repairs < config_.max_repairs) {
        if (repair_chain(chain, world, result.report, modes) == 0) break;
        ++result.repairs;
        result.report = eval::validate_chain(chain, world, options);
    }
    if (result.repairs > 0) chain.notes.push_back("repaired " + std::to_string(result.repairs) + " record(s)");
    for (const auto& n : chain.notes) result.report.notes.push_back(n);
    if (!result.report.ok() && config_.strict) {
        throw Error(Errc::unrepairable_chain, std::to_string(result.report.violations.size()) +
                                                  " violation(s) remain after " + std::to_string(result.repairs) +
                                                  " repair(s)");
    }
    result.chain = std::move(chain);
    return result;
}

int repair_chain(ActivityChain& chain, const spatial::SpatialWorld& world, const eval::ValidationReport& report,
                 const std::vector<TravelMode>& modes) {
    auto& recs = chain.records;
    if (recs.size() < 3) return 0;
    // Drop the latest removable record named by any violation; the first and
    // last records (the home anchors) always stay.
    std::size_t victim = recs.size();
    for (const auto& v : report.violations) {
        for (auto it = v.records.rbegin(); it != v.records.rend(); ++it) {
            if (*it > 0 && *it + 1 < recs.size()) {
                victim = std::min(victim, *it);
                break;
            }
        }
    }
    if (victim == recs.size()) return 0;
    recs.erase(recs.begin() + static_cast<long>(victim));

    // Re-link: the record now at `victim` is reached from its new predecessor.
    ActivityRecord& prev = recs[victim - 1];
    ActivityRecord& next = recs[victim];
    if (prev.category == Category::residence && next.category == Category::residence &&
        same_place(prev.location, next.location) && next.start_min < 1440) {
        prev.end_min = next.end_min;
        recs.erase(recs.begin() + static_cast<long>(victim));
    } else if (same_place(prev.location, next.location)) {
        next.mode.reset();
        next.travel_min = 0.0;
    } else if (const auto route = route_or_none(world, prev.location, next.location, modes)) {
        next.mode = route->main_mode();
        next.travel_min = route->duration_min;
    }
    return 1;
}

DayResult run_day(const Persona& persona, const DayContext& context, const Services& services,
                  const AgentConfig& config) {
    DayAgent agent(persona, context, services, config);
    return agent.run();
}

}  // namespace chaingen::agent
