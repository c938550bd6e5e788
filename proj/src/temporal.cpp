#include "chaingen/temporal.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

namespace chaingen::temporal {

using nlohmann::json;

std::vector<TimelineEntry> find_conflicts(const Timeline& timeline, const TimelineEntry& candidate) {
    if (candidate.duration <= 0) throw Error(Errc::invalid_entry, "candidate duration must be positive");
    std::vector<TimelineEntry> out;
    const Minute slot_end = candidate.end();
    for (const auto& existing : timeline) {
        if (candidate.start < existing.end() && slot_end > existing.start) out.push_back(existing);
    }
    return out;
}

Minute buffered_duration(Minute estimate) noexcept {
    // ceil(estimate * 6 / 5) in exact integer arithmetic
    return (estimate * 6 + 4) / 5;
}

std::vector<std::size_t> task_order(const std::vector<Task>& tasks, Minute now) {
    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t i) { return tasks[i].priority / static_cast<double>(tasks[i].deadline - now); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
    return order;
}

namespace {

void check_constraints(const ScheduleConstraints& c) {
    if (c.start_bound >= c.end_bound) {
        throw Error(Errc::invalid_constraints, "start_bound must be before end_bound");
    }
    if (c.step <= 0) throw Error(Errc::invalid_constraints, "time step must be positive");
}

void check_entry(const TimelineEntry& e) {
    if (e.start < 0 || e.duration <= 0) {
        throw Error(Errc::invalid_entry, "timeline entry needs start >= 0 and duration > 0");
    }
}

void insert_sorted(Timeline& timeline, TimelineEntry entry) {
    auto pos = std::upper_bound(timeline.begin(), timeline.end(), entry,
                                [](const TimelineEntry& a, const TimelineEntry& b) { return a.start < b.start; });
    timeline.insert(pos, std::move(entry));
}

}  // namespace

ScheduleResult schedule_tasks(const Timeline& events, const std::vector<Task>& tasks,
                              const ScheduleConstraints& constraints) {
    check_constraints(constraints);
    const Minute now = constraints.reference_now();
    for (const auto& e : events) check_entry(e);
    for (const auto& t : tasks) {
        if (t.estimate <= 0) throw Error(Errc::invalid_task, "task estimate must be positive");
        if (t.deadline <= now) throw Error(Errc::invalid_task, "task deadline must lie after now");
        if (!(t.priority >= 0.0)) throw Error(Errc::invalid_task, "task priority must be nonnegative");
    }

    ScheduleResult result;
    result.timeline = events;
    std::stable_sort(result.timeline.begin(), result.timeline.end(),
                     [](const TimelineEntry& a, const TimelineEntry& b) { return a.start < b.start; });

    for (std::size_t idx : task_order(tasks, now)) {
        const Task& task = tasks[idx];
        const Minute duration = buffered_duration(task.estimate);
        std::optional<ScheduledSlot> best;
        double best_score = -std::numeric_limits<double>::infinity();

        Minute current = constraints.start_bound;
        while (current + duration <= constraints.end_bound) {
            const Minute slot_end = current + duration;
            const TimelineEntry* blocker = nullptr;
            for (const auto& existing : result.timeline) {
                if (current < existing.end() && slot_end > existing.start) {
                    blocker = &existing;
                    break;
                }
            }
            if (blocker) {
                current = blocker->end();
                continue;
            }
            const double preference = constraints.preference_at(current);
            const double urgency = std::max(
                0.0, 1.0 - static_cast<double>(task.deadline - current) / static_cast<double>(task.deadline - now));
            const double score = task.priority + preference + urgency;
            if (score > best_score) {
                best_score = score;
                best = ScheduledSlot{current, slot_end, idx, task.kind, score};
            }
            current += constraints.step;
        }

        if (best) {
            insert_sorted(result.timeline, TimelineEntry{best->start, duration, task.kind});
            result.schedule.push_back(*best);
        }
    }

    result.unscheduled_count = tasks.size() - result.schedule.size();
    result.utilization = utilization(result.timeline, constraints);
    return result;
}

double utilization(const Timeline& timeline, const ScheduleConstraints& constraints) {
    check_constraints(constraints);
    double busy = 0.0;
    for (const auto& e : timeline) {
        check_entry(e);
        busy += e.duration;
    }
    return busy / static_cast<double>(constraints.end_bound - constraints.start_bound);
}

json to_json(const TimelineEntry& e) { return {{"start", e.start}, {"duration", e.duration}, {"kind", e.kind}}; }

TimelineEntry entry_from_json(const json& j) {
    try {
        return TimelineEntry{j.at("start").get<Minute>(), j.at("duration").get<Minute>(), j.value("kind", "")};
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("timeline entry: ") + e.what());
    }
}

json to_json(const Timeline& t) {
    json out = json::array();
    for (const auto& e : t) out.push_back(to_json(e));
    return out;
}

Timeline timeline_from_json(const json& j) {
    Timeline out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw Error(Errc::schema_violation, "timeline must be an array");
    for (const auto& e : j) out.push_back(entry_from_json(e));
    return out;
}

std::string format_clock(Minute m) {
    const Minute wrapped = ((m % 1440) + 1440) % 1440;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", wrapped / 60, wrapped % 60);
    return buf;
}

namespace {

ScheduleConstraints constraints_from_json(const json& j) {
    ScheduleConstraints c;
    c.start_bound = j.value("start_bound", 0);
    c.end_bound = j.value("end_bound", 1440);
    c.step = j.value("step", 30);
    if (j.contains("now")) c.now = j.at("now").get<Minute>();
    if (auto it = j.find("time_pref"); it != j.end() && it->is_array()) {
        std::vector<std::tuple<Minute, Minute, double>> windows;
        for (const auto& w : *it) {
            windows.emplace_back(w.at(0).get<Minute>(), w.at(1).get<Minute>(), w.at(2).get<double>());
        }
        c.time_preference = [windows](Minute t) {
            for (const auto& [from, to, value] : windows) {
                if (t >= from && t < to) return value;
            }
            return 0.0;
        };
    }
    return c;
}

}  // namespace

json TemporalService::query(const json& payload, const json& ctx) {
    const std::string op = payload.value("op", "");
    try {
        if (op == "now") {
            const Minute minute = ctx.value("now_min", 0);
            const std::string date = ctx.value("date", "1970-01-01");
            return {{"minute", minute}, {"date", date}, {"datetime", date + "T" + format_clock(minute)}};
        }
        if (op == "find_conflicts") {
            auto conflicts = find_conflicts(timeline_from_json(payload.value("timeline", json::array())),
                                            entry_from_json(payload.at("candidate")));
            return {{"conflicts", to_json(conflicts)}};
        }
        if (op == "schedule") {
            std::vector<Task> tasks;
            for (const auto& t : payload.value("tasks", json::array())) {
                tasks.push_back(Task{t.at("priority").get<double>(), t.at("deadline").get<Minute>(),
                                     t.at("estimate").get<Minute>(), t.value("kind", "")});
            }
            auto result = schedule_tasks(timeline_from_json(payload.value("events", json::array())), tasks,
                                         constraints_from_json(payload.value("constraints", json::object())));
            json slots = json::array();
            for (const auto& s : result.schedule) {
                slots.push_back({{"start", s.start}, {"end", s.end}, {"task", s.task_index}, {"kind", s.kind},
                                 {"score", s.score}});
            }
            return {{"schedule", slots},
                    {"timeline", to_json(result.timeline)},
                    {"utilization", result.utilization},
                    {"unscheduled", result.unscheduled_count}};
        }
        if (op == "utilization") {
            return {{"utilization", utilization(timeline_from_json(payload.value("timeline", json::array())),
                                                constraints_from_json(payload.value("constraints", json::object())))}};
        }
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("temporal payload: ") + e.what());
    }
    throw Error(Errc::unsupported_operation, "temporal has no op '" + op + "'");
}

}  // namespace chaingen::temporal
