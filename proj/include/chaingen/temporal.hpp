#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chaingen/protocol.hpp"

namespace chaingen::temporal {

/// Minutes since day start. Intervals are half-open [start, start + duration).
using Minute = int;

struct TimelineEntry {
    Minute start = 0;
    Minute duration = 0;
    std::string kind;

    Minute end() const noexcept { return start + duration; }
    friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

using Timeline = std::vector<TimelineEntry>;

struct Task {
    double priority = 0.0;
    Minute deadline = 0;
    Minute estimate = 0;
    std::string kind;
};

/// Preference over candidate start times; values expected in [0, 1].
using TimePreference = std::function<double(Minute)>;

struct ScheduleConstraints {
    Minute start_bound = 0;
    Minute end_bound = 1440;
    TimePreference time_preference;  // empty means 0 everywhere
    Minute step = 30;
    /// Urgency reference; defaults to start_bound.
    std::optional<Minute> now;

    Minute reference_now() const noexcept { return now.value_or(start_bound); }
    double preference_at(Minute t) const { return time_preference ? time_preference(t) : 0.0; }
};

struct ScheduledSlot {
    Minute start = 0;
    Minute end = 0;
    std::size_t task_index = 0;
    std::string kind;
    double score = 0.0;

    friend bool operator==(const ScheduledSlot&, const ScheduledSlot&) = default;
};

struct ScheduleResult {
    std::vector<ScheduledSlot> schedule;
    Timeline timeline;  // events plus placed tasks, sorted by start
    double utilization = 0.0;
    std::size_t unscheduled_count = 0;
};

/// Entries e with candidate.start < e.end and candidate.end > e.start.
/// Throws invalid_entry for a non-positive candidate duration.
std::vector<TimelineEntry> find_conflicts(const Timeline& timeline, const TimelineEntry& candidate);

/// Buffered slot length for a task estimate (x1.2, rounded up to whole minutes).
Minute buffered_duration(Minute estimate) noexcept;

/// Orders tasks by priority / (deadline - now), descending; submission order
/// breaks ties. Returns task indices.
std::vector<std::size_t> task_order(const std::vector<Task>& tasks, Minute now);

/// Greedy priority-driven placement: each task takes the best-scoring
/// conflict-free start found by a walk that steps by `step` minutes and jumps
/// to a blocker's end on conflict. Score = priority + preference + urgency.
/// Earlier starts win score ties. Throws invalid_constraints / invalid_task / invalid_entry.
ScheduleResult schedule_tasks(const Timeline& events, const std::vector<Task>& tasks,
                              const ScheduleConstraints& constraints);

/// Sum of entry durations over the horizon length. Throws invalid_constraints.
double utilization(const Timeline& timeline, const ScheduleConstraints& constraints);

/// "temporal" tool: ops now / find_conflicts / schedule / utilization.
class TemporalService : public protocol::ToolService {
public:
    std::string name() const override { return "temporal"; }
    nlohmann::json query(const nlohmann::json& payload, const nlohmann::json& session_context) override;
};

nlohmann::json to_json(const TimelineEntry& e);
TimelineEntry entry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Timeline& t);
Timeline timeline_from_json(const nlohmann::json& j);

/// "HH:MM" for a minute-of-day (wrapping past 24h).
std::string format_clock(Minute m);

}  // namespace chaingen::temporal
