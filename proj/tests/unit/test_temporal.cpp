#include <doctest.h>

#include "chaingen/temporal.hpp"
#include "instances.hpp"
#include "oracles.hpp"

using namespace chaingen;
using namespace chaingen::temporal;
using nlohmann::json;

namespace {

ScheduleConstraints constraints_of(const instance::ScheduleCase& c) {
    ScheduleConstraints k;
    k.start_bound = c.start_bound;
    k.end_bound = c.end_bound;
    k.step = c.step;
    k.time_preference = [&c](Minute t) { return c.pref(t); };
    return k;
}

}  // namespace

TEST_SUITE("temporal") {
    TEST_CASE("conflicts on half-open intervals") {
        CHECK(find_conflicts({}, {10, 30, "x"}).empty());
        const Timeline tl{{60, 60, "a"}};
        CHECK(find_conflicts(tl, {120, 30, "b"}).empty());
        CHECK(find_conflicts(tl, {30, 30, "b"}).empty());
        CHECK(find_conflicts(tl, {90, 10, "b"}).size() == 1);
        CHECK_THROWS_AS(find_conflicts(tl, {0, 0, "b"}), Error);
    }

    TEST_CASE("conflicts agree with minute-by-minute overlap") {
        const Timeline tl{{60, 60, "a"}, {150, 20, "b"}, {200, 40, "c"}};
        for (int s = 0; s < 240; ++s) {
            for (int d = 1; s + d <= 240; d += 7) {
                const auto got = find_conflicts(tl, {s, d, "q"});
                std::size_t expect = 0;
                for (const auto& e : tl) {
                    bool hit = false;
                    for (int m = s; m < s + d && !hit; ++m) hit = m >= e.start && m < e.end();
                    expect += hit;
                }
                CHECK(got.size() == expect);
            }
        }
    }

    TEST_CASE("buffered duration rounds up") {
        CHECK(buffered_duration(50) == 60);
        CHECK(buffered_duration(1) == 2);
        CHECK(buffered_duration(5) == 6);
        CHECK(buffered_duration(7) == 9);
    }

    TEST_CASE("single task on an empty horizon") {
        ScheduleConstraints c;
        c.start_bound = 0;
        c.end_bound = 480;
        const auto r = schedule_tasks({}, {{1.0, 600, 50, "work"}}, c);
        REQUIRE(r.schedule.size() == 1);
        CHECK(r.schedule[0].end - r.schedule[0].start == 60);
        // urgency grows toward the deadline, so the last probe that fits wins
        CHECK(r.schedule[0].start == 420);
        CHECK(r.utilization == doctest::Approx(60.0 / 480.0));
    }

    TEST_CASE("fully booked horizon") {
        ScheduleConstraints c;
        c.start_bound = 0;
        c.end_bound = 480;
        const auto r = schedule_tasks({{0, 480, "busy"}}, {{1, 300, 10, "a"}, {2, 400, 20, "b"}}, c);
        CHECK(r.schedule.empty());
        CHECK(r.unscheduled_count == 2);
        CHECK(r.utilization == doctest::Approx(1.0));
    }

    TEST_CASE("invalid inputs") {
        ScheduleConstraints c;
        c.start_bound = 100;
        c.end_bound = 100;
        CHECK_THROWS_AS(schedule_tasks({}, {}, c), Error);
        c.end_bound = 200;
        c.step = 0;
        CHECK_THROWS_AS(schedule_tasks({}, {}, c), Error);
        c.step = 30;
        try {
            (void)schedule_tasks({}, {{1, 50, 10, "late"}}, c);
            FAIL("expected invalid_task");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::invalid_task);
        }
        CHECK_THROWS_AS(schedule_tasks({}, {{1, 300, 0, "x"}}, c), Error);
        CHECK_THROWS_AS(schedule_tasks({{-5, 10, "e"}}, {}, c), Error);
    }

    TEST_CASE("task order uses priority over slack with stable ties") {
        const std::vector<Task> tasks{{1, 100, 10, "a"}, {2, 200, 10, "b"}, {3, 100, 10, "c"}, {1, 50, 10, "d"}};
        CHECK(task_order(tasks, 0) == std::vector<std::size_t>{2, 3, 0, 1});
    }

    TEST_CASE("three tasks, two events, matches exhaustive grid search") {
        const Timeline events{{60, 45, "meeting"}, {300, 60, "lunch"}};
        const std::vector<Task> tasks{{3, 400, 40, "report"}, {1, 470, 90, "errand"}, {2, 240, 25, "call"}};
        ScheduleConstraints c;
        c.start_bound = 0;
        c.end_bound = 480;
        c.time_preference = [](Minute t) { return t >= 120 && t < 240 ? 0.5 : 0.0; };
        const auto got = schedule_tasks(events, tasks, c);
        const auto want = oracle::schedule(events, tasks, 0, 480, 30, c.time_preference);
        REQUIRE(got.schedule.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(got.schedule[i].start == want[i].start);
            CHECK(got.schedule[i].end == want[i].end);
            CHECK(got.schedule[i].task_index == want[i].task);
            CHECK(got.schedule[i].score == want[i].score);
        }
    }

    TEST_CASE("randomized instances against the oracle and invariants") {
        Rng rng(2024);
        for (int n = 0; n < 300; ++n) {
            const auto c = instance::schedule_case(rng);
            const auto k = constraints_of(c);
            const auto got = schedule_tasks(c.events, c.tasks, k);
            const auto want = oracle::schedule(c.events, c.tasks, c.start_bound, c.end_bound, c.step,
                                               [&](int t) { return c.pref(t); });
            REQUIRE(got.schedule.size() == want.size());
            for (std::size_t i = 0; i < want.size(); ++i) {
                CHECK(got.schedule[i].start == want[i].start);
                CHECK(got.schedule[i].task_index == want[i].task);
                CHECK(got.schedule[i].score == want[i].score);
            }
            CHECK(got.unscheduled_count + got.schedule.size() == c.tasks.size());
            for (std::size_t i = 1; i < got.timeline.size(); ++i) {
                CHECK(got.timeline[i - 1].start <= got.timeline[i].start);
            }
            // placed tasks never overlap anything else on the timeline
            for (const auto& s : got.schedule) {
                CHECK(find_conflicts(got.timeline, {s.start, s.end - s.start, "probe"}).size() == 1);
                CHECK(s.start >= c.start_bound);
                CHECK(s.end <= c.end_bound);
            }
            const auto again = schedule_tasks(c.events, c.tasks, k);
            CHECK(again.schedule == got.schedule);
        }
    }

    TEST_CASE("single task beats every other feasible grid start") {
        Rng rng(77);
        for (int n = 0; n < 200; ++n) {
            auto c = instance::schedule_case(rng);
            c.tasks.resize(1);
            const auto k = constraints_of(c);
            const auto got = schedule_tasks(c.events, c.tasks, k);
            const auto& t = c.tasks[0];
            const int dur = buffered_duration(t.estimate);
            const auto want = oracle::schedule(c.events, c.tasks, c.start_bound, c.end_bound, c.step,
                                               [&](int m) { return c.pref(m); });
            if (want.empty()) {
                CHECK(got.schedule.empty());
                continue;
            }
            REQUIRE(got.schedule.size() == 1);
            std::vector<std::pair<int, int>> ents;
            for (const auto& e : c.events) ents.emplace_back(e.start, e.end());
            std::stable_sort(ents.begin(), ents.end(), [](auto& x, auto& y) { return x.first < y.first; });
            const auto probes = oracle::probe_walk(ents, dur, c.start_bound, c.end_bound, c.step);
            const auto free = oracle::free_starts(c.events, dur, c.start_bound, c.end_bound);
            for (int s : probes) {
                CHECK(std::binary_search(free.begin(), free.end(), s));
                const double urgency = std::max(
                    0.0, 1.0 - static_cast<double>(t.deadline - s) / static_cast<double>(t.deadline - c.start_bound));
                CHECK(got.schedule[0].score >= t.priority + c.pref(s) + urgency - 1e-12);
            }
        }
    }

    TEST_CASE("utilization arithmetic") {
        ScheduleConstraints c;
        c.start_bound = 0;
        c.end_bound = 480;
        CHECK(utilization({}, c) == 0.0);
        CHECK(utilization({{0, 480, "all"}}, c) == 1.0);
        CHECK(utilization({{0, 60, "a"}, {100, 30, "b"}}, c) == doctest::Approx(0.1875));
        c.end_bound = 0;
        CHECK_THROWS_AS(utilization({}, c), Error);
    }

    TEST_CASE("service ops") {
        TemporalService svc;
        const json ctx = {{"now_min", 1439}, {"date", "2024-01-02"}};
        CHECK(svc.query({{"op", "now"}}, ctx).at("datetime") == "2024-01-02T23:59");
        const auto conflicts = svc.query(
            {{"op", "find_conflicts"},
             {"timeline", {{{"start", 60}, {"duration", 60}}}},
             {"candidate", {{"start", 90}, {"duration", 10}}}},
            ctx);
        CHECK(conflicts.at("conflicts").size() == 1);
        const auto util = svc.query({{"op", "utilization"},
                                     {"timeline", {{{"start", 0}, {"duration", 60}}, {{"start", 60}, {"duration", 30}}}},
                                     {"constraints", {{"start_bound", 0}, {"end_bound", 480}}}},
                                    ctx);
        CHECK(util.at("utilization").get<double>() == doctest::Approx(0.1875));
        try {
            (void)svc.query({{"op", "teleport"}}, ctx);
            FAIL("expected unsupported_operation");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::unsupported_operation);
        }
        CHECK(format_clock(-1) == "23:59");
        CHECK(format_clock(1500) == "01:00");
    }
}
