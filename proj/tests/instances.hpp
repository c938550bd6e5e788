#pragma once

// Random small instances shared by the unit and acceptance suites.

#include <algorithm>
#include <vector>

#include "chaingen/memory.hpp"
#include "chaingen/random.hpp"
#include "chaingen/temporal.hpp"
#include "chaingen/types.hpp"

namespace instance {

using namespace chaingen;

struct ScheduleCase {
    temporal::Timeline events;
    std::vector<temporal::Task> tasks;
    int start_bound = 0;
    int end_bound = 480;
    int step = 30;
    // Piecewise preference windows [from, to) -> value.
    std::vector<std::tuple<int, int, double>> windows;

    double pref(int t) const {
        for (const auto& [a, b, v] : windows) {
            if (t >= a && t < b) return v;
        }
        return 0.0;
    }
};

inline ScheduleCase schedule_case(Rng& rng) {
    ScheduleCase c;
    c.start_bound = static_cast<int>(rng.integer(0, 12)) * 10;
    c.end_bound = c.start_bound + static_cast<int>(rng.integer(12, 48)) * 10;
    const int horizon = c.end_bound - c.start_bound;
    const long n_events = rng.integer(0, 3);
    for (long i = 0; i < n_events; ++i) {
        const int start = c.start_bound + static_cast<int>(rng.integer(0, horizon - 10));
        const int dur = static_cast<int>(rng.integer(5, 120));
        c.events.push_back({start, dur, "e" + std::to_string(i)});
    }
    const long n_tasks = rng.integer(1, 4);
    for (long i = 0; i < n_tasks; ++i) {
        temporal::Task t;
        t.priority = static_cast<double>(rng.integer(0, 5));
        t.deadline = c.start_bound + static_cast<int>(rng.integer(1, horizon + 120));
        t.estimate = static_cast<int>(rng.integer(5, 150));
        t.kind = "t" + std::to_string(i);
        c.tasks.push_back(t);
    }
    const long n_windows = rng.integer(0, 2);
    for (long i = 0; i < n_windows; ++i) {
        const int a = c.start_bound + static_cast<int>(rng.integer(0, horizon));
        const int b = a + static_cast<int>(rng.integer(10, 200));
        c.windows.emplace_back(a, b, static_cast<double>(rng.integer(0, 4)) / 4.0);
    }
    return c;
}

inline std::vector<Category> category_sequence(Rng& rng, std::size_t max_len, long alphabet = 8) {
    const std::size_t len = static_cast<std::size_t>(rng.integer(1, static_cast<long>(max_len)));
    std::vector<Category> out(len);
    for (auto& c : out) c = static_cast<Category>(rng.integer(0, alphabet - 1));
    return out;
}

inline std::vector<double> distribution(Rng& rng, std::size_t n, double zero_prob = 0.2) {
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& x : p) {
        x = rng.uniform() < zero_prob ? 0.0 : rng.uniform(0.01, 1.0);
        s += x;
    }
    if (s == 0.0) {
        p[0] = 1.0;
        return p;
    }
    for (auto& x : p) x /= s;
    return p;
}

inline memory::Event event(Rng& rng, GeoPoint origin = {121.50, 31.23}) {
    memory::Event e;
    e.time_h = rng.uniform(0.0, 72.0);
    e.location = {origin.lon + rng.uniform(-0.05, 0.05), origin.lat + rng.uniform(-0.05, 0.05)};
    e.category = static_cast<Category>(rng.integer(0, 7));
    e.emotion = rng.uniform(-1.0, 1.0);
    e.activity = std::string(to_string(e.category));
    return e;
}

}  // namespace instance
