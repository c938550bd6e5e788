// One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include "chaingen/config.hpp"
#include "chaingen/embedding.hpp"
#include "chaingen/evaluation.hpp"
#include "chaingen/memory.hpp"
#include "chaingen/pipeline.hpp"
#include "chaingen/temporal.hpp"
#include "chaingen/validation.hpp"
#include "chaingen/world.hpp"
#include "instances.hpp"
#include "oracles.hpp"

using namespace chaingen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Counts checks and keeps the first failure message.
struct Tally {
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::string first;

    void expect(bool ok, const std::string& what) {
        ++checks;
        if (ok) return;
        if (failures++ == 0) first = what;
    }
    Outcome outcome(const std::string& summary) const {
        if (failures == 0) return {true, summary};
        return {false, summary + "; " + std::to_string(failures) + " of " + std::to_string(checks) +
                           " checks failed, first: " + first};
    }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

eval::Matrix euclidean(const eval::Points& pts) {
    eval::Matrix d(pts.size(), std::vector<double>(pts.size(), 0.0));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < pts[i].size(); ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
            d[i][j] = std::sqrt(s);
        }
    }
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome quality_arithmetic() {
    const double a = eval::total_quality(7.45, 8.70, 0.5);
    const double b = eval::total_quality(7.61, 9.10, 0.5);
    Tally t;
    t.expect(std::abs(a - 8.07) <= 0.01, "7.45/8.70 gave " + fmt(a));
    t.expect(std::abs(b - 8.36) <= 0.01, "7.61/9.10 gave " + fmt(b));
    return t.outcome("Q_total " + fmt(a, 3) + " and " + fmt(b, 3));
}

Outcome diversity_endpoints() {
    Tally t;
    const std::pair<double, double> cases[] = {{-1.0, 1.0}, {0.0, 5.5}, {1.0, 10.0}};
    for (const auto& [div, want] : cases) {
        t.expect(eval::diversity_score_gd(div) == want, "DIV " + fmt(div, 1) + " gave " + fmt(eval::diversity_score_gd(div)));
    }
    return t.outcome("Score_GD(-1, 0, 1) = (1, 5.5, 10)");
}

Outcome metric_oracles() {
    Rng rng(20240501);
    Tally t;
    const int n = 150;
    for (int i = 0; i < n; ++i) {
        const auto size = static_cast<std::size_t>(rng.integer(1, 12));
        const auto p = instance::distribution(rng, size);
        const auto q = instance::distribution(rng, size);
        t.expect(std::abs(eval::js_divergence(p, q) - oracle::js(p, q)) <= 1e-9, "js instance " + std::to_string(i));

        std::vector<double> xs(static_cast<std::size_t>(rng.integer(1, 12)));
        std::vector<double> ys(static_cast<std::size_t>(rng.integer(1, 12)));
        for (auto& x : xs) x = static_cast<double>(rng.integer(0, 9));
        for (auto& y : ys) y = rng.uniform() < 0.5 ? static_cast<double>(rng.integer(0, 9)) : rng.uniform(0, 9);
        t.expect(eval::ks_statistic(xs, ys) == oracle::ks(xs, ys), "ks instance " + std::to_string(i));

        const auto a = instance::category_sequence(rng, 10);
        const auto b = instance::category_sequence(rng, 10);
        t.expect(eval::dtw_distance(a, b) == oracle::dtw(a, b), "dtw instance " + std::to_string(i));

        const auto pts_n = static_cast<std::size_t>(rng.integer(3, 12));
        eval::Points pts(pts_n, std::vector<double>(static_cast<std::size_t>(rng.integer(1, 3))));
        for (auto& pt : pts) {
            for (auto& x : pt) x = rng.uniform(-10, 10);
        }
        const auto d = euclidean(pts);
        const auto k = static_cast<std::size_t>(rng.integer(2, static_cast<long>(pts_n) - 1));
        t.expect(oracle::partition_of(eval::ward_cluster(d, k)) == oracle::ward(d, k),
                 "ward instance " + std::to_string(i));

        eval::Assignment labels(pts_n);
        for (auto& l : labels) l = static_cast<int>(rng.integer(0, 3));
        labels[0] = 0;
        labels[1] = 1;
        t.expect(std::abs(eval::silhouette(d, labels) - oracle::silhouette(d, labels)) <= 1e-9,
                 "silhouette instance " + std::to_string(i));
    }
    return t.outcome(std::to_string(n) + " instances each for JS, KS, DTW, Ward, silhouette");
}

Outcome scheduler_optimality() {
    Rng rng(20240502);
    Tally t;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        const auto c = instance::schedule_case(rng);
        temporal::ScheduleConstraints k;
        k.start_bound = c.start_bound;
        k.end_bound = c.end_bound;
        k.step = c.step;
        k.time_preference = [&c](temporal::Minute m) { return c.pref(m); };
        const auto got = temporal::schedule_tasks(c.events, c.tasks, k);
        const auto want =
            oracle::schedule(c.events, c.tasks, c.start_bound, c.end_bound, c.step, [&c](int m) { return c.pref(m); });
        bool same = got.schedule.size() == want.size();
        for (std::size_t j = 0; same && j < want.size(); ++j) {
            same = got.schedule[j].start == want[j].start && got.schedule[j].end == want[j].end &&
                   got.schedule[j].task_index == want[j].task && got.schedule[j].score == want[j].score;
        }
        t.expect(same, "instance " + std::to_string(i));
    }
    return t.outcome(std::to_string(n) + " instances match the grid-search oracle");
}

Outcome memory_exactness() {
    Rng rng(20240503);
    Tally t;
    const GeoPoint home{121.50, 31.23};
    std::size_t largest = 0;
    for (int round = 0; round < 100; ++round) {
        memory::MemoryStore store;
        const long n = rng.integer(1, 250);
        for (long i = 0; i < n; ++i) store.record_event(instance::event(rng, home));
        const auto all = store.all_items();
        largest = std::max(largest, all.size());
        memory::Context ctx;
        ctx.time_h = rng.uniform(0, 72);
        ctx.location = {home.lon + rng.uniform(-0.05, 0.05), home.lat + rng.uniform(-0.05, 0.05)};
        ctx.category = static_cast<Category>(rng.integer(0, 7));
        ctx.activity = std::string(to_string(*ctx.category));
        std::vector<std::pair<double, std::string>> want;
        for (const auto& m : all) {
            const std::string label = m.event.activity.empty() ? std::string(to_string(m.event.category)) : m.event.activity;
            want.emplace_back(oracle::relevance(ctx, m, store.weights(), text::similarity(ctx.activity, label)), m.id);
        }
        std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const auto k = static_cast<std::size_t>(rng.integer(1, static_cast<long>(all.size())));
        const auto got = store.retrieve(ctx, k);
        bool same = got.size() == k;
        for (std::size_t i = 0; same && i < k; ++i) {
            same = std::abs(got[i].relevance - want[i].first) <= 1e-12;
            // ids must agree unless the oracle itself sees a near tie at this rank
            const bool tie = (i > 0 && std::abs(want[i].first - want[i - 1].first) < 1e-12) ||
                             (i + 1 < want.size() && std::abs(want[i].first - want[i + 1].first) < 1e-12);
            if (same && !tie) same = got[i].item.id == want[i].second;
        }
        t.expect(same, "retrieval store " + std::to_string(round));
    }

    for (int round = 0; round < 100; ++round) {
        memory::RelevanceWeights w;
        w.decay_per_hour = rng.uniform(0.0, 0.1);
        w.theta_transfer = rng.uniform(0.2, 0.8);
        w.theta_forget = rng.uniform(0.05, 0.5);
        memory::MemoryStore store(w);
        for (int i = 0; i < 12; ++i) {
            memory::MemoryItem m;
            m.id = "m" + std::to_string(i);
            m.event = instance::event(rng, home);
            m.features = memory::build_features(m.event.time_h, m.event.location, m.event.category, m.event.emotion);
            m.store = rng.uniform() < 0.3 ? memory::StoreKind::long_term : memory::StoreKind::short_term;
            m.strength = rng.uniform(0.1, 1.0);
            m.access_count = static_cast<std::size_t>(rng.integer(1, 5));
            m.last_access_h = rng.uniform(0, 48);
            m.last_decay_h = rng.uniform(0, 48);
            store.insert(m);
        }
        const double now = 60.0;
        std::vector<oracle::Item> script;
        for (const auto& m : store.short_term()) {
            const double imp = w.w_frequency * (static_cast<double>(m.access_count) / (m.access_count + 1.0)) +
                               w.w_recency * std::exp(-w.decay_per_hour * (now - m.last_access_h)) +
                               w.w_salience * std::abs(m.event.emotion);
            script.push_back({m.id, false, m.strength, m.last_decay_h, imp});
        }
        for (const auto& m : store.long_term()) script.push_back({m.id, true, m.strength, m.last_decay_h, 0.0});
        const auto want = oracle::consolidate(script, now, w.theta_transfer, w.decay_per_hour, w.theta_forget);
        store.consolidate(now);
        std::map<std::string, oracle::Item> expect;
        for (const auto& it : want) expect[it.id] = it;
        bool same = store.short_term().size() + store.long_term().size() == want.size();
        for (const auto& m : store.short_term()) same = same && expect.count(m.id) && !expect[m.id].long_term;
        for (const auto& m : store.long_term()) {
            same = same && expect.count(m.id) && expect[m.id].long_term &&
                   std::abs(m.strength - expect[m.id].strength) <= 1e-12;
        }
        t.expect(same, "consolidation round " + std::to_string(round));
    }
    return t.outcome("100 stores (up to " + std::to_string(largest) + " items) and 100 consolidation scripts");
}

struct Corpus {
    std::vector<ActivityChain> chains;
};

Outcome end_to_end(Corpus& corpus) {
    const auto world = world::make_synthetic_world();
    const world::WorldSpec spec;
    pipeline::BatchServices services;
    services.world = world;
    services.environment = std::make_shared<env::Environment>(world::make_synthetic_scenario(spec, 1));
    pipeline::BatchConfig cfg;
    cfg.samples = 100;
    cfg.seed = 20240504;
    cfg.personas = pipeline::synthesize_personas(cfg.samples, cfg.seed, cfg.profile, *world);

    const fs::path dir = fs::temp_directory_path() / "chaingen_acceptance";
    fs::create_directories(dir);
    auto run = [&](std::size_t workers, const std::string& name) {
        cfg.workers = workers;
        cfg.out_path = (dir / name).string();
        return pipeline::run_batch(cfg, services);
    };
    const auto first = run(1, "w1a.jsonl");
    const auto again = run(1, "w1b.jsonl");
    const auto four = run(4, "w4.jsonl");

    Tally t;
    t.expect(world->pois.size() == 50, "world has " + std::to_string(world->pois.size()) + " POIs");
    t.expect(first.metrics.successes == 100, std::to_string(first.metrics.failures) + " samples failed");
    std::size_t violations = 0;
    for (std::size_t i = 0; i < first.chains.size(); ++i) {
        const auto report = eval::validate_chain(first.chains[i], *world, eval::options_for(cfg.personas[i]));
        violations += report.violations.size();
        for (const auto& v : report.violations) t.expect(false, "chain " + std::to_string(i) + ": " + v.message);
    }
    const std::string a = slurp(dir / "w1a.jsonl");
    t.expect(!a.empty(), "empty corpus");
    t.expect(a == slurp(dir / "w1b.jsonl"), "rerun differs");
    t.expect(a == slurp(dir / "w4.jsonl"), "4-worker corpus differs");
    fs::remove_all(dir);
    corpus.chains = first.chains;
    return t.outcome("100 persona-days, " + std::to_string(violations) + " violations, rerun and 1 vs 4 workers " +
                     (t.failures == 0 ? "byte-identical" : "compared"));
}

Outcome parallel_speedup() {
    const auto world = world::make_synthetic_world();
    pipeline::BatchServices services;
    services.world = world;
    services.environment = std::make_shared<env::Environment>(world::make_synthetic_scenario({}, 1));
    const auto latency = std::chrono::microseconds(config::Backend{}.mock_latency_us);
    services.reasoner = [latency](std::size_t) { return std::make_shared<agent::LatencyReasoner>(latency); };
    pipeline::BatchConfig cfg;
    cfg.samples = 200;
    cfg.seed = 20240505;
    cfg.workers = 1;
    const auto one = pipeline::run_batch(cfg, services).metrics;
    cfg.workers = 4;
    const auto four = pipeline::run_batch(cfg, services).metrics;
    const double ratio = four.throughput_per_min / one.throughput_per_min;
    const unsigned cores = std::thread::hardware_concurrency();
    Tally t;
    t.expect(ratio >= 2.0, "speedup " + fmt(ratio, 2) + " below 2");
    return t.outcome("mock backend, 200 samples: " + fmt(one.throughput_per_min, 1) + " vs " +
                     fmt(four.throughput_per_min, 1) + " samples/min, speedup " + fmt(ratio, 2) + " on " +
                     std::to_string(cores) + " core(s)");
}

Outcome self_evaluation(const Corpus& corpus) {
    Tally t;
    t.expect(!corpus.chains.empty(), "no corpus from the end-to-end run");
    if (corpus.chains.empty()) return t.outcome("skipped");
    const auto r = eval::evaluate_corpus(corpus.chains, &corpus.chains);
    t.expect(r.js_spatial && *r.js_spatial <= 1e-6, "JS " + fmt(r.js_spatial.value_or(-1), 9));
    for (const auto& [cat, ks] : r.ks) {
        t.expect(ks.start == 0.0 && ks.end == 0.0 && ks.duration == 0.0, "KS nonzero for " + cat);
    }
    t.expect(r.q_obj && std::abs(*r.q_obj - 10.0) <= 1e-9, "Q_obj " + fmt(r.q_obj.value_or(-1), 6));
    return t.outcome("JS " + fmt(r.js_spatial.value_or(-1), 9) + ", KS 0 over " + std::to_string(r.ks.size()) +
                     " categories, Q_obj " + fmt(r.q_obj.value_or(-1), 3));
}

}  // namespace

int main() {
    Corpus corpus;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"quality aggregation reproduces the reference totals", quality_arithmetic},
        {"diversity score endpoints", diversity_endpoints},
        {"metric oracle suite", metric_oracles},
        {"scheduler optimality", scheduler_optimality},
        {"memory retrieval and consolidation exactness", memory_exactness},
        {"end-to-end determinism and validity", [&] { return end_to_end(corpus); }},
        {"parallel speedup on the mock backend", parallel_speedup},
        {"evaluation self-consistency", [&] { return self_evaluation(corpus); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf(
        "criterion 9 NOT REPRODUCIBLE: judge-based quality scores, reasoning-quality scores, ablation deltas and "
        "the reference cluster counts need the fine-tuned models, the hosted judge and the private survey data; "
        "criteria 1-8 and the unit invariants stand in for them\n");
    return failed == 0 ? 0 : 1;
}
