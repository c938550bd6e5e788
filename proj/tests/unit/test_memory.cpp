#include <doctest.h>

#include <cmath>
#include <set>

#include "chaingen/embedding.hpp"
#include "chaingen/memory.hpp"
#include "instances.hpp"
#include "oracles.hpp"

using namespace chaingen;
using namespace chaingen::memory;
using nlohmann::json;

namespace {

const GeoPoint kHome{121.50, 31.23};

std::string label(const MemoryItem& m) {
    return m.event.activity.empty() ? std::string(to_string(m.event.category)) : m.event.activity;
}

Context context_near(Rng& rng) {
    Context c;
    c.time_h = rng.uniform(0, 72);
    c.location = {kHome.lon + rng.uniform(-0.05, 0.05), kHome.lat + rng.uniform(-0.05, 0.05)};
    c.category = static_cast<Category>(rng.integer(0, 7));
    c.activity = std::string(to_string(*c.category));
    c.emotion = rng.uniform(-1, 1);
    return c;
}

Scored scored(const std::string& id, Category c, double rel, std::vector<double> f = {}) {
    Scored s;
    s.item.id = id;
    s.item.event.category = c;
    s.item.features = f.empty() ? std::vector<double>(3, 0.0) : std::move(f);
    s.relevance = rel;
    return s;
}

}  // namespace

TEST_SUITE("memory") {
    TEST_CASE("identical item scores one in every component") {
        MemoryStore store;
        Event e;
        e.time_h = 10;
        e.location = kHome;
        e.category = Category::dining;
        e.activity = "lunch";
        store.record_event(e);
        Context c;
        c.time_h = 10;
        c.location = kHome;
        c.category = Category::dining;
        c.activity = "lunch";
        const auto t = relevance_terms(c, store.short_term()[0], store.weights());
        CHECK(t.cos == doctest::Approx(1.0));
        CHECK(t.time == 1.0);
        CHECK(t.space == 1.0);
        CHECK(t.semantic == doctest::Approx(1.0));
        CHECK(t.total == doctest::Approx(1.0));
    }

    TEST_CASE("periodic time similarity") {
        RelevanceWeights w;
        w.lambda_time_per_hour = 0.0;
        CHECK(time_similarity(24.0, w) == doctest::Approx(1.0));
        CHECK(time_similarity(12.0, w) == doctest::Approx(-1.0));
        RelevanceWeights d;
        CHECK(time_similarity(6.0, d) == doctest::Approx(std::cos(M_PI / 2) * 0.5));
        CHECK(std::exp(-d.lambda_time_per_hour * 6.0) == doctest::Approx(0.5));
    }

    TEST_CASE("weights validation and dimension checks") {
        RelevanceWeights w;
        w.a_cos = 0.5;
        CHECK_THROWS_AS(validate(w), Error);
        w = {};
        w.theta_forget = 0.0;
        CHECK_THROWS_AS(validate(w), Error);
        try {
            (void)weighted_cosine({1, 2}, {1, 2, 3}, {});
            FAIL("expected dimension_mismatch");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::dimension_mismatch);
        }
        MemoryStore store;
        MemoryItem bad;
        bad.features = {1.0};
        CHECK_THROWS_AS(store.insert(bad), Error);
    }

    TEST_CASE("three hand-built items order like the term-by-term oracle") {
        MemoryStore store;
        Event near;
        near.time_h = 9;
        near.location = kHome;
        near.category = Category::employment;
        near.activity = "office work";
        Event far = near;
        far.location = {kHome.lon + 0.03, kHome.lat};
        far.activity = "factory shift";
        Event odd = near;
        odd.time_h = 21;
        odd.category = Category::dining;
        odd.activity = "dinner";
        for (const auto& e : {near, far, odd}) store.record_event(e);
        Context c;
        c.time_h = 33;
        c.location = kHome;
        c.category = Category::employment;
        c.activity = "office work";
        const auto all = store.all_items();
        const auto got = store.retrieve(c, all.size());
        std::vector<std::pair<double, std::string>> want;
        for (const auto& m : all) {
            want.emplace_back(oracle::relevance(c, m, store.weights(), text::similarity(c.activity, label(m))), m.id);
        }
        std::sort(want.begin(), want.end(), [](auto& a, auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        REQUIRE(got.size() == want.size());
        CHECK(got[0].item.event.activity == "office work");
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(got[i].item.id == want[i].second);
            CHECK(got[i].relevance == doctest::Approx(want[i].first).epsilon(1e-12));
        }
    }

    TEST_CASE("retrieval matches exhaustive scoring") {
        Rng rng(99);
        for (int round = 0; round < 20; ++round) {
            MemoryStore store;
            const long n = rng.integer(1, 200);
            for (long i = 0; i < n; ++i) store.record_event(instance::event(rng, kHome));
            const Context c = context_near(rng);
            const auto all = store.all_items();
            std::vector<std::pair<double, std::string>> want;
            for (const auto& m : all) {
                want.emplace_back(oracle::relevance(c, m, store.weights(), text::similarity(c.activity, label(m))), m.id);
            }
            std::sort(want.begin(), want.end(), [](auto& a, auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            const std::size_t k = static_cast<std::size_t>(rng.integer(1, static_cast<long>(all.size()) + 5));
            const auto got = store.retrieve(c, k);
            REQUIRE(got.size() == std::min(k, all.size()));
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].relevance == doctest::Approx(want[i].first).epsilon(1e-12));
                const bool near_tie = (i > 0 && std::abs(want[i].first - want[i - 1].first) < 1e-12) ||
                                      (i + 1 < want.size() && std::abs(want[i].first - want[i + 1].first) < 1e-12);
                if (!near_tie) CHECK(got[i].item.id == want[i].second);
            }
        }
        MemoryStore empty;
        CHECK(empty.retrieve(Context{}, 3).empty());
        CHECK_THROWS_AS(empty.retrieve(Context{}, 0), Error);
    }

    TEST_CASE("single item store") {
        MemoryStore store;
        Rng rng(1);
        const auto id = store.record_event(instance::event(rng, kHome));
        const auto got = store.retrieve(context_near(rng), 5);
        // the event plus its pattern-tier twin
        REQUIRE(got.size() == 2);
        std::set<std::string> ids{got[0].item.id, got[1].item.id};
        CHECK(ids.count(id) == 1);
    }

    TEST_CASE("softmax attention") {
        const auto u = softmax({0.3, 0.3, 0.3, 0.3}, 5.0);
        for (double a : u) CHECK(a == doctest::Approx(0.25));
        const auto sharp = softmax({0.1, 0.9, 0.5}, 500.0);
        CHECK(sharp[1] == doctest::Approx(1.0));
        const auto h = softmax({0.2, 0.5, 0.9}, 2.0);
        const double z = std::exp(0.4) + std::exp(1.0) + std::exp(1.8);
        CHECK(h[0] == doctest::Approx(std::exp(0.4) / z));
        CHECK(h[1] == doctest::Approx(std::exp(1.0) / z));
        CHECK(h[2] == doctest::Approx(std::exp(1.8) / z));
    }

    TEST_CASE("integration is a convex combination") {
        Rng rng(12);
        for (int round = 0; round < 100; ++round) {
            std::vector<Scored> items;
            const long n = rng.integer(1, 8);
            for (long i = 0; i < n; ++i) {
                std::vector<double> f(4);
                for (auto& x : f) x = rng.uniform(-1, 1);
                items.push_back(scored("m" + std::to_string(i), static_cast<Category>(rng.integer(0, 2)),
                                       rng.uniform(-1, 1), f));
            }
            const auto out = integrate(items, rng.uniform(0.5, 8), 0.3);
            double sum = 0.0;
            for (double a : out.attention) {
                CHECK(a >= 0.0);
                sum += a;
            }
            CHECK(sum == doctest::Approx(1.0));
            CHECK(out.kept.size() + out.dropped.size() == items.size());
            for (std::size_t j = 0; j < 4; ++j) {
                double lo = INFINITY, hi = -INFINITY;
                for (const auto& s : out.kept) {
                    lo = std::min(lo, s.item.features[j]);
                    hi = std::max(hi, s.item.features[j]);
                }
                CHECK(out.synthesis[j] >= lo - 1e-12);
                CHECK(out.synthesis[j] <= hi + 1e-12);
            }
        }
        CHECK_THROWS_AS(integrate({}, 1.0, 0.3), Error);
    }

    TEST_CASE("conflicting items trigger resolution") {
        const std::vector<Scored> items{scored("a", Category::dining, 0.5), scored("b", Category::shopping, 0.5),
                                        scored("c", Category::employment, 0.5)};
        const auto out = integrate(items, 1.0, 0.3);
        CHECK(out.resolved);
        CHECK_FALSE(out.dropped.empty());
        const auto calm = integrate({scored("a", Category::dining, 0.5), scored("b", Category::dining, 0.1)}, 1.0, 0.3);
        CHECK_FALSE(calm.resolved);
        CHECK(calm.consistency == 1.0);
    }

    TEST_CASE("recording and pattern slices") {
        MemoryStore store;
        Event e;
        e.time_h = 8.5;
        e.location = kHome;
        e.activity = "coffee";
        e.category = Category::dining;
        store.record_event(e);
        CHECK(store.short_term().size() == 1);
        e.activity = "newspaper";
        e.category = Category::shopping;
        store.record_event(e);
        const auto slice = store.conditional(MemoryStore::bucket_key(e));
        REQUIRE(slice.size() == 2);
        CHECK(slice.at("coffee") == 0.5);
        CHECK(slice.at("newspaper") == 0.5);
        e.emotion = 2.0;
        try {
            store.record_event(e);
            FAIL("expected invalid_emotion");
        } catch (const Error& err) {
            CHECK(err.code() == Errc::invalid_emotion);
        }

        Rng rng(4);
        MemoryStore many;
        for (int i = 0; i < 300; ++i) {
            many.record_event(instance::event(rng, kHome));
            for (const auto& [bucket, _] : many.patterns()) {
                double s = 0.0;
                for (const auto& [a, p] : many.conditional(bucket)) s += p;
                CHECK(std::abs(s - 1.0) <= 1e-9);
            }
        }
    }

    TEST_CASE("importance") {
        RelevanceWeights w;
        w.decay_per_hour = 0.05;
        MemoryStore store(w);
        MemoryItem m;
        m.access_count = 1;
        m.last_access_h = 10;
        m.event.emotion = 0.0;
        CHECK(store.importance(m, 10) == doctest::Approx(0.4 * 0.5 + 0.4));
        m.event.emotion = 0.5;
        CHECK(store.importance(m, 10 + 1 / 0.05) == doctest::Approx(0.4472).epsilon(1e-4));
        MemoryItem pos = m, neg = m;
        pos.event.emotion = 1.0;
        neg.event.emotion = -1.0;
        CHECK(store.importance(pos, 12) == store.importance(neg, 12));
    }

    TEST_CASE("consolidation edge cases") {
        Rng rng(2);
        RelevanceWeights w;
        w.theta_transfer = 1e-12;
        MemoryStore all(w);
        for (int i = 0; i < 10; ++i) all.record_event(instance::event(rng, kHome));
        all.consolidate(80);
        CHECK(all.short_term().empty());

        RelevanceWeights frozen;
        frozen.theta_transfer = 1e-12;
        frozen.decay_per_hour = 0.0;
        MemoryStore keep(frozen);
        for (int i = 0; i < 10; ++i) keep.record_event(instance::event(rng, kHome));
        keep.consolidate(500);
        REQUIRE(keep.long_term().size() == 10);
        for (const auto& m : keep.long_term()) CHECK(m.strength == 1.0);
    }

    TEST_CASE("consolidation matches the three-rule script") {
        Rng rng(31);
        for (int round = 0; round < 50; ++round) {
            RelevanceWeights w;
            w.decay_per_hour = rng.uniform(0.0, 0.1);
            w.theta_transfer = rng.uniform(0.2, 0.8);
            w.theta_forget = rng.uniform(0.05, 0.5);
            MemoryStore store(w);
            std::vector<oracle::Item> script;
            for (int i = 0; i < 10; ++i) {
                MemoryItem m;
                m.id = "m" + std::to_string(i);
                m.event = instance::event(rng, kHome);
                m.features = build_features(m.event.time_h, m.event.location, m.event.category, m.event.emotion);
                m.store = rng.uniform() < 0.3 ? StoreKind::long_term : StoreKind::short_term;
                m.strength = rng.uniform(0.1, 1.0);
                m.access_count = static_cast<std::size_t>(rng.integer(1, 5));
                m.last_access_h = rng.uniform(0, 48);
                m.last_decay_h = rng.uniform(0, 48);
                store.insert(m);
            }
            const double now = 60.0;
            for (const auto& m : store.short_term()) {
                const double imp = w.w_frequency * (double(m.access_count) / (m.access_count + 1.0)) +
                                   w.w_recency * std::exp(-w.decay_per_hour * (now - m.last_access_h)) +
                                   w.w_salience * std::abs(m.event.emotion);
                script.push_back({m.id, false, m.strength, m.last_decay_h, imp});
            }
            for (const auto& m : store.long_term()) script.push_back({m.id, true, m.strength, m.last_decay_h, 0.0});
            const auto want = oracle::consolidate(script, now, w.theta_transfer, w.decay_per_hour, w.theta_forget);
            store.consolidate(now);

            std::map<std::string, oracle::Item> expect;
            for (const auto& it : want) expect[it.id] = it;
            CHECK(store.short_term().size() + store.long_term().size() == want.size());
            for (const auto& m : store.short_term()) {
                REQUIRE(expect.count(m.id));
                CHECK_FALSE(expect[m.id].long_term);
            }
            for (const auto& m : store.long_term()) {
                REQUIRE(expect.count(m.id));
                CHECK(expect[m.id].long_term);
                CHECK(m.strength == doctest::Approx(expect[m.id].strength).epsilon(1e-12));
                CHECK(m.strength >= w.theta_forget);
            }
        }
    }

    TEST_CASE("sleep consolidation") {
        MemoryStore empty;
        empty.sleep_consolidation();
        CHECK(empty.summaries().empty());

        MemoryStore twins;
        MemoryItem m;
        m.id = "a";
        m.store = StoreKind::long_term;
        m.event.time_h = 9;
        m.event.location = kHome;
        m.event.category = Category::dining;
        m.features = build_features(9, kHome, Category::dining, 0.0);
        m.strength = 0.7;
        twins.insert(m);
        m.id = "b";
        twins.insert(m);
        twins.sleep_consolidation();
        REQUIRE(twins.long_term().size() == 1);
        CHECK(twins.long_term()[0].strength == doctest::Approx(1.4));

        Rng rng(17);
        MemoryStore store;
        std::map<Category, std::vector<std::vector<double>>> by_cat;
        const Category cats[] = {Category::dining, Category::shopping, Category::employment};
        for (int i = 0; i < 50; ++i) {
            MemoryItem x;
            x.id = "x" + std::to_string(i);
            x.store = StoreKind::long_term;
            x.event = instance::event(rng, kHome);
            x.event.category = cats[i % 3];
            x.event.poi_id = x.id;  // keep every event distinct
            x.features = build_features(x.event.time_h, x.event.location, x.event.category, x.event.emotion);
            by_cat[x.event.category].push_back(x.features);
            store.insert(x);
        }
        store.sleep_consolidation();
        REQUIRE(store.summaries().size() == 3);
        for (const auto& s : store.summaries()) {
            const auto& rows = by_cat.at(s.event.category);
            CHECK(s.support == rows.size());
            for (std::size_t j = 0; j < kFeatureDim; ++j) {
                double mean = 0.0;
                for (const auto& r : rows) mean += r[j];
                mean /= static_cast<double>(rows.size());
                CHECK(s.features[j] == doctest::Approx(mean).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("cosine and semantic terms are symmetric") {
        Rng rng(5);
        for (int i = 0; i < 100; ++i) {
            const auto a = instance::event(rng, kHome), b = instance::event(rng, kHome);
            const auto fa = build_features(a.time_h, a.location, a.category, a.emotion);
            const auto fb = build_features(b.time_h, b.location, b.category, b.emotion);
            CHECK(weighted_cosine(fa, fb, {}) == doctest::Approx(weighted_cosine(fb, fa, {})));
            CHECK(text::similarity(a.activity, b.activity) == text::similarity(b.activity, a.activity));
        }
    }

    TEST_CASE("json persistence round trip") {
        Rng rng(8);
        MemoryStore store;
        for (int i = 0; i < 30; ++i) store.record_event(instance::event(rng, kHome));
        store.consolidate(40);
        store.sleep_consolidation();
        const auto back = MemoryStore::from_json(store.to_json());
        CHECK(back.to_json() == store.to_json());
        const Context c = context_near(rng);
        const auto a = store.retrieve(c, 10), b = back.retrieve(c, 10);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].item.id == b[i].item.id);
    }

    TEST_CASE("service ops") {
        auto store = std::make_shared<MemoryStore>();
        MemoryService svc(store);
        const json ev = {{"time_h", 9.0}, {"location", {{"lon", kHome.lon}, {"lat", kHome.lat}}}, {"activity", "coffee"},
                         {"category", "dining"}, {"emotion", 0.3}};
        const auto rec = svc.act({{"op", "record"}, {"event", ev}}, {});
        CHECK(rec.contains("id"));
        const auto got = svc.query(
            {{"op", "retrieve"}, {"k", 2}, {"context", {{"time_h", 33.0}, {"location", ev.at("location")}, {"activity", "coffee"}}}},
            {});
        CHECK(got.at("items").size() == 2);
        CHECK_NOTHROW(svc.act({{"op", "consolidate"}, {"now_h", 20.0}}, {}));
        CHECK_THROWS_AS(svc.query({{"op", "forget_everything"}}, {}), Error);
    }
}
