#include <doctest.h>

#include <cmath>
#include <numbers>

#include "chaingen/error.hpp"
#include "chaingen/evaluation.hpp"
#include "chaingen/validation.hpp"
#include "fixtures.hpp"
#include "instances.hpp"
#include "oracles.hpp"

using namespace chaingen;
using namespace chaingen::eval;
using fixture::record;

namespace {

const double kLn2 = std::numbers::ln2;
const GeoPoint kOrigin{8.50, 47.35};

ActivityChain chain_of(std::vector<ActivityRecord> recs) {
    ActivityChain c;
    c.persona_id = "p";
    c.records = std::move(recs);
    return c;
}

Sequence parse_seq(const std::string& s) {
    Sequence out;
    for (char ch : s) out.push_back(static_cast<Category>(ch - 'A'));
    return out;
}

// A random valid-looking day: home, up to three activities, home.
ActivityChain random_day(Rng& rng, GeoPoint origin = kOrigin) {
    std::vector<ActivityRecord> recs;
    int t = 300 + static_cast<int>(rng.integer(60, 300));
    recs.push_back(record(Category::residence, "home", origin, 300, t));
    const long n = rng.integer(1, 3);
    for (long i = 0; i < n; ++i) {
        t += static_cast<int>(rng.integer(5, 40));
        const int dur = static_cast<int>(rng.integer(30, 240));
        const auto c = static_cast<Category>(rng.integer(0, 7));
        const GeoPoint at{origin.lon + rng.uniform(-0.02, 0.02), origin.lat + rng.uniform(-0.02, 0.02)};
        recs.push_back(record(c == Category::travel ? Category::dining : c, "x", at, t, t + dur));
        t += dur;
    }
    t += 20;
    recs.push_back(record(Category::residence, "home", origin, t, 1740));
    return chain_of(recs);
}

}  // namespace

TEST_SUITE("evaluation") {
    TEST_CASE("discretize an all-day home chain") {
        const auto s = discretize(chain_of({record(Category::residence, "h", kOrigin, 300, 1740)}));
        REQUIRE(s.size() == kSlots);
        for (auto c : s) CHECK(c == Category::residence);
        CHECK_THROWS_AS(discretize(chain_of({})), Error);
    }

    TEST_CASE("discretize a three-activity chain slot by slot") {
        const auto c = chain_of({record(Category::residence, "h", kOrigin, 300, 480),
                                 record(Category::employment, "w", kOrigin, 495, 1020),
                                 record(Category::dining, "d", kOrigin, 1020, 1032),
                                 record(Category::residence, "h", kOrigin, 1040, 1740)});
        Sequence want(kSlots, Category::residence);
        want[32] = Category::travel;  // 480-495
        for (int s = 33; s < 68; ++s) want[s] = Category::employment;
        want[68] = Category::dining;     // 12 dining minutes, 3 travel
        want[69] = Category::residence;  // 5 travel, 10 home
        CHECK(discretize(c) == want);

        // a short visit wins its slot only with the majority of minutes
        const auto brief = chain_of({record(Category::residence, "h", kOrigin, 300, 600),
                                     record(Category::shopping, "s", kOrigin, 600, 607),
                                     record(Category::residence, "h", kOrigin, 607, 1740)});
        CHECK(discretize(brief)[40] == Category::residence);
        const auto longer = chain_of({record(Category::residence, "h", kOrigin, 300, 600),
                                      record(Category::shopping, "s", kOrigin, 600, 608),
                                      record(Category::residence, "h", kOrigin, 608, 1740)});
        CHECK(discretize(longer)[40] == Category::shopping);
        // after midnight the overnight record is folded back to the early slots
        const auto late = chain_of({record(Category::residence, "h", kOrigin, 300, 1400),
                                    record(Category::sports_leisure, "b", kOrigin, 1400, 1530),
                                    record(Category::residence, "h", kOrigin, 1530, 1740)});
        const auto seq = discretize(late);
        CHECK(seq[0] == Category::sports_leisure);
        CHECK(seq[5] == Category::sports_leisure);
        CHECK(seq[6] == Category::residence);
        CHECK(seq[95] == Category::sports_leisure);
    }

    TEST_CASE("js divergence") {
        CHECK(js_divergence({0.3, 0.7}, {0.3, 0.7}) == 0.0);
        CHECK(js_divergence({1, 0}, {0, 1}) == doctest::Approx(kLn2));
        CHECK(js_divergence({1, 0}, {0.5, 0.5}) == doctest::Approx(0.2158).epsilon(1e-3));
        CHECK_THROWS_AS(js_divergence({1}, {0.5, 0.5}), Error);
        CHECK_THROWS_AS(js_divergence({0.5, 0.6}, {0.5, 0.5}), Error);
        Rng rng(31);
        for (int i = 0; i < 300; ++i) {
            const std::size_t n = static_cast<std::size_t>(rng.integer(1, 12));
            const auto p = instance::distribution(rng, n);
            const auto q = instance::distribution(rng, n);
            const double v = js_divergence(p, q);
            CHECK(v == doctest::Approx(oracle::js(p, q)).epsilon(1e-9));
            CHECK(v == doctest::Approx(js_divergence(q, p)).epsilon(1e-12));
            CHECK(v >= 0.0);
            CHECK(v <= kLn2 + 1e-12);
            CHECK(js_divergence(p, p) == doctest::Approx(0.0));
        }
    }

    TEST_CASE("ks statistic") {
        CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
        CHECK(ks_statistic({1, 2}, {5, 6, 7}) == 1.0);
        CHECK(ks_statistic({1, 2, 3}, {2, 3, 4}) == doctest::Approx(1.0 / 3.0));
        CHECK_THROWS_AS(ks_statistic({}, {1}), Error);
        Rng rng(32);
        for (int i = 0; i < 300; ++i) {
            std::vector<double> xs(static_cast<std::size_t>(rng.integer(1, 20)));
            std::vector<double> ys(static_cast<std::size_t>(rng.integer(1, 20)));
            for (auto& x : xs) x = static_cast<double>(rng.integer(0, 15));
            for (auto& y : ys) y = static_cast<double>(rng.integer(0, 15));
            const double v = ks_statistic(xs, ys);
            CHECK(v == doctest::Approx(oracle::ks(xs, ys)));
            // invariant under a common strictly increasing transform
            auto tx = xs, ty = ys;
            for (auto& x : tx) x = std::exp(x / 4.0) + 3.0;
            for (auto& y : ty) y = std::exp(y / 4.0) + 3.0;
            CHECK(ks_statistic(tx, ty) == doctest::Approx(v));
        }
    }

    TEST_CASE("quality aggregation") {
        CHECK(objective_quality_raw(0.0, 0.0) == 1.0);
        CHECK(objective_quality(0.0, 0.0) == 10.0);
        CHECK(objective_quality_raw(kLn2, 1.0) == doctest::Approx(0.0));
        CHECK(objective_quality_raw(0.2158, 1.0 / 3.0) == doctest::Approx(0.6776).epsilon(1e-3));
        CHECK_THROWS_AS(objective_quality_raw(-0.1, 0.0), Error);
        CHECK_THROWS_AS(objective_quality_raw(0.0, 1.1), Error);
        CHECK(std::abs(total_quality(7.45, 8.70, 0.5) - 8.07) <= 0.01);
        CHECK(std::abs(total_quality(7.61, 9.10, 0.5) - 8.36) <= 0.01);
        CHECK(total_quality(6.3, 9.0, 1.0) == 6.3);
        CHECK(total_quality(6.3, 9.0, 0.0) == 9.0);
        CHECK_THROWS_AS(total_quality(11.0, 5.0), Error);
        CHECK_THROWS_AS(total_quality(5.0, 5.0, 1.5), Error);
    }

    TEST_CASE("dtw") {
        CHECK(dtw_distance(parse_seq("AAB"), parse_seq("ABB")) == 0.0);
        CHECK(dtw_distance(parse_seq("ABC"), parse_seq("ABC")) == 0.0);
        CHECK(dtw_distance(parse_seq("AB"), parse_seq("CD")) == 2.0);
        CHECK_THROWS_AS(dtw_distance({}, parse_seq("A")), Error);
        // no warping helps when neighbours always differ: Hamming distance
        CHECK(dtw_distance(parse_seq("ABABAB"), parse_seq("CDCDCD")) == 6.0);
        Rng rng(33);
        for (int i = 0; i < 200; ++i) {
            const auto a = instance::category_sequence(rng, 14, 4);
            const auto b = instance::category_sequence(rng, 14, 4);
            const double v = dtw_distance(a, b);
            CHECK(v == oracle::dtw(a, b));
            CHECK(v == dtw_distance(b, a));
            CHECK(v <= static_cast<double>(std::max(a.size(), b.size())));
        }
    }

    TEST_CASE("pairwise dtw matrix") {
        Rng rng(34);
        std::vector<Sequence> seqs;
        for (int i = 0; i < 7; ++i) seqs.push_back(instance::category_sequence(rng, 20, 3));
        const auto d = pairwise_dtw(seqs);
        const auto d4 = pairwise_dtw(seqs, 4);
        CHECK(d == d4);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            CHECK(d[i][i] == 0.0);
            for (std::size_t j = 0; j < seqs.size(); ++j) {
                CHECK(d[i][j] == d[j][i]);
                CHECK(d[i][j] == oracle::dtw(seqs[i], seqs[j]));
            }
        }
        const auto zero = pairwise_dtw({seqs[0], seqs[0], seqs[0]});
        for (const auto& row : zero) {
            for (double v : row) CHECK(v == 0.0);
        }
        CHECK_THROWS_AS(pairwise_dtw({seqs[0]}), Error);
    }

    TEST_CASE("kde mass and bandwidth") {
        Rng rng(35);
        std::vector<GeoPoint> pts;
        for (int i = 0; i < 40; ++i) pts.push_back({8.5 + rng.uniform(0, 0.1), 47.3 + rng.uniform(0, 0.05)});
        const auto box = bounding_box(pts);
        CHECK(box.min_lon < 8.5 + 1e-9);
        const auto d = kde(pts, box, 50, 40);
        REQUIRE(d.mass.size() == 2000);
        double sum = 0.0;
        for (double m : d.mass) {
            CHECK(m >= 0.0);
            sum += m;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        CHECK(d.bandwidth_lon > 0.0);
        CHECK(d.bandwidth_lat > 0.0);
        // Scott's rule: n^(-1/6) times the sample standard deviation
        double mean = 0.0;
        for (const auto& p : pts) mean += p.lon;
        mean /= 40.0;
        double var = 0.0;
        for (const auto& p : pts) var += (p.lon - mean) * (p.lon - mean);
        const double sd = std::sqrt(var / 39.0);
        CHECK(d.bandwidth_lon == doctest::Approx(std::pow(40.0, -1.0 / 6.0) * sd));
        // a single point: degenerate spread falls back to a grid-cell bandwidth
        const auto one = kde({{8.55, 47.32}}, box, 50, 40);
        CHECK(one.bandwidth_lon > 0.0);
        CHECK_THROWS_AS(kde({}, box, 10, 10), Error);
        CHECK(js_divergence(d.mass, kde(pts, box, 50, 40).mass) == 0.0);
    }

    TEST_CASE("corpus evaluation against itself and a shifted corpus") {
        Rng rng(36);
        std::vector<ActivityChain> gen;
        for (int i = 0; i < 12; ++i) gen.push_back(random_day(rng));
        EvaluationOptions opts;
        opts.grid = 40;
        opts.k_max = 5;
        const auto self = evaluate_corpus(gen, &gen, opts, nullptr, 8.0);
        REQUIRE(self.js_spatial.has_value());
        CHECK(*self.js_spatial == doctest::Approx(0.0));
        CHECK(*self.ks_temporal == 0.0);
        CHECK(*self.q_obj == doctest::Approx(10.0));
        CHECK(*self.q_total == doctest::Approx(9.0));
        REQUIRE(self.k_star.has_value());
        CHECK(*self.k_star >= 2);
        CHECK(*self.k_star <= 5);
        REQUIRE(self.diversity.has_value());
        CHECK(self.diversity->div >= -1.0);
        CHECK(self.diversity->div <= 1.0);
        CHECK(self.diversity->score_gd == doctest::Approx(5.5 + 4.5 * self.diversity->div));

        std::vector<ActivityChain> far;
        Rng rng2(37);
        for (int i = 0; i < 12; ++i) far.push_back(random_day(rng2, {8.9, 47.6}));
        const auto shifted = evaluate_corpus(gen, &far, opts);
        CHECK(*shifted.js_spatial > 0.5);
        CHECK(*shifted.js_spatial <= kLn2 + 1e-12);
        CHECK(*shifted.q_obj < *self.q_obj);
        CHECK_FALSE(shifted.q_total.has_value());
        REQUIRE(shifted.js_segments.size() == opts.segments.size());

        // without a reference only the diversity analysis runs
        const auto alone = evaluate_corpus(gen, nullptr, opts);
        CHECK_FALSE(alone.js_spatial.has_value());
        CHECK(alone.k_star == self.k_star);
        CHECK_THROWS_AS(evaluate_corpus({}, &gen, opts), Error);
        const auto j = to_json(self);
        CHECK(j.contains("q_obj"));
    }

    TEST_CASE("segment densities conserve their points") {
        Rng rng(38);
        std::vector<ActivityChain> gen;
        for (int i = 0; i < 10; ++i) gen.push_back(random_day(rng));
        const auto pts = activity_points(gen);
        EvaluationOptions opts;
        std::size_t total = 0;
        for (const auto& [a, b] : opts.segments) {
            for (const auto& p : pts) total += p.minute >= a && p.minute < b;
        }
        CHECK(total == pts.size());
        opts.grid = 30;
        const auto sf = spatial_fidelity(gen, gen, opts);
        for (const auto& s : sf.segments) {
            if (s) CHECK(*s == doctest::Approx(0.0));
        }
    }

    TEST_CASE("temporal fidelity per category") {
        const auto a = chain_of({record(Category::residence, "h", kOrigin, 300, 480),
                                 record(Category::dining, "d", kOrigin, 500, 560),
                                 record(Category::residence, "h", kOrigin, 580, 1740)});
        const auto b = chain_of({record(Category::residence, "h", kOrigin, 300, 480),
                                 record(Category::shopping, "s", kOrigin, 500, 560),
                                 record(Category::residence, "h", kOrigin, 580, 1740)});
        const auto ks = temporal_fidelity({a}, {b});
        CHECK(ks.at("dining").start == 1.0);
        CHECK(ks.at("shopping").duration == 1.0);
        CHECK(ks.at("residence").start == 0.0);
        CHECK(ks.count("tourism") == 0);
    }

    TEST_CASE("validation catches each violation type") {
        auto w = std::make_shared<spatial::SpatialWorld>();
        w->network = fixture::grid(5, 600.0, kOrigin);
        const GeoPoint east = world::offset(kOrigin, 2400.0, 0.0);
        w->pois = spatial::PoiDataset({fixture::poi("home", Category::residence, "residence", kOrigin),
                                       fixture::poi("shop", Category::shopping, "mall", east, 600, 1200)});
        ValidationOptions opts;
        opts.modes = {TravelMode::walk};
        opts.home = kOrigin;

        // 2.4 km at walking pace is a 30-minute leg
        const auto ok = chain_of({record(Category::residence, "home", kOrigin, 300, 600),
                                  record(Category::shopping, "shop", east, 630, 700, TravelMode::walk, 30),
                                  record(Category::residence, "home", kOrigin, 730, 1740, TravelMode::walk, 30)});
        CHECK(validate_chain(ok, *w, opts).ok());

        auto tight = ok;
        tight.records[1].start_min = 601;
        const auto rt = validate_chain(tight, *w, opts);
        REQUIRE(rt.violations.size() == 1);
        CHECK(rt.violations[0].type == ViolationType::travel_infeasible);
        CHECK(rt.violations[0].records == std::vector<std::size_t>{0, 1});

        auto overlap = ok;
        overlap.records[1].start_min = 590;
        const auto ro = validate_chain(overlap, *w, opts);
        REQUIRE_FALSE(ro.ok());
        CHECK(ro.violations[0].type == ViolationType::overlap);
        CHECK(ro.violations[0].records == std::vector<std::size_t>{0, 1});

        auto closed = ok;
        closed.records[1].end_min = 1250;
        closed.records[2].start_min = 1280;
        CHECK(validate_chain(closed, *w, opts).counts().at("opening_hours") == 1);

        auto wrong = ok;
        wrong.records[1].category = Category::dining;
        CHECK(validate_chain(wrong, *w, opts).counts().at("category") == 1);

        auto away = ok;
        away.records.pop_back();
        CHECK(validate_chain(away, *w, opts).counts().at("home_anchor") == 1);
        opts.require_home_anchor = false;
        CHECK(validate_chain(away, *w, opts).ok());

        auto reversed = ok;
        reversed.records[1].end_min = 620;
        CHECK(validate_chain(reversed, *w, opts).counts().at("ordering") == 1);
    }
}
