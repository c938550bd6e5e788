#include <doctest.h>

#include <cmath>

#include "chaingen/clustering.hpp"
#include "chaingen/error.hpp"
#include "chaingen/random.hpp"
#include "oracles.hpp"

using namespace chaingen;
using namespace chaingen::eval;

namespace {

Matrix euclidean(const Points& pts) {
    Matrix d(pts.size(), std::vector<double>(pts.size(), 0.0));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < pts[i].size(); ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
            d[i][j] = std::sqrt(s);
        }
    }
    return d;
}

Points random_points(Rng& rng, std::size_t n, std::size_t dims) {
    Points pts(n, std::vector<double>(dims));
    for (auto& p : pts) {
        for (auto& x : p) x = rng.uniform(-10, 10);
    }
    return pts;
}

// `blobs` tight groups of `per` points, far apart on a line.
Points blobs(Rng& rng, std::size_t blobs, std::size_t per) {
    Points pts;
    for (std::size_t b = 0; b < blobs; ++b) {
        for (std::size_t i = 0; i < per; ++i) {
            pts.push_back({100.0 * static_cast<double>(b) + rng.uniform(-1, 1), rng.uniform(-1, 1)});
        }
    }
    return pts;
}

}  // namespace

TEST_SUITE("clustering") {
    TEST_CASE("mds reproduces euclidean distances") {
        Rng rng(41);
        for (int t = 0; t < 20; ++t) {
            const auto pts = random_points(rng, 8, 3);
            const auto d = euclidean(pts);
            const auto emb = classical_mds(d, 7);
            const auto back = euclidean(emb);
            for (std::size_t i = 0; i < d.size(); ++i) {
                for (std::size_t j = 0; j < d.size(); ++j) CHECK(back[i][j] == doctest::Approx(d[i][j]).epsilon(1e-6));
            }
        }
    }

    TEST_CASE("two separated blobs split along the truth") {
        Rng rng(42);
        const auto d = euclidean(blobs(rng, 2, 5));
        const auto a = ward_cluster(d, 2);
        CHECK(a == Assignment{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
        CHECK(silhouette(d, a) > 0.95);
    }

    TEST_CASE("k = n - 1 merges the closest pair only") {
        Rng rng(43);
        for (int t = 0; t < 50; ++t) {
            const auto pts = random_points(rng, 7, 2);
            const auto d = euclidean(pts);
            std::size_t bi = 0, bj = 1;
            for (std::size_t i = 0; i < 7; ++i) {
                for (std::size_t j = i + 1; j < 7; ++j) {
                    if (d[i][j] < d[bi][bj]) {
                        bi = i;
                        bj = j;
                    }
                }
            }
            const auto a = ward_points(pts, 6);
            for (std::size_t i = 0; i < 7; ++i) {
                for (std::size_t j = i + 1; j < 7; ++j) {
                    const bool together = a[i] == a[j];
                    CHECK(together == (i == bi && j == bj));
                }
            }
        }
    }

    TEST_CASE("ward agrees with a lance-williams oracle") {
        Rng rng(44);
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = static_cast<std::size_t>(rng.integer(4, 12));
            const auto pts = random_points(rng, n, static_cast<std::size_t>(rng.integer(1, 4)));
            const auto d = euclidean(pts);
            const std::size_t k = static_cast<std::size_t>(rng.integer(2, static_cast<long>(n) - 1));
            CHECK(oracle::partition_of(ward_cluster(d, k)) == oracle::ward(d, k));
            CHECK(oracle::partition_of(ward_points(pts, k)) == oracle::ward(d, k));
        }
    }

    TEST_CASE("singletons and labels") {
        Rng rng(45);
        const auto pts = random_points(rng, 5, 2);
        const auto d = euclidean(pts);
        const auto a = ward_points(pts, 5);
        CHECK(a == Assignment{0, 1, 2, 3, 4});
        CHECK(silhouette(d, a) == 0.0);
        CHECK(ward_points(pts, 1) == Assignment(5, 0));
        CHECK_THROWS_AS(ward_points(pts, 0), Error);
        CHECK_THROWS_AS(ward_points(pts, 6), Error);
        // labels number clusters by their lowest member
        const auto parts = ward_partitions(pts, {2, 3});
        for (const auto& [k, lab] : parts) {
            CHECK(lab[0] == 0);
            int seen = 0;
            for (int l : lab) {
                CHECK(l <= seen);
                seen = std::max(seen, l + 1);
            }
            CHECK(static_cast<std::size_t>(seen) == k);
        }
    }

    TEST_CASE("silhouette on a hand-built matrix") {
        const Points line{{0}, {1}, {2}, {10}, {11}, {12}};
        const auto d = euclidean(line);
        const Assignment a{0, 0, 0, 1, 1, 1};
        const double p0 = (11.0 - 1.5) / 11.0, p1 = (10.0 - 1.0) / 10.0, p2 = (9.0 - 1.5) / 9.0;
        CHECK(silhouette(d, a) == doctest::Approx((p0 + p1 + p2) / 3.0));
        CHECK(silhouette(d, a) == doctest::Approx(oracle::silhouette(d, a)));
        // identical points forced into two clusters
        const Matrix zero(4, std::vector<double>(4, 0.0));
        CHECK(silhouette(zero, {0, 0, 1, 1}) == 0.0);
        CHECK_THROWS_AS(silhouette(d, {0, 0, 0, 0, 0, 0}), Error);
        Rng rng(46);
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = static_cast<std::size_t>(rng.integer(3, 10));
            const auto dd = euclidean(random_points(rng, n, 2));
            Assignment lab(n);
            for (auto& l : lab) l = static_cast<int>(rng.integer(0, 2));
            lab[0] = 0;
            lab[1] = 1;
            const double s = silhouette(dd, lab);
            CHECK(s == doctest::Approx(oracle::silhouette(dd, lab)));
            CHECK(s >= -1.0);
            CHECK(s <= 1.0);
        }
    }

    TEST_CASE("select k") {
        Rng rng(47);
        const auto d = euclidean(blobs(rng, 3, 4));
        const auto sel = select_k(d, {2, 3, 4, 5, 6});
        CHECK(sel.k == 3);
        for (const auto& [k, s] : sel.scores) CHECK(sel.scores.at(sel.k) >= s);
        CHECK(select_k(d, {2}).k == 2);
        CHECK_THROWS_AS(select_k(d, {}), Error);
        CHECK_THROWS_AS(select_k(d, {12}), Error);
        // ties go to the smaller k
        const Matrix flat(5, std::vector<double>(5, 0.0));
        CHECK(select_k(flat, {2, 3}).k == 2);
    }

    TEST_CASE("diversity score") {
        const Matrix d{{0, 1, 3, 3}, {1, 0, 3, 3}, {3, 3, 0, 1}, {3, 3, 1, 0}};
        const auto v = diversity_score(d, {0, 0, 1, 1});
        CHECK(v.within == 1.0);
        CHECK(v.between == 3.0);
        CHECK(v.div == 0.5);
        CHECK(v.score_gd == 7.75);
        const Matrix zero(4, std::vector<double>(4, 0.0));
        const auto z = diversity_score(zero, {0, 0, 1, 1});
        CHECK(z.div == 0.0);
        CHECK(z.score_gd == 5.5);
        CHECK(diversity_score_gd(1.0) == 10.0);
        CHECK(diversity_score_gd(-1.0) == 1.0);
        // affine in DIV with slope 4.5
        const double x0 = 0.13, x1 = 0.71;
        CHECK((diversity_score_gd(x1) - diversity_score_gd(x0)) / (x1 - x0) == doctest::Approx(4.5));
    }

    TEST_CASE("dissimilarity checks") {
        CHECK_THROWS_AS(check_dissimilarity({{0, 1}, {2, 0}}), Error);
        CHECK_THROWS_AS(check_dissimilarity({{1, 1}, {1, 1}}), Error);
        CHECK_THROWS_AS(check_dissimilarity({{0, 1}}), Error);
        CHECK_NOTHROW(check_dissimilarity({{0, 1}, {1, 0}}));
        CHECK_THROWS_AS(ward_cluster({{0, 1}, {1, 0}}, 3), Error);
    }
}
