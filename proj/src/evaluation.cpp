#include "chaingen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "chaingen/error.hpp"
#include "chaingen/validation.hpp"

namespace chaingen::eval {

using nlohmann::json;

// --- discretization ---

Sequence discretize(const ActivityChain& chain) {
    const auto& recs = chain.records;
    if (recs.empty()) throw Error(Errc::empty_chain, "chain for '" + chain.persona_id + "' has no records");

    // Label of one planning-clock minute, or nothing when outside the chain.
    auto label_at = [&](int t) -> std::optional<Category> {
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (recs[i].start_min <= t && t < recs[i].end_min) return recs[i].category;
            if (i + 1 < recs.size() && recs[i].end_min <= t && t < recs[i + 1].start_min) return Category::travel;
        }
        return std::nullopt;
    };

    Sequence seq(kSlots, Category::residence);
    for (std::size_t s = 0; s < kSlots; ++s) {
        std::array<int, kCategoryCount> counts{};
        for (int m = 0; m < kSlotMinutes; ++m) {
            const int minute = static_cast<int>(s) * kSlotMinutes + m;
            auto label = label_at(minute);
            if (!label) label = label_at(minute + 1440);
            ++counts[static_cast<std::size_t>(label.value_or(Category::residence))];
        }
        std::size_t best = 0;
        for (std::size_t i = 0; i < kAllCategories.size(); ++i) {
            const auto c = static_cast<std::size_t>(kAllCategories[i]);
            if (counts[c] > counts[static_cast<std::size_t>(kAllCategories[best])]) best = i;
        }
        seq[s] = kAllCategories[best];
    }
    return seq;
}

// --- distribution metrics ---

double js_divergence(const std::vector<double>& p, const std::vector<double>& q, double tolerance) {
    if (p.size() != q.size() || p.empty()) {
        throw Error(Errc::support_mismatch,
                    "distributions have " + std::to_string(p.size()) + " and " + std::to_string(q.size()) + " cells");
    }
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) throw Error(Errc::non_normalized, "negative or NaN probability");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > tolerance || std::abs(sq - 1.0) > tolerance) {
        throw Error(Errc::non_normalized, "distributions must each sum to 1");
    }
    double js = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
    }
    return std::clamp(js, 0.0, std::numbers::ln2);
}

double ks_statistic(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.empty() || ys.empty()) throw Error(Errc::empty_sample, "KS needs two nonempty samples");
    std::vector<double> a = xs, b = ys;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() || j < b.size()) {
        // Next pooled point; advance both samples past it.
        double x;
        if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
            x = a[i];
        } else {
            x = b[j];
        }
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    return best;
}

double objective_quality_raw(double js, double ks) {
    if (!(js >= 0.0 && js <= std::numbers::ln2 + 1e-12)) {
        throw Error(Errc::out_of_range, "JS " + std::to_string(js) + " outside [0, ln 2]");
    }
    if (!(ks >= 0.0 && ks <= 1.0)) throw Error(Errc::out_of_range, "KS " + std::to_string(ks) + " outside [0, 1]");
    return 0.5 * (1.0 - js / std::numbers::ln2) + 0.5 * (1.0 - ks);
}

double objective_quality(double js, double ks) { return 10.0 * objective_quality_raw(js, ks); }

double total_quality(double q_subjective, double q_objective, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::out_of_range, "alpha outside [0, 1]");
    if (!(q_subjective >= 0.0 && q_subjective <= 10.0) || !(q_objective >= 0.0 && q_objective <= 10.0)) {
        throw Error(Errc::out_of_range, "quality scores must lie on the 0-10 scale");
    }
    return alpha * q_subjective + (1.0 - alpha) * q_objective;
}

// --- DTW ---

CostTable binary_costs() {
    CostTable t{};
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        for (std::size_t j = 0; j < kCategoryCount; ++j) t[i][j] = i == j ? 0.0 : 1.0;
    }
    return t;
}

double dtw_distance(const Sequence& a, const Sequence& b, const CostTable& costs) {
    if (a.empty() || b.empty()) throw Error(Errc::empty_sequence, "DTW needs nonempty sequences");
    const std::size_t n = a.size(), m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double d = costs[static_cast<std::size_t>(a[i - 1])][static_cast<std::size_t>(b[j - 1])];
            cur[j] = d + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

Matrix pairwise_dtw(const std::vector<Sequence>& seqs, std::size_t threads, const CostTable& costs) {
    const std::size_t n = seqs.size();
    if (n < 2) throw Error(Errc::too_few_sequences, "pairwise DTW needs at least two sequences");
    Matrix d(n, std::vector<double>(n, 0.0));
    auto work = [&](std::size_t t, std::size_t stride) {
        for (std::size_t i = t; i < n; i += stride) {
            for (std::size_t j = i + 1; j < n; ++j) d[i][j] = dtw_distance(seqs[i], seqs[j], costs);
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, n);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) d[j][i] = d[i][j];
    }
    return d;
}

// --- KDE ---

BoundingBox bounding_box(const std::vector<GeoPoint>& points, double pad_fraction) {
    if (points.empty()) throw Error(Errc::empty_sample, "no points for a bounding box");
    BoundingBox b{points[0].lon, points[0].lat, points[0].lon, points[0].lat};
    for (const auto& p : points) {
        b.min_lon = std::min(b.min_lon, p.lon);
        b.min_lat = std::min(b.min_lat, p.lat);
        b.max_lon = std::max(b.max_lon, p.lon);
        b.max_lat = std::max(b.max_lat, p.lat);
    }
    const double pad_lon = std::max(1e-4, (b.max_lon - b.min_lon) * pad_fraction);
    const double pad_lat = std::max(1e-4, (b.max_lat - b.min_lat) * pad_fraction);
    return {b.min_lon - pad_lon, b.min_lat - pad_lat, b.max_lon + pad_lon, b.max_lat + pad_lat};
}

std::pair<double, double> scott_bandwidth(const std::vector<GeoPoint>& points, const BoundingBox& box,
                                          std::size_t nx, std::size_t ny) {
    const double cell_lon = (box.max_lon - box.min_lon) / static_cast<double>(nx);
    const double cell_lat = (box.max_lat - box.min_lat) / static_cast<double>(ny);
    const std::size_t n = points.size();
    if (n < 2) return {cell_lon, cell_lat};
    double mlon = 0.0, mlat = 0.0;
    for (const auto& p : points) {
        mlon += p.lon;
        mlat += p.lat;
    }
    mlon /= static_cast<double>(n);
    mlat /= static_cast<double>(n);
    double vlon = 0.0, vlat = 0.0;
    for (const auto& p : points) {
        vlon += (p.lon - mlon) * (p.lon - mlon);
        vlat += (p.lat - mlat) * (p.lat - mlat);
    }
    const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
    const double slon = std::sqrt(vlon / static_cast<double>(n - 1));
    const double slat = std::sqrt(vlat / static_cast<double>(n - 1));
    return {slon > 0.0 ? factor * slon : cell_lon, slat > 0.0 ? factor * slat : cell_lat};
}

SpatialDensity kde(const std::vector<GeoPoint>& points, const BoundingBox& box, std::size_t nx, std::size_t ny,
                   std::optional<std::pair<double, double>> bandwidth) {
    if (points.empty()) throw Error(Errc::empty_sample, "KDE needs at least one point");
    if (nx == 0 || ny == 0) throw Error(Errc::invalid_config, "KDE grid must be nonempty");
    SpatialDensity out;
    out.box = box;
    out.nx = nx;
    out.ny = ny;
    out.points = points.size();
    const auto [hx, hy] = bandwidth.value_or(scott_bandwidth(points, box, nx, ny));
    out.bandwidth_lon = hx;
    out.bandwidth_lat = hy;
    const double cw = (box.max_lon - box.min_lon) / static_cast<double>(nx);
    const double ch = (box.max_lat - box.min_lat) / static_cast<double>(ny);

    // Separable kernel: per-point weights along each axis, then outer products.
    out.mass.assign(nx * ny, 0.0);
    std::vector<double> wx(nx), wy(ny);
    for (const auto& p : points) {
        for (std::size_t x = 0; x < nx; ++x) {
            const double u = (box.min_lon + (static_cast<double>(x) + 0.5) * cw - p.lon) / hx;
            wx[x] = std::exp(-0.5 * u * u);
        }
        for (std::size_t y = 0; y < ny; ++y) {
            const double v = (box.min_lat + (static_cast<double>(y) + 0.5) * ch - p.lat) / hy;
            wy[y] = std::exp(-0.5 * v * v);
        }
        for (std::size_t y = 0; y < ny; ++y) {
            if (wy[y] == 0.0) continue;
            double* row = &out.mass[y * nx];
            for (std::size_t x = 0; x < nx; ++x) row[x] += wy[y] * wx[x];
        }
    }
    const double norm = 1.0 / (2.0 * std::numbers::pi * hx * hy);
    double total = 0.0;
    for (double& m : out.mass) {
        m *= norm;
        total += m;
    }
    out.raw_total = total;
    if (total > 0.0) {
        for (double& m : out.mass) m /= total;
    } else {
        // Every point far outside the box: fall back to a uniform grid.
        std::fill(out.mass.begin(), out.mass.end(), 1.0 / static_cast<double>(out.mass.size()));
    }
    return out;
}

std::vector<StampedPoint> activity_points(const std::vector<ActivityChain>& chains) {
    std::vector<StampedPoint> out;
    for (const auto& c : chains) {
        for (const auto& r : c.records) {
            if (r.category == Category::travel) continue;
            out.push_back({r.location, ((r.start_min % 1440) + 1440) % 1440});
        }
    }
    return out;
}

// --- corpus evaluation ---

json to_json(const EvaluationOptions& o) {
    json segs = json::array();
    for (const auto& [a, b] : o.segments) segs.push_back({a, b});
    return {{"grid", o.grid},       {"segments", segs},         {"alpha", o.alpha},
            {"k_min", o.k_min},     {"k_max", o.k_max},         {"diversity_limit", o.diversity_limit},
            {"threads", o.threads}};
}

EvaluationOptions evaluation_options_from_json(const json& j) {
    EvaluationOptions o;
    if (!j.is_object()) return o;
    o.grid = j.value("grid", o.grid);
    if (j.contains("segments")) {
        o.segments.clear();
        for (const auto& s : j.at("segments")) o.segments.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
    }
    o.alpha = j.value("alpha", o.alpha);
    o.k_min = j.value("k_min", o.k_min);
    o.k_max = j.value("k_max", o.k_max);
    o.diversity_limit = j.value("diversity_limit", o.diversity_limit);
    o.threads = j.value("threads", o.threads);
    if (o.grid == 0 || o.alpha < 0.0 || o.alpha > 1.0 || o.k_min < 2 || o.k_max < o.k_min) {
        throw Error(Errc::invalid_config, "evaluation: grid >= 1, alpha in [0,1], 2 <= k_min <= k_max");
    }
    return o;
}

namespace {

std::vector<GeoPoint> locations(const std::vector<StampedPoint>& pts) {
    std::vector<GeoPoint> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(p.location);
    return out;
}

std::vector<GeoPoint> in_segment(const std::vector<StampedPoint>& pts, std::pair<int, int> seg) {
    std::vector<GeoPoint> out;
    for (const auto& p : pts) {
        if (seg.first <= p.minute && p.minute < seg.second) out.push_back(p.location);
    }
    return out;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

SpatialFidelity spatial_fidelity(const std::vector<ActivityChain>& generated,
                                 const std::vector<ActivityChain>& reference, const EvaluationOptions& options) {
    const auto gp = activity_points(generated);
    const auto rp = activity_points(reference);
    const auto gl = locations(gp);
    const auto rl = locations(rp);
    if (gl.empty() || rl.empty()) throw Error(Errc::empty_sample, "a corpus has no activity locations");
    std::vector<GeoPoint> all = gl;
    all.insert(all.end(), rl.begin(), rl.end());
    const BoundingBox box = bounding_box(all);

    SpatialFidelity out;
    out.generated = kde(gl, box, options.grid, options.grid);
    out.reference = kde(rl, box, options.grid, options.grid);
    out.js = js_divergence(out.generated.mass, out.reference.mass);
    const std::pair gbw{out.generated.bandwidth_lon, out.generated.bandwidth_lat};
    const std::pair rbw{out.reference.bandwidth_lon, out.reference.bandwidth_lat};
    for (const auto& seg : options.segments) {
        const auto gs = in_segment(gp, seg);
        const auto rs = in_segment(rp, seg);
        if (gs.empty() || rs.empty()) {
            out.segments.push_back(std::nullopt);
            continue;
        }
        const auto g = kde(gs, box, options.grid, options.grid, gbw);
        const auto r = kde(rs, box, options.grid, options.grid, rbw);
        out.segments.push_back(js_divergence(g.mass, r.mass));
    }
    return out;
}

std::map<std::string, KsTriple> temporal_fidelity(const std::vector<ActivityChain>& generated,
                                                  const std::vector<ActivityChain>& reference) {
    struct Samples {
        std::vector<double> start, end, duration;
    };
    auto collect = [](const std::vector<ActivityChain>& chains) {
        std::map<std::string, Samples> out;
        for (const auto& c : chains) {
            for (const auto& r : c.records) {
                auto& s = out[std::string(to_string(r.category))];
                s.start.push_back(r.start_min);
                s.end.push_back(r.end_min);
                s.duration.push_back(r.end_min - r.start_min);
            }
        }
        return out;
    };
    const auto g = collect(generated);
    const auto r = collect(reference);
    std::map<std::string, KsTriple> out;
    for (Category c : kAllCategories) {
        const std::string key(to_string(c));
        const auto gi = g.find(key);
        const auto ri = r.find(key);
        if (gi == g.end() && ri == r.end()) continue;
        if (gi == g.end() || ri == r.end()) {
            out[key] = {1.0, 1.0, 1.0};
            continue;
        }
        out[key] = {ks_statistic(gi->second.start, ri->second.start), ks_statistic(gi->second.end, ri->second.end),
                    ks_statistic(gi->second.duration, ri->second.duration)};
    }
    return out;
}

EvaluationReport evaluate_corpus(const std::vector<ActivityChain>& generated,
                                 const std::vector<ActivityChain>* reference, const EvaluationOptions& options,
                                 const spatial::SpatialWorld* world, std::optional<double> q_subjective) {
    if (generated.empty()) throw Error(Errc::empty_chain, "generated corpus is empty");
    EvaluationReport rep;
    rep.generated = generated.size();
    rep.segments = options.segments;
    rep.q_subjective = q_subjective;

    if (reference && !reference->empty()) {
        rep.reference = reference->size();
        const auto sf = spatial_fidelity(generated, *reference, options);
        rep.js_spatial = sf.js;
        rep.js_segments = sf.segments;
        rep.ks = temporal_fidelity(generated, *reference);
        if (!rep.ks.empty()) {
            double sum = 0.0;
            for (const auto& [_, t] : rep.ks) sum += t.start + t.end + t.duration;
            rep.ks_temporal = sum / (3.0 * static_cast<double>(rep.ks.size()));
            rep.q_obj = objective_quality(*rep.js_spatial, *rep.ks_temporal);
            if (q_subjective) rep.q_total = total_quality(*q_subjective, *rep.q_obj, options.alpha);
        }
    }

    const std::size_t n = std::min(generated.size(), options.diversity_limit);
    if (n >= 3) {
        std::vector<Sequence> seqs;
        seqs.reserve(n);
        for (std::size_t i = 0; i < n; ++i) seqs.push_back(discretize(generated[i]));
        const Matrix d = pairwise_dtw(seqs, options.threads);
        std::vector<std::size_t> ks;
        for (std::size_t k = options.k_min; k <= std::min(options.k_max, n - 1); ++k) ks.push_back(k);
        const KSelection sel = select_k(d, ks);
        rep.k_star = sel.k;
        rep.silhouettes = sel.scores;
        rep.diversity = diversity_score(d, sel.labels);
    }

    if (world) {
        for (const auto& c : generated) {
            const auto v = validate_chain(c, *world);
            if (!v.ok()) ++rep.chains_with_violations;
            for (const auto& [type, count] : v.counts()) rep.violations[type] += count;
        }
    }
    return rep;
}

json to_json(const EvaluationReport& r) {
    json segs = json::array();
    for (std::size_t i = 0; i < r.segments.size(); ++i) {
        segs.push_back({{"from", r.segments[i].first},
                        {"to", r.segments[i].second},
                        {"js", i < r.js_segments.size() ? optional_json(r.js_segments[i]) : json(nullptr)}});
    }
    json ks = json::object();
    for (const auto& [cat, t] : r.ks) ks[cat] = {{"start", t.start}, {"end", t.end}, {"duration", t.duration}};
    json sil = json::object();
    for (const auto& [k, s] : r.silhouettes) sil[std::to_string(k)] = s;
    json div = nullptr;
    if (r.diversity) {
        div = {{"B", r.diversity->between},
               {"W", r.diversity->within},
               {"DIV", r.diversity->div},
               {"score_gd", r.diversity->score_gd}};
    }
    return {{"generated", r.generated},
            {"reference", r.reference},
            {"js_spatial", optional_json(r.js_spatial)},
            {"js_segments", segs},
            {"ks", ks},
            {"ks_temporal", optional_json(r.ks_temporal)},
            {"q_obj", optional_json(r.q_obj)},
            {"q_subjective", optional_json(r.q_subjective)},
            {"q_total", optional_json(r.q_total)},
            {"k_star", optional_json(r.k_star)},
            {"silhouettes", sil},
            {"diversity", div},
            {"violations", r.violations},
            {"chains_with_violations", r.chains_with_violations}};
}

}  // namespace chaingen::eval
