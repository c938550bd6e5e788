#include "chaingen/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "chaingen/embedding.hpp"
#include "chaingen/error.hpp"
#include "chaingen/spatial.hpp"

namespace chaingen::memory {

using nlohmann::json;

std::string_view to_string(Tier t) noexcept {
    switch (t) {
        case Tier::event: return "event";
        case Tier::pattern: return "pattern";
        case Tier::summary: return "summary";
    }
    return "?";
}

std::string_view to_string(StoreKind s) noexcept { return s == StoreKind::short_term ? "short_term" : "long_term"; }

namespace {

Tier parse_tier(const std::string& s) {
    if (s == "event") return Tier::event;
    if (s == "pattern") return Tier::pattern;
    if (s == "summary") return Tier::summary;
    throw Error(Errc::schema_violation, "unknown memory tier '" + s + "'");
}

std::string label_of(const Event& e) { return e.activity.empty() ? std::string(to_string(e.category)) : e.activity; }

}  // namespace

void validate(const RelevanceWeights& w) {
    const double mix[] = {w.a_cos, w.a_time, w.a_space, w.a_semantic};
    for (double a : mix) {
        if (a < 0.0) throw Error(Errc::invalid_weights, "relevance mix must be nonnegative");
    }
    if (std::abs(w.a_cos + w.a_time + w.a_space + w.a_semantic - 1.0) > 1e-9) {
        throw Error(Errc::invalid_weights, "relevance mix must sum to 1");
    }
    if (w.theta_transfer < 0.0 || w.theta_forget <= 0.0 || w.period_hours <= 0.0 || w.spatial_sigma_m <= 0.0 ||
        w.decay_per_hour < 0.0 || w.lambda_time_per_hour < 0.0) {
        throw Error(Errc::invalid_weights, "memory thresholds and scales must be positive");
    }
    if (!w.cos_dim_weights.empty() && w.cos_dim_weights.size() != kFeatureDim) {
        throw Error(Errc::dimension_mismatch, "cosine weights must match the feature dimension");
    }
}

// --- features ---

std::size_t zone_bucket(const GeoPoint& p) {
    const std::string key = zone_key(p);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h % kZoneDims);
}

std::string zone_key(const GeoPoint& p) {
    const long zx = static_cast<long>(std::floor(p.lon / kZoneCellDeg));
    const long zy = static_cast<long>(std::floor(p.lat / kZoneCellDeg));
    return std::to_string(zx) + ":" + std::to_string(zy);
}

int time_bucket(double time_h) {
    double hod = std::fmod(time_h, 24.0);
    if (hod < 0) hod += 24.0;
    return static_cast<int>(hod / kTimeBucketHours);
}

std::vector<double> build_features(double time_h, const GeoPoint& location, std::optional<Category> category,
                                   double emotion) {
    std::vector<double> f(kFeatureDim, 0.0);
    double hod = std::fmod(time_h, 24.0);
    if (hod < 0) hod += 24.0;
    f[std::min<std::size_t>(static_cast<std::size_t>(hod), kHourDims - 1)] = 1.0;
    f[kHourDims + zone_bucket(location)] = 1.0;
    if (category) f[kHourDims + kZoneDims + static_cast<std::size_t>(*category)] = 1.0;
    f[kFeatureDim - 1] = emotion;
    return f;
}

// --- relevance ---

double weighted_cosine(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& w) {
    if (a.size() != b.size() || (!w.empty() && w.size() != a.size())) {
        throw Error(Errc::dimension_mismatch, "feature vectors differ in dimension");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        dot += (w.empty() ? 1.0 : w[j]) * a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double time_similarity(double dt_hours, const RelevanceWeights& w) {
    return std::cos(2.0 * std::numbers::pi * dt_hours / w.period_hours) *
           std::exp(-w.lambda_time_per_hour * std::abs(dt_hours));
}

double space_similarity(double distance_m, const RelevanceWeights& w) {
    const double s = w.spatial_sigma_m;
    return std::exp(-(distance_m * distance_m) / (2.0 * s * s));
}

RelevanceTerms relevance_terms(const Context& ctx, const MemoryItem& item, const RelevanceWeights& w) {
    const std::vector<double> cf =
        ctx.features.empty() ? build_features(ctx.time_h, ctx.location, ctx.category, ctx.emotion) : ctx.features;
    RelevanceTerms r;
    r.cos = weighted_cosine(cf, item.features, w.cos_dim_weights);
    r.time = time_similarity(ctx.time_h - item.event.time_h, w);
    r.space = space_similarity(haversine_distance(ctx.location, item.event.location), w);
    r.semantic = text::similarity(ctx.activity, label_of(item.event));
    r.total = w.a_cos * r.cos + w.a_time * r.time + w.a_space * r.space + w.a_semantic * r.semantic;
    return r;
}

// --- integration ---

std::vector<double> softmax(const std::vector<double>& xs, double temperature) {
    if (xs.empty()) return {};
    double mx = -INFINITY;
    for (double x : xs) mx = std::max(mx, temperature * x);
    std::vector<double> out(xs.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out[i] = std::exp(temperature * xs[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

namespace {

std::array<double, kCategoryCount> category_mass(const std::vector<Scored>& items, const std::vector<double>& att) {
    std::array<double, kCategoryCount> mass{};
    for (std::size_t i = 0; i < items.size(); ++i) {
        mass[static_cast<std::size_t>(items[i].item.event.category)] += att[i];
    }
    return mass;
}

}  // namespace

double consistency(const std::vector<Scored>& items, const std::vector<double>& attention) {
    const std::size_t m = items.size();
    if (m <= 1) return 1.0;
    const auto mass = category_mass(items, attention);
    double gini = 1.0;
    for (double p : mass) gini -= p * p;
    const double max_gini = 1.0 - 1.0 / static_cast<double>(m);
    return std::clamp(1.0 - gini / max_gini, 0.0, 1.0);
}

Integration integrate(const std::vector<Scored>& retrieved, double temperature, double tau) {
    if (retrieved.empty()) throw Error(Errc::empty_input, "nothing to integrate");
    Integration out;
    out.kept = retrieved;
    for (;;) {
        std::vector<double> rel;
        rel.reserve(out.kept.size());
        for (const auto& s : out.kept) rel.push_back(s.relevance);
        out.attention = softmax(rel, temperature);
        out.consistency = consistency(out.kept, out.attention);
        if (out.consistency > tau || out.kept.size() <= 1) break;

        const auto mass = category_mass(out.kept, out.attention);
        const auto dominant = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
        std::optional<std::size_t> victim;
        for (std::size_t i = 0; i < out.kept.size(); ++i) {
            if (static_cast<std::size_t>(out.kept[i].item.event.category) == dominant) continue;
            if (!victim || out.attention[i] <= out.attention[*victim]) victim = i;
        }
        if (!victim) break;
        out.dropped.push_back(out.kept[*victim].item.id);
        out.kept.erase(out.kept.begin() + static_cast<std::ptrdiff_t>(*victim));
        out.resolved = true;
    }
    const std::size_t dim = out.kept.front().item.features.size();
    out.synthesis.assign(dim, 0.0);
    for (std::size_t i = 0; i < out.kept.size(); ++i) {
        const auto& f = out.kept[i].item.features;
        if (f.size() != dim) throw Error(Errc::dimension_mismatch, "feature vectors differ in dimension");
        for (std::size_t j = 0; j < dim; ++j) out.synthesis[j] += out.attention[i] * f[j];
    }
    return out;
}

// --- store ---

double PatternSlice::total() const {
    double t = 0.0;
    for (const auto& [_, c] : counts) t += c;
    return t;
}

double frequency_score(std::size_t access_count) {
    const double n = static_cast<double>(access_count);
    return n / (n + 1.0);
}

MemoryStore::MemoryStore(RelevanceWeights weights) : weights_(std::move(weights)) { validate(weights_); }

std::size_t MemoryStore::size() const noexcept { return short_term_.size() + long_term_.size() + summaries_.size(); }

std::string MemoryStore::bucket_key(const Event& e) {
    auto it = e.conditions.find("weather");
    const std::string weather = it == e.conditions.end() ? "any" : it->second;
    return std::to_string(time_bucket(e.time_h)) + "|" + zone_key(e.location) + "|" + weather;
}

std::string MemoryStore::record_event(const Event& e) {
    if (!(e.emotion >= -1.0 && e.emotion <= 1.0)) throw Error(Errc::invalid_emotion, "emotion must lie in [-1, 1]");
    check_coordinate(e.location);
    char id[32];
    std::snprintf(id, sizeof id, "e-%08zu", ++counter_);
    MemoryItem item;
    item.id = id;
    item.tier = Tier::event;
    item.store = StoreKind::short_term;
    item.event = e;
    item.features = build_features(e.time_h, e.location, e.category, e.emotion);
    item.strength = 1.0;
    item.access_count = 1;
    item.last_access_h = e.time_h;
    item.last_decay_h = e.time_h;
    short_term_.push_back(std::move(item));

    const std::string bucket = bucket_key(e);
    const std::string label = label_of(e);
    patterns_[bucket].counts[label] += 1.0;
    auto [latest, inserted] = pattern_latest_.try_emplace(bucket + "|" + label, e);
    if (!inserted && e.time_h >= latest->second.time_h) latest->second = e;
    return id;
}

void MemoryStore::insert(MemoryItem item) {
    if (item.features.size() != kFeatureDim) throw Error(Errc::dimension_mismatch, "feature dimension mismatch");
    if (!(item.strength > 0.0)) throw Error(Errc::invalid_entry, "strength must be positive");
    if (item.tier == Tier::summary) {
        summaries_.push_back(std::move(item));
    } else if (item.store == StoreKind::short_term) {
        short_term_.push_back(std::move(item));
    } else {
        long_term_.push_back(std::move(item));
    }
}

std::map<std::string, double> MemoryStore::conditional(const std::string& bucket) const {
    std::map<std::string, double> out;
    auto it = patterns_.find(bucket);
    if (it == patterns_.end()) return out;
    const double total = it->second.total();
    for (const auto& [a, c] : it->second.counts) out[a] = c / total;
    return out;
}

std::vector<MemoryItem> MemoryStore::pattern_items() const {
    std::vector<MemoryItem> out;
    for (const auto& [bucket, slice] : patterns_) {
        const double total = slice.total();
        for (const auto& [activity, count] : slice.counts) {
            auto it = pattern_latest_.find(bucket + "|" + activity);
            if (it == pattern_latest_.end()) continue;
            MemoryItem item;
            item.id = "p|" + bucket + "|" + activity;
            item.tier = Tier::pattern;
            item.store = StoreKind::long_term;
            item.event = it->second;
            item.event.activity = activity;
            item.features = build_features(item.event.time_h, item.event.location, item.event.category,
                                           item.event.emotion);
            item.probability = count / total;
            item.support = static_cast<std::size_t>(count);
            item.strength = item.probability;
            item.last_access_h = item.event.time_h;
            item.last_decay_h = item.event.time_h;
            out.push_back(std::move(item));
        }
    }
    return out;
}

std::vector<MemoryItem> MemoryStore::all_items() const {
    std::vector<MemoryItem> all;
    all.reserve(size() + patterns_.size());
    all.insert(all.end(), short_term_.begin(), short_term_.end());
    all.insert(all.end(), long_term_.begin(), long_term_.end());
    auto patterns = pattern_items();
    all.insert(all.end(), std::make_move_iterator(patterns.begin()), std::make_move_iterator(patterns.end()));
    all.insert(all.end(), summaries_.begin(), summaries_.end());
    return all;
}

std::vector<Scored> MemoryStore::retrieve(const Context& ctx, std::size_t k) const {
    if (k == 0) throw Error(Errc::invalid_k, "retrieve needs k >= 1");
    Context c = ctx;
    if (c.features.empty()) c.features = build_features(c.time_h, c.location, c.category, c.emotion);
    std::vector<Scored> scored;
    for (auto& item : all_items()) {
        const double r = relevance(c, item, weights_);
        scored.push_back({std::move(item), r});
    }
    auto better = [](const Scored& a, const Scored& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        return a.item.id < b.item.id;
    };
    if (k < scored.size()) {
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
        scored.resize(k);
    } else {
        std::sort(scored.begin(), scored.end(), better);
    }
    return scored;
}

void MemoryStore::touch(const std::vector<std::string>& ids, double now_h) {
    for (auto* tier : {&short_term_, &long_term_, &summaries_}) {
        for (auto& item : *tier) {
            if (std::find(ids.begin(), ids.end(), item.id) != ids.end()) {
                ++item.access_count;
                item.last_access_h = std::max(item.last_access_h, now_h);
            }
        }
    }
}

double MemoryStore::importance(const MemoryItem& item, double now_h) const {
    const double recency = std::exp(-weights_.decay_per_hour * (now_h - item.last_access_h));
    return weights_.w_frequency * frequency_score(item.access_count) + weights_.w_recency * recency +
           weights_.w_salience * std::abs(item.event.emotion);
}

void MemoryStore::consolidate(double now_h) {
    std::vector<MemoryItem> remaining;
    for (auto& item : short_term_) {
        if (importance(item, now_h) > weights_.theta_transfer) {
            item.store = StoreKind::long_term;
            long_term_.push_back(std::move(item));
        } else {
            remaining.push_back(std::move(item));
        }
    }
    short_term_ = std::move(remaining);

    for (auto& item : long_term_) {
        item.strength *= std::exp(-weights_.decay_per_hour * (now_h - item.last_decay_h));
        item.last_decay_h = now_h;
    }
    std::erase_if(long_term_, [&](const MemoryItem& m) { return m.strength < weights_.theta_forget; });
}

void MemoryStore::sleep_consolidation() {
    std::vector<MemoryItem> merged;
    for (auto& item : long_term_) {
        const std::string key = bucket_key(item.event) + "|" + label_of(item.event) + "|" + item.event.poi_id;
        auto dup = std::find_if(merged.begin(), merged.end(), [&](const MemoryItem& m) {
            if (bucket_key(m.event) + "|" + label_of(m.event) + "|" + m.event.poi_id != key) return false;
            for (std::size_t j = 0; j < m.features.size(); ++j) {
                if (std::abs(m.features[j] - item.features[j]) > 1e-6) return false;
            }
            return true;
        });
        if (dup == merged.end()) {
            merged.push_back(std::move(item));
        } else {
            dup->strength += item.strength;
            dup->access_count += item.access_count;
            dup->last_access_h = std::max(dup->last_access_h, item.last_access_h);
        }
    }
    long_term_ = std::move(merged);

    summaries_.clear();
    for (Category c : kAllCategories) {
        std::vector<const MemoryItem*> members;
        for (const auto& m : long_term_) {
            if (m.tier == Tier::event && m.event.category == c) members.push_back(&m);
        }
        if (members.empty()) continue;
        const double n = static_cast<double>(members.size());
        MemoryItem s;
        s.id = "s|" + std::string(to_string(c));
        s.tier = Tier::summary;
        s.store = StoreKind::long_term;
        s.features.assign(kFeatureDim, 0.0);
        std::map<std::string, std::size_t> labels;
        double lon = 0.0, lat = 0.0, emotion = 0.0, strength = 0.0, latest = -INFINITY;
        for (const auto* m : members) {
            for (std::size_t j = 0; j < kFeatureDim; ++j) s.features[j] += m->features[j] / n;
            lon += m->event.location.lon / n;
            lat += m->event.location.lat / n;
            emotion += m->event.emotion / n;
            strength += m->strength;
            latest = std::max(latest, m->event.time_h);
            ++labels[label_of(m->event)];
        }
        s.event.category = c;
        s.event.location = {lon, lat};
        s.event.emotion = emotion;
        s.event.time_h = latest;
        s.event.activity = std::max_element(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
                               return a.second < b.second;
                           })->first;
        s.strength = strength;
        s.support = members.size();
        s.last_access_h = latest;
        s.last_decay_h = latest;
        summaries_.push_back(std::move(s));
    }
}

// --- json ---

json to_json(const Event& e) {
    return {{"time_h", e.time_h},
            {"location", spatial::point_to_json(e.location)},
            {"activity", e.activity},
            {"category", to_string(e.category)},
            {"conditions", e.conditions},
            {"emotion", e.emotion},
            {"poi_id", e.poi_id}};
}

Event event_from_json(const json& j) {
    Event e;
    e.time_h = j.at("time_h").get<double>();
    e.location = spatial::point_from_json(j.at("location"));
    e.activity = j.value("activity", "");
    e.category = parse_category(j.at("category").get<std::string>());
    if (j.contains("conditions")) e.conditions = j.at("conditions").get<std::map<std::string, std::string>>();
    e.emotion = j.value("emotion", 0.0);
    e.poi_id = j.value("poi_id", "");
    return e;
}

json to_json(const MemoryItem& m) {
    return {{"id", m.id},
            {"tier", to_string(m.tier)},
            {"store", to_string(m.store)},
            {"event", to_json(m.event)},
            {"features", m.features},
            {"strength", m.strength},
            {"access_count", m.access_count},
            {"last_access_h", m.last_access_h},
            {"last_decay_h", m.last_decay_h},
            {"probability", m.probability},
            {"support", m.support}};
}

MemoryItem item_from_json(const json& j) {
    MemoryItem m;
    m.id = j.at("id").get<std::string>();
    m.tier = parse_tier(j.at("tier").get<std::string>());
    m.store = j.at("store").get<std::string>() == "short_term" ? StoreKind::short_term : StoreKind::long_term;
    m.event = event_from_json(j.at("event"));
    m.features = j.at("features").get<std::vector<double>>();
    m.strength = j.at("strength").get<double>();
    m.access_count = j.at("access_count").get<std::size_t>();
    m.last_access_h = j.at("last_access_h").get<double>();
    m.last_decay_h = j.at("last_decay_h").get<double>();
    m.probability = j.value("probability", 0.0);
    m.support = j.value("support", std::size_t{0});
    return m;
}

json MemoryStore::to_json() const {
    auto items = [](const std::vector<MemoryItem>& v) {
        json arr = json::array();
        for (const auto& m : v) arr.push_back(memory::to_json(m));
        return arr;
    };
    json patterns = json::object();
    for (const auto& [bucket, slice] : patterns_) patterns[bucket] = slice.counts;
    json latest = json::object();
    for (const auto& [key, e] : pattern_latest_) latest[key] = memory::to_json(e);
    return {{"short_term", items(short_term_)}, {"long_term", items(long_term_)},
            {"summaries", items(summaries_)},   {"patterns", patterns},
            {"pattern_latest", latest},         {"counter", counter_}};
}

MemoryStore MemoryStore::from_json(const json& j) {
    MemoryStore s;
    try {
        for (const auto& m : j.at("short_term")) s.short_term_.push_back(item_from_json(m));
        for (const auto& m : j.at("long_term")) s.long_term_.push_back(item_from_json(m));
        for (const auto& m : j.at("summaries")) s.summaries_.push_back(item_from_json(m));
        for (const auto& [bucket, counts] : j.at("patterns").items()) {
            s.patterns_[bucket].counts = counts.get<std::map<std::string, double>>();
        }
        const json pattern_latest_json = j.value("pattern_latest", json::object());
        for (const auto& [key, e] : pattern_latest_json.items()) {
            s.pattern_latest_[key] = event_from_json(e);
        }
        s.counter_ = j.value("counter", std::size_t{0});
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, std::string("memory store: ") + e.what());
    }
    return s;
}

Context context_from_json(const json& j) {
    Context c;
    c.time_h = j.at("time_h").get<double>();
    c.location = spatial::point_from_json(j.at("location"));
    c.activity = j.value("activity", "");
    if (j.contains("category")) c.category = parse_category(j.at("category").get<std::string>());
    if (j.contains("conditions")) c.conditions = j.at("conditions").get<std::map<std::string, std::string>>();
    c.emotion = j.value("emotion", 0.0);
    if (j.contains("features")) c.features = j.at("features").get<std::vector<double>>();
    return c;
}

// --- service ---

namespace {

json scored_json(const Scored& s) {
    return {{"id", s.item.id},
            {"tier", to_string(s.item.tier)},
            {"category", to_string(s.item.event.category)},
            {"activity", label_of(s.item.event)},
            {"poi_id", s.item.event.poi_id},
            {"emotion", s.item.event.emotion},
            {"strength", s.item.strength},
            {"relevance", s.relevance}};
}

}  // namespace

json MemoryService::query(const json& payload, const json& /*ctx*/) {
    const std::string op = payload.value("op", "");
    try {
        if (op == "retrieve" || op == "integrate") {
            const Context ctx = context_from_json(payload.at("context"));
            const std::size_t k = payload.value("k", std::size_t{8});
            auto hits = store_->retrieve(ctx, k);
            if (payload.contains("poi_id")) {
                const std::string poi = payload.at("poi_id").get<std::string>();
                std::erase_if(hits, [&](const Scored& s) { return s.item.event.poi_id != poi; });
            }
            if (op == "retrieve") {
                json arr = json::array();
                for (const auto& s : hits) arr.push_back(scored_json(s));
                return {{"items", arr}};
            }
            if (hits.empty()) {
                return {{"items", json::array()}, {"attention", json::array()}, {"consistency", 1.0},
                        {"category_mass", json::object()}};
            }
            const auto& w = store_->weights();
            const Integration integ = integrate(hits, w.attention_temperature, w.consistency_tau);
            json items = json::array();
            json mass = json::object();
            for (std::size_t i = 0; i < integ.kept.size(); ++i) {
                items.push_back(scored_json(integ.kept[i]));
                const std::string cat(to_string(integ.kept[i].item.event.category));
                mass[cat] = mass.value(cat, 0.0) + integ.attention[i];
            }
            return {{"items", items},
                    {"attention", integ.attention},
                    {"synthesis", integ.synthesis},
                    {"consistency", integ.consistency},
                    {"resolved", integ.resolved},
                    {"dropped", integ.dropped},
                    {"category_mass", mass}};
        }
        if (op == "importance") {
            const std::string id = payload.at("id").get<std::string>();
            for (const auto& m : store_->short_term()) {
                if (m.id == id) return {{"importance", store_->importance(m, payload.at("now_h").get<double>())}};
            }
            throw Error(Errc::invalid_entry, "no short-term item '" + id + "'");
        }
        if (op == "export") return store_->to_json();
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("memory payload: ") + e.what());
    }
    throw Error(Errc::unsupported_operation, "memory has no query op '" + op + "'");
}

json MemoryService::act(const json& payload, const json& /*ctx*/) {
    const std::string op = payload.value("op", "");
    try {
        if (op == "record") return {{"id", store_->record_event(event_from_json(payload.at("event")))}};
        if (op == "touch") {
            store_->touch(payload.at("ids").get<std::vector<std::string>>(), payload.at("now_h").get<double>());
            return {{"ok", true}};
        }
        if (op == "consolidate") {
            store_->consolidate(payload.at("now_h").get<double>());
            return {{"short_term", store_->short_term().size()}, {"long_term", store_->long_term().size()}};
        }
        if (op == "sleep") {
            store_->sleep_consolidation();
            return {{"long_term", store_->long_term().size()}, {"summaries", store_->summaries().size()}};
        }
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("memory payload: ") + e.what());
    }
    throw Error(Errc::unsupported_operation, "memory has no action op '" + op + "'");
}

}  // namespace chaingen::memory
