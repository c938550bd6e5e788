#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/protocol.hpp"
#include "chaingen/types.hpp"

namespace chaingen::memory {

enum class Tier { event, pattern, summary };
enum class StoreKind { short_term, long_term };

std::string_view to_string(Tier t) noexcept;
std::string_view to_string(StoreKind s) noexcept;

/// Feature layout: hour-of-day one-hot (24), hashed zone one-hot (16),
/// category one-hot (8), emotion (1).
inline constexpr std::size_t kHourDims = 24;
inline constexpr std::size_t kZoneDims = 16;
inline constexpr std::size_t kFeatureDim = kHourDims + kZoneDims + kCategoryCount + 1;
inline constexpr double kZoneCellDeg = 0.01;
inline constexpr double kTimeBucketHours = 4.0;

struct Event {
    double time_h = 0.0;  // hours since the store epoch
    GeoPoint location;
    std::string activity;  // free-text activity label
    Category category = Category::residence;
    std::map<std::string, std::string> conditions;  // e.g. {"weather": "rain"}
    double emotion = 0.0;                           // in [-1, 1]
    std::string poi_id;
};

struct MemoryItem {
    std::string id;
    Tier tier = Tier::event;
    StoreKind store = StoreKind::short_term;
    Event event;  // for pattern/summary items: representative time, place, label
    std::vector<double> features;
    double strength = 1.0;
    std::size_t access_count = 1;
    double last_access_h = 0.0;
    double last_decay_h = 0.0;
    /// Pattern: P(a | bucket). Summary: number of distilled events.
    double probability = 0.0;
    std::size_t support = 0;
};

struct RelevanceWeights {
    double a_cos = 0.25, a_time = 0.25, a_space = 0.25, a_semantic = 0.25;
    std::vector<double> cos_dim_weights;  // empty means all 1
    double lambda_time_per_hour = 0.11552453009332421;  // ln 2 / 6
    double period_hours = 24.0;
    double spatial_sigma_m = 500.0;
    double theta_transfer = 0.5;
    double theta_forget = 0.05;
    double decay_per_hour = 0.01;
    double w_frequency = 0.4, w_recency = 0.4, w_salience = 0.2;
    double attention_temperature = 5.0;
    double consistency_tau = 0.3;
};

/// Throws invalid_weights when the mix is negative or does not sum to 1,
/// or thresholds are not positive.
void validate(const RelevanceWeights& w);

struct Context {
    double time_h = 0.0;
    GeoPoint location;
    std::string activity;
    std::optional<Category> category;
    std::map<std::string, std::string> conditions;
    double emotion = 0.0;
    std::vector<double> features;  // filled from the fields above when empty
};

/// Deterministic feature construction standing in for a learned encoder.
std::vector<double> build_features(double time_h, const GeoPoint& location, std::optional<Category> category,
                                   double emotion);
std::size_t zone_bucket(const GeoPoint& p);
std::string zone_key(const GeoPoint& p);
int time_bucket(double time_h);

struct RelevanceTerms {
    double cos = 0.0;
    double time = 0.0;
    double space = 0.0;
    double semantic = 0.0;
    double total = 0.0;
};

double weighted_cosine(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& w);
double time_similarity(double dt_hours, const RelevanceWeights& w);
double space_similarity(double distance_m, const RelevanceWeights& w);

/// Four-component relevance. Throws dimension_mismatch.
RelevanceTerms relevance_terms(const Context& ctx, const MemoryItem& item, const RelevanceWeights& w);
inline double relevance(const Context& ctx, const MemoryItem& item, const RelevanceWeights& w) {
    return relevance_terms(ctx, item, w).total;
}

struct Scored {
    MemoryItem item;
    double relevance = 0.0;
};

struct Integration {
    std::vector<double> synthesis;
    std::vector<double> attention;  // aligned with `kept`
    std::vector<Scored> kept;
    std::vector<std::string> dropped;
    double consistency = 1.0;
    bool resolved = false;  // resolution path taken
};

std::vector<double> softmax(const std::vector<double>& xs, double temperature);
/// 1 - (attention-weighted Gini impurity of category labels) / (1 - 1/m).
double consistency(const std::vector<Scored>& items, const std::vector<double>& attention);
/// Softmax attention over relevances and attention-weighted feature synthesis;
/// while consistency <= tau, drops the lowest-attention item whose category
/// disagrees with the dominant one and re-integrates. Throws empty_input.
Integration integrate(const std::vector<Scored>& retrieved, double temperature, double tau);

struct PatternSlice {
    std::map<std::string, double> counts;  // activity -> count
    double total() const;
};

class MemoryStore {
public:
    explicit MemoryStore(RelevanceWeights weights = {});

    const RelevanceWeights& weights() const noexcept { return weights_; }
    const std::vector<MemoryItem>& short_term() const noexcept { return short_term_; }
    const std::vector<MemoryItem>& long_term() const noexcept { return long_term_; }
    const std::vector<MemoryItem>& summaries() const noexcept { return summaries_; }
    const std::map<std::string, PatternSlice>& patterns() const noexcept { return patterns_; }
    std::size_t size() const noexcept;

    /// Appends to short-term memory and updates the pattern table.
    /// Throws invalid_emotion. Returns the new item id.
    std::string record_event(const Event& e);
    /// Inserts a fully formed item (tests, persistence). Throws dimension_mismatch.
    void insert(MemoryItem item);

    /// P(activity | bucket) for every activity seen in the bucket.
    std::map<std::string, double> conditional(const std::string& bucket) const;
    static std::string bucket_key(const Event& e);

    /// Pattern-tier items materialized from the pattern table.
    std::vector<MemoryItem> pattern_items() const;
    /// All retrievable items: short-term, long-term, pattern and summary tiers.
    std::vector<MemoryItem> all_items() const;

    /// Exact top-k by relevance (descending, ties by id).
    std::vector<Scored> retrieve(const Context& ctx, std::size_t k) const;
    /// Registers an access for each id (frequency and recency bookkeeping).
    void touch(const std::vector<std::string>& ids, double now_h);

    double importance(const MemoryItem& item, double now_h) const;
    /// Transfer (I > theta_transfer), decay of long-term strengths, forgetting.
    void consolidate(double now_h);
    /// Merges duplicate long-term events and rebuilds the summary tier.
    void sleep_consolidation();

    nlohmann::json to_json() const;
    static MemoryStore from_json(const nlohmann::json& j);

private:
    RelevanceWeights weights_;
    std::vector<MemoryItem> short_term_;
    std::vector<MemoryItem> long_term_;
    std::vector<MemoryItem> summaries_;
    std::map<std::string, PatternSlice> patterns_;
    std::map<std::string, Event> pattern_latest_;  // bucket|activity -> latest event
    std::size_t counter_ = 0;
};

/// Normalized access count: n / (n + 1).
double frequency_score(std::size_t access_count);

nlohmann::json to_json(const MemoryItem& item);
MemoryItem item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);
Context context_from_json(const nlohmann::json& j);

/// "memory" tool bound to one persona's store: queries retrieve / integrate /
/// importance / export; actions record / consolidate / sleep.
class MemoryService : public protocol::ToolService {
public:
    explicit MemoryService(std::shared_ptr<MemoryStore> store) : store_(std::move(store)) {}
    std::string name() const override { return "memory"; }
    nlohmann::json query(const nlohmann::json& payload, const nlohmann::json& session_context) override;
    nlohmann::json act(const nlohmann::json& payload, const nlohmann::json& session_context) override;

private:
    std::shared_ptr<MemoryStore> store_;
};

}  // namespace chaingen::memory
