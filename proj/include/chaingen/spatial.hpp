#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chaingen/embedding.hpp"
#include "chaingen/network.hpp"
#include "chaingen/protocol.hpp"
#include "chaingen/types.hpp"

namespace chaingen::spatial {

struct PoiRecord {
    std::string id;
    std::string name;
    Category category = Category::life_services;
    std::string label;  // original (possibly finer) category label
    GeoPoint location;
    int open_min = 0;
    int close_min = 1440;
    double rating = 0.0;
    int price = 0;
    std::vector<std::string> tags;

    /// Text used for semantic matching: name, category, label and tags.
    std::string descriptor() const;
    bool always_open() const noexcept { return close_min - open_min >= 1440; }
    /// Whether [start, end) on the planning clock fits inside the opening window.
    bool open_during(int start_min, int end_min) const noexcept;
};

/// Throws invalid_coordinate / invalid_entry.
void validate(const PoiRecord& poi);

nlohmann::json to_json(const PoiRecord& p);
PoiRecord poi_from_json(const nlohmann::json& j);

/// Immutable POI collection with a uniform-grid range index.
class PoiDataset {
public:
    PoiDataset() = default;
    explicit PoiDataset(std::vector<PoiRecord> pois, double cell_deg = 0.005);

    const std::vector<PoiRecord>& pois() const noexcept { return pois_; }
    std::size_t size() const noexcept { return pois_.size(); }
    bool empty() const noexcept { return pois_.empty(); }
    const PoiRecord& at(std::size_t i) const { return pois_.at(i); }
    const text::SparseVector& embedding(std::size_t i) const { return embeddings_.at(i); }
    std::optional<std::size_t> find(const std::string& id) const;
    /// Throws invalid_entry for an unknown id.
    const PoiRecord& by_id(const std::string& id) const;

    /// Indices of POIs within radius_m (great-circle), ascending.
    std::vector<std::size_t> range_query(const GeoPoint& origin, double radius_m) const;

private:
    std::int64_t cell_key(long cx, long cy) const noexcept { return (static_cast<std::int64_t>(cx) << 32) ^ (cy & 0xffffffff); }

    std::vector<PoiRecord> pois_;
    std::vector<text::SparseVector> embeddings_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> grid_;
    double cell_deg_ = 0.005;
};

/// Mix of semantic, preference and distance-decay scores.
struct ScoreWeights {
    double semantic = 0.5;
    double preference = 0.3;
    double distance = 0.2;
    double semantic_threshold = 0.2;
};

/// Throws invalid_weights unless nonnegative and summing to 1 within 1e-9.
void validate(const ScoreWeights& w);

/// Per-category preference in [0, 1].
struct Preferences {
    std::array<double, kCategoryCount> category{1, 1, 1, 1, 1, 1, 1, 1};
    double weight(Category c) const noexcept { return category[static_cast<std::size_t>(c)]; }
};

/// 0.7 * category preference + 0.3 * rating / 5.
double preference_score(const PoiRecord& poi, const Preferences& prefs);
/// exp(-d / (radius / 3)); 1 at d = 0, including radius 0.
double distance_decay(double distance_m, double radius_m);

struct PoiQuery {
    GeoPoint origin;
    std::string text;
    double radius_m = 1000.0;
    std::size_t k = 10;
    std::optional<Category> category;  // restrict candidates
};

struct ScoredPoi {
    std::size_t index = 0;
    std::string id;
    double distance_m = 0.0;
    double semantic = 0.0;
    double preference = 0.0;
    double decay = 0.0;
    double score = 0.0;
};

/// Top-k POIs within the radius by alpha*semantic + beta*preference +
/// gamma*decay, descending, ties by id. Throws empty_dataset / invalid_weights.
std::vector<ScoredPoi> poi_search(const PoiDataset& data, const PoiQuery& query, const ScoreWeights& weights,
                                  const Preferences& prefs);

struct SemanticMatch {
    std::size_t index = 0;
    std::string id;
    double similarity = 0.0;
};

/// POIs within radius whose descriptor similarity to the query is >= threshold,
/// descending, ties by id.
std::vector<SemanticMatch> semantic_match(const PoiDataset& data, const std::string& query_text,
                                          const GeoPoint& origin, double radius_m, double threshold);

/// POIs, road network and scoring defaults shared read-only by all agents.
struct SpatialWorld {
    PoiDataset pois;
    RoadNetwork network;
    ScoreWeights score_weights;
    CostWeights cost_weights;
};

// --- ingestion ---

/// CSV columns: id,name,category,lon,lat,open_min,close_min,rating,price,tags
/// (tags separated by ';'). Throws io_failure / parse_error.
std::vector<PoiRecord> load_pois_csv(const std::filesystem::path& path);
std::vector<PoiRecord> parse_pois_csv(const std::string& text);
/// GeoJSON FeatureCollection of Point features carrying the same properties.
std::vector<PoiRecord> parse_pois_geojson(const std::string& text);
std::vector<PoiRecord> load_pois_geojson(const std::filesystem::path& path);
/// CSV columns: from,from_lon,from_lat,to,to_lon,to_lat,length_m,walk_kmh,
/// transit_kmh,drive_kmh,cycle_kmh[,demand_weight][,oneway]
RoadNetwork parse_network_csv(const std::string& text);
RoadNetwork load_network_csv(const std::filesystem::path& path);

/// Splits one CSV record, honouring double quotes.
std::vector<std::string> split_csv_line(const std::string& line);

/// "spatial" tool: ops poi_search / route_plan / travel / traffic_predict /
/// semantic_match / poi.
class SpatialService : public protocol::ToolService {
public:
    explicit SpatialService(std::shared_ptr<const SpatialWorld> world) : world_(std::move(world)) {}
    std::string name() const override { return "spatial"; }
    nlohmann::json query(const nlohmann::json& payload, const nlohmann::json& session_context) override;

private:
    std::shared_ptr<const SpatialWorld> world_;
};

nlohmann::json point_to_json(const GeoPoint& p);
GeoPoint point_from_json(const nlohmann::json& j);
std::vector<TravelMode> modes_from_json(const nlohmann::json& j);

}  // namespace chaingen::spatial
