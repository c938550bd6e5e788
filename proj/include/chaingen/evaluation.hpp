#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaingen/chain.hpp"
#include "chaingen/clustering.hpp"
#include "chaingen/spatial.hpp"

namespace chaingen::eval {

inline constexpr std::size_t kSlots = 96;
inline constexpr int kSlotMinutes = 15;

using Sequence = std::vector<Category>;

/// 96 fifteen-minute slots of the calendar day. Each minute takes the
/// category of the record covering it (at m or m + 1440 on the planning
/// clock), "travel" between consecutive records, and residence outside the
/// chain; a slot takes its majority label, ties to the earlier category in
/// kAllCategories. Throws empty_chain.
Sequence discretize(const ActivityChain& chain);

/// Natural-log JS divergence. Throws support_mismatch, non_normalized.
double js_divergence(const std::vector<double>& p, const std::vector<double>& q, double tolerance = 1e-6);

/// Two-sample KS statistic over the pooled points. Throws empty_sample.
double ks_statistic(const std::vector<double>& xs, const std::vector<double>& ys);

/// 0.5 (1 - JS / ln 2) + 0.5 (1 - KS), in [0, 1]. Throws out_of_range.
double objective_quality_raw(double js, double ks);
/// The raw score scaled x10 onto the 0-10 report axis.
double objective_quality(double js, double ks);
/// alpha * subjective + (1 - alpha) * objective, both on 0-10. Throws out_of_range.
double total_quality(double q_subjective, double q_objective, double alpha = 0.5);

/// Local cost between categories; binary by default.
using CostTable = std::array<std::array<double, kCategoryCount>, kCategoryCount>;
CostTable binary_costs();

/// Full-matrix DTW. Throws empty_sequence.
double dtw_distance(const Sequence& a, const Sequence& b, const CostTable& costs = binary_costs());

/// Symmetric matrix over unordered pairs; rows are split across `threads`
/// with schedule-independent output. Throws too_few_sequences.
Matrix pairwise_dtw(const std::vector<Sequence>& seqs, std::size_t threads = 1,
                    const CostTable& costs = binary_costs());

// --- spatial density ---

struct BoundingBox {
    double min_lon = 0.0, min_lat = 0.0, max_lon = 0.0, max_lat = 0.0;
};

/// Box around all points, padded by `pad_fraction` of each side (at least 1e-4 deg).
BoundingBox bounding_box(const std::vector<GeoPoint>& points, double pad_fraction = 0.05);

struct SpatialDensity {
    BoundingBox box;
    std::size_t nx = 100, ny = 100;
    double bandwidth_lon = 0.0, bandwidth_lat = 0.0;
    std::vector<double> mass;  // row-major (y, x), sums to 1
    double raw_total = 0.0;    // kernel sum before normalisation
    std::size_t points = 0;
};

/// Scott's rule for 2-D: n^(-1/6) * sample standard deviation per axis.
/// Degenerate spreads fall back to one grid cell.
std::pair<double, double> scott_bandwidth(const std::vector<GeoPoint>& points, const BoundingBox& box,
                                          std::size_t nx, std::size_t ny);

/// Gaussian product kernel evaluated at cell centres, then normalised.
/// Throws empty_sample.
SpatialDensity kde(const std::vector<GeoPoint>& points, const BoundingBox& box, std::size_t nx, std::size_t ny,
                   std::optional<std::pair<double, double>> bandwidth = std::nullopt);

/// Activity locations with their clock-of-day start minute.
struct StampedPoint {
    GeoPoint location;
    int minute = 0;  // start minute mod 1440
};
std::vector<StampedPoint> activity_points(const std::vector<ActivityChain>& chains);

// --- corpus evaluation ---

struct EvaluationOptions {
    std::size_t grid = 100;
    /// Clock-of-day segments [from, to) for segmented spatial JS.
    std::vector<std::pair<int, int>> segments = {{0, 240},    {240, 480},   {480, 720},
                                                 {720, 960},  {960, 1200}, {1200, 1440}};
    double alpha = 0.5;
    std::size_t k_min = 2;
    std::size_t k_max = 15;
    /// Chains used for the DTW diversity analysis (the first N).
    std::size_t diversity_limit = 300;
    std::size_t threads = 1;
};

nlohmann::json to_json(const EvaluationOptions& o);
EvaluationOptions evaluation_options_from_json(const nlohmann::json& j);

struct KsTriple {
    double start = 0.0;
    double end = 0.0;
    double duration = 0.0;
};

struct EvaluationReport {
    std::size_t generated = 0;
    std::size_t reference = 0;
    // Fidelity against the reference corpus (absent without one).
    std::optional<double> js_spatial;
    std::vector<std::pair<int, int>> segments;
    std::vector<std::optional<double>> js_segments;  // absent when a segment is empty in either corpus
    std::map<std::string, KsTriple> ks;
    std::optional<double> ks_temporal;  // mean over every per-category statistic
    std::optional<double> q_obj;        // 0-10
    std::optional<double> q_subjective;
    std::optional<double> q_total;
    // Diversity of the generated corpus.
    std::optional<std::size_t> k_star;
    std::map<std::size_t, double> silhouettes;
    std::optional<Diversity> diversity;
    // Validation of the generated corpus.
    std::map<std::string, std::size_t> violations;
    std::size_t chains_with_violations = 0;
};

nlohmann::json to_json(const EvaluationReport& r);

struct SpatialFidelity {
    double js = 0.0;
    SpatialDensity generated, reference;
    std::vector<std::optional<double>> segments;
};

/// All-day and segmented JS over activity locations. Both corpora share the
/// grid box; each uses its own Scott bandwidth, and segment densities reuse
/// the all-day bandwidth of their corpus. Throws empty_sample.
SpatialFidelity spatial_fidelity(const std::vector<ActivityChain>& generated,
                                 const std::vector<ActivityChain>& reference, const EvaluationOptions& options);

/// Per-category KS over start, end and duration. A category present in only
/// one corpus scores 1 on all three.
std::map<std::string, KsTriple> temporal_fidelity(const std::vector<ActivityChain>& generated,
                                                  const std::vector<ActivityChain>& reference);

/// Throws empty_chain when `generated` is empty.
EvaluationReport evaluate_corpus(const std::vector<ActivityChain>& generated,
                                 const std::vector<ActivityChain>* reference, const EvaluationOptions& options = {},
                                 const spatial::SpatialWorld* world = nullptr,
                                 std::optional<double> q_subjective = std::nullopt);

}  // namespace chaingen::eval
