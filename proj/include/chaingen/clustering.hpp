#pragma once

#include <cstddef>
#include <map>
#include <vector>

namespace chaingen::eval {

using Matrix = std::vector<std::vector<double>>;
using Points = std::vector<std::vector<double>>;
/// Cluster label per item, numbered 0.. in order of each cluster's lowest member.
using Assignment = std::vector<int>;

/// Classical MDS: double-centred squared dissimilarities, top `dims`
/// eigenpairs with positive eigenvalues (non-Euclidean parts are dropped).
Points classical_mds(const Matrix& d, std::size_t dims);

/// Agglomerative Ward merging over centroids; the merge cost of clusters i, j
/// is sqrt(2 n_i n_j / (n_i + n_j)) * |mu_i - mu_j|. Exact ties go to the
/// pair with the lowest member indices. Returns the partition at each
/// requested k (1 <= k <= N). Throws invalid_k.
std::map<std::size_t, Assignment> ward_partitions(const Points& points, const std::vector<std::size_t>& ks);
Assignment ward_points(const Points& points, std::size_t k);

/// Ward clustering of a dissimilarity matrix via an MDS embedding into
/// min(N - 1, 10) dimensions. Throws invalid_k.
Assignment ward_cluster(const Matrix& d, std::size_t k);

/// Mean silhouette; singletons score 0 and a = b = 0 scores 0.
/// Throws single_cluster.
double silhouette(const Matrix& d, const Assignment& labels);

struct KSelection {
    std::size_t k = 0;
    std::map<std::size_t, double> scores;  // mean silhouette per k
    Assignment labels;                     // partition at k
};

/// k maximizing mean silhouette over Ward partitions; ties go to the smaller k.
/// Throws empty_range, invalid_k.
KSelection select_k(const Matrix& d, const std::vector<std::size_t>& k_range);

struct Diversity {
    double between = 0.0;  // B: mean dissimilarity over inter-cluster pairs
    double within = 0.0;   // W: mean over intra-cluster pairs
    double div = 0.0;      // (B - W) / (B + W), 0 when B + W = 0
    double score_gd = 5.5;
};

/// 5.5 + 4.5 * DIV.
constexpr double diversity_score_gd(double div) noexcept { return 5.5 + 4.5 * div; }

Diversity diversity_score(const Matrix& d, const Assignment& labels);

/// Throws invalid_entry when not square, symmetric or zero-diagonal.
void check_dissimilarity(const Matrix& d);

}  // namespace chaingen::eval
