#include "chaingen/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>

#include "chaingen/error.hpp"

namespace chaingen::eval {

void check_dissimilarity(const Matrix& d) {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i].size() != n) throw Error(Errc::invalid_entry, "dissimilarity matrix is not square");
        if (d[i][i] != 0.0) throw Error(Errc::invalid_entry, "dissimilarity matrix needs a zero diagonal");
        for (std::size_t j = 0; j < i; ++j) {
            if (d[i][j] != d[j][i] || !(d[i][j] >= 0.0)) {
                throw Error(Errc::invalid_entry, "dissimilarity matrix must be symmetric and nonnegative");
            }
        }
    }
}

Points classical_mds(const Matrix& d, std::size_t dims) {
    check_dissimilarity(d);
    const auto n = static_cast<Eigen::Index>(d.size());
    if (n == 0) return {};
    Eigen::MatrixXd sq(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) sq(i, j) = d[i][j] * d[i][j];
    }
    const Eigen::MatrixXd centering =
        Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    const Eigen::MatrixXd b = -0.5 * centering * sq * centering;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    const auto& values = solver.eigenvalues();  // ascending
    const auto& vectors = solver.eigenvectors();

    const double tol = 1e-9 * std::max(1.0, values.cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = n - 1; c >= 0 && keep.size() < dims; --c) {
        if (values(c) > tol) keep.push_back(c);
    }
    Points out(static_cast<std::size_t>(n), std::vector<double>(std::max<std::size_t>(keep.size(), 1), 0.0));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const Eigen::Index c = keep[k];
        const double scale = std::sqrt(values(c));
        // Sign convention: the largest-magnitude component is positive.
        Eigen::Index arg = 0;
        vectors.col(c).cwiseAbs().maxCoeff(&arg);
        const double sign = vectors(arg, c) < 0.0 ? -1.0 : 1.0;
        for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)][k] = sign * vectors(i, c) * scale;
    }
    return out;
}

namespace {

struct Cluster {
    std::vector<std::size_t> members;  // sorted; members.front() is the cluster key
    std::vector<double> centroid;
};

double ward_cost(const Cluster& a, const Cluster& b) {
    double sq = 0.0;
    for (std::size_t t = 0; t < a.centroid.size(); ++t) {
        const double diff = a.centroid[t] - b.centroid[t];
        sq += diff * diff;
    }
    const double na = static_cast<double>(a.members.size());
    const double nb = static_cast<double>(b.members.size());
    return std::sqrt(2.0 * na * nb / (na + nb)) * std::sqrt(sq);
}

Assignment labels_of(const std::vector<Cluster>& clusters, std::size_t n) {
    Assignment labels(n, -1);
    // `clusters` is kept ordered by lowest member.
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (std::size_t m : clusters[c].members) labels[m] = static_cast<int>(c);
    }
    return labels;
}

}  // namespace

std::map<std::size_t, Assignment> ward_partitions(const Points& points, const std::vector<std::size_t>& ks) {
    const std::size_t n = points.size();
    std::set<std::size_t> wanted;
    for (std::size_t k : ks) {
        if (k < 1 || k > n) {
            throw Error(Errc::invalid_k, "k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
        }
        wanted.insert(k);
    }
    std::vector<Cluster> clusters;
    clusters.reserve(n);
    for (std::size_t i = 0; i < n; ++i) clusters.push_back({{i}, points[i]});

    std::map<std::size_t, Assignment> out;
    if (wanted.count(n)) out[n] = labels_of(clusters, n);
    while (clusters.size() > 1 && clusters.size() > *wanted.begin()) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double cost = ward_cost(clusters[i], clusters[j]);
                if (cost < best) {
                    best = cost;
                    bi = i;
                    bj = j;
                }
            }
        }
        Cluster& a = clusters[bi];
        Cluster& b = clusters[bj];
        const double na = static_cast<double>(a.members.size());
        const double nb = static_cast<double>(b.members.size());
        for (std::size_t t = 0; t < a.centroid.size(); ++t) {
            a.centroid[t] = (na * a.centroid[t] + nb * b.centroid[t]) / (na + nb);
        }
        a.members.insert(a.members.end(), b.members.begin(), b.members.end());
        std::sort(a.members.begin(), a.members.end());
        clusters.erase(clusters.begin() + static_cast<long>(bj));
        if (wanted.count(clusters.size())) out[clusters.size()] = labels_of(clusters, n);
    }
    return out;
}

Assignment ward_points(const Points& points, std::size_t k) { return ward_partitions(points, {k}).at(k); }

namespace {

std::size_t embedding_dims(std::size_t n) { return std::min<std::size_t>(n > 0 ? n - 1 : 0, 10); }

}  // namespace

Assignment ward_cluster(const Matrix& d, std::size_t k) {
    if (k < 1 || k > d.size()) {
        throw Error(Errc::invalid_k, "k = " + std::to_string(k) + " outside [1, " + std::to_string(d.size()) + "]");
    }
    return ward_points(classical_mds(d, embedding_dims(d.size())), k);
}

double silhouette(const Matrix& d, const Assignment& labels) {
    const std::size_t n = labels.size();
    if (d.size() != n) throw Error(Errc::invalid_entry, "assignment size differs from matrix size");
    std::map<int, std::size_t> sizes;
    for (int l : labels) ++sizes[l];
    if (sizes.size() < 2) throw Error(Errc::single_cluster, "silhouette needs at least two clusters");

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) continue;  // singleton scores 0
        std::map<int, double> sums;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sums[labels[j]] += d[i][j];
        }
        const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [label, sum] : sums) {
            if (label != labels[i]) b = std::min(b, sum / static_cast<double>(sizes[label]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

KSelection select_k(const Matrix& d, const std::vector<std::size_t>& k_range) {
    if (k_range.empty()) throw Error(Errc::empty_range, "no candidate cluster counts");
    for (std::size_t k : k_range) {
        if (k < 2 || k + 1 > d.size()) {
            throw Error(Errc::invalid_k, "k = " + std::to_string(k) + " outside [2, " + std::to_string(d.size()) + " - 1]");
        }
    }
    const auto parts = ward_partitions(classical_mds(d, embedding_dims(d.size())), k_range);
    KSelection sel;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [k, labels] : parts) {  // ascending k
        const double s = silhouette(d, labels);
        sel.scores[k] = s;
        if (s > best) {
            best = s;
            sel.k = k;
            sel.labels = labels;
        }
    }
    return sel;
}

Diversity diversity_score(const Matrix& d, const Assignment& labels) {
    if (d.size() != labels.size()) throw Error(Errc::invalid_entry, "assignment size differs from matrix size");
    double inter = 0.0, intra = 0.0;
    std::size_t n_inter = 0, n_intra = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            if (labels[i] == labels[j]) {
                intra += d[i][j];
                ++n_intra;
            } else {
                inter += d[i][j];
                ++n_inter;
            }
        }
    }
    Diversity out;
    out.between = n_inter ? inter / static_cast<double>(n_inter) : 0.0;
    out.within = n_intra ? intra / static_cast<double>(n_intra) : 0.0;
    const double sum = out.between + out.within;
    out.div = sum > 0.0 ? (out.between - out.within) / sum : 0.0;
    out.score_gd = diversity_score_gd(out.div);
    return out;
}

}  // namespace chaingen::eval
