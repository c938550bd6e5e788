#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace chaingen::text {

/// Sparse nonnegative vector, entries sorted by index.
struct SparseVector {
    std::vector<std::pair<std::uint32_t, double>> entries;

    double squared_norm() const noexcept;
    bool empty() const noexcept { return entries.empty(); }
};

inline constexpr std::uint32_t kEmbeddingDimension = 1u << 20;
inline constexpr std::uint64_t kEmbeddingSeed = 0x5eed'c0de'1234'abcdULL;

/// Hashed bag of character trigrams over lowercased, boundary-marked words.
/// Deterministic for a given text; counts are small integers so identical
/// texts give a cosine of exactly 1.
SparseVector embed(std::string_view text);

/// Cosine similarity; 0 when either vector is empty. Symmetric and, for these
/// nonnegative vectors, in [0, 1].
double cosine(const SparseVector& a, const SparseVector& b) noexcept;

inline double similarity(std::string_view a, std::string_view b) { return cosine(embed(a), embed(b)); }

}  // namespace chaingen::text
