#include "chaingen/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>

namespace chaingen::text {

double SparseVector::squared_norm() const noexcept {
    double s = 0.0;
    for (const auto& [_, v] : entries) s += v * v;
    return s;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

SparseVector embed(std::string_view text) {
    std::map<std::uint32_t, double> counts;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const std::string marked = "#" + word + "#";
        for (std::size_t i = 0; i + 3 <= marked.size(); ++i) {
            const auto h = fnv1a(std::string_view(marked).substr(i, 3), kEmbeddingSeed);
            counts[static_cast<std::uint32_t>(h % kEmbeddingDimension)] += 1.0;
        }
        word.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    SparseVector v;
    v.entries.assign(counts.begin(), counts.end());
    return v;
}

double cosine(const SparseVector& a, const SparseVector& b) noexcept {
    if (a.empty() || b.empty()) return 0.0;
    double dot = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            dot += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    // sqrt(n1 * n2) is exact for identical integer-count vectors.
    const double denom = std::sqrt(a.squared_norm() * b.squared_norm());
    return std::clamp(dot / denom, 0.0, 1.0);
}

}  // namespace chaingen::text
