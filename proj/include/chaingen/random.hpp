#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace chaingen {

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for sample `index` of a run with `global_seed`.
constexpr std::uint64_t sample_seed(std::uint64_t global_seed, std::uint64_t index) noexcept {
    return mix_seed(mix_seed(global_seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// Portable random source: the engine's output sequence is fixed by the
/// standard, and the conversions below avoid implementation-defined
/// distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    long integer(long lo, long hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<long>(engine_() % span);
    }
    /// Index drawn proportionally to nonnegative weights; -1 when all are 0.
    long weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) return -1;
        double r = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (r < weights[i]) return static_cast<long>(i);
            r -= weights[i];
        }
        for (std::size_t i = weights.size(); i-- > 0;) {
            if (weights[i] > 0.0) return static_cast<long>(i);
        }
        return -1;
    }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(integer(0, static_cast<long>(i) - 1))]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace chaingen
