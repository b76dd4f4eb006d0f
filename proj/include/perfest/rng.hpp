#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace perfest {

// SplitMix64 finalizer; used to turn (seed, stream) pairs into decorrelated seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic substream derivation, e.g. per-chunk seeds from (run seed, chunk start).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Seeded generator with hand-rolled draw functions so that streams do not depend on
// the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(mix64(seed)) {}

    std::uint64_t next() { return eng_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; each call consumes two uniforms.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n).
    std::size_t index(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r = eng_();
        while (r >= limit) r = eng_();
        return static_cast<std::size_t>(r % bound);
    }

    // Samples an index proportionally to the given nonnegative weights.
    std::size_t weighted_index(std::span<const double> cumulative) {
        const double total = cumulative.back();
        const double u = uniform() * total;
        std::size_t lo = 0, hi = cumulative.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cumulative[mid] <= u)
                lo = mid + 1;
            else
                hi = mid;
        }
        return lo;
    }

  private:
    std::mt19937_64 eng_;
};

inline std::vector<double> cumulative_sum(std::span<const double> w) {
    std::vector<double> cum(w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        cum[i] = acc;
    }
    return cum;
}

}  // namespace perfest
