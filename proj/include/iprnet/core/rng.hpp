#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace iprnet {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Deterministic random source. All distributions are implemented by hand on
/// top of mt19937_64 so that streams are reproducible across standard library
/// implementations (std::*_distribution makes no such guarantee).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n). Rejection sampling, bias-free.
    std::uint64_t uniform_u64(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        uniform_u64(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Uniform real in [0, 1) with 53-bit resolution.
    double uniform_real() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * uniform_real();
    }

    /// Standard normal via Box-Muller (cached second value).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform_real();
        double u2 = uniform_real();
        while (u1 <= 0.0) u1 = uniform_real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Choose k distinct indices from [0, n) by partial Fisher-Yates.
    std::vector<int> sample_indices(int n, int k) {
        std::vector<int> pool(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            const int j = i + static_cast<int>(uniform_u64(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            out.push_back(pool[static_cast<std::size_t>(i)]);
        }
        return out;
    }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(uniform_u64(items.size()))];
    }

    /// Derive an independent stream. Streams with distinct ids never collide
    /// for a fixed parent seed.
    Rng split(std::uint64_t stream_id) const {
        std::uint64_t s = seed_ ^ (0xa5a5a5a5a5a5a5a5ULL + stream_id * 0x9e3779b97f4a7c15ULL);
        return Rng(detail::splitmix64(s));
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace iprnet
