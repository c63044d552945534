#pragma once

#include <cmath>
#include <cstdint>

namespace rbrnet {

// Counter-based deterministic RNG. Every draw is a pure function of
// (seed, stream, counter), so parallel workers can sample independent
// elements without shared state and results never depend on execution order.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Mix two 64-bit values into a derived seed (for per-epoch / per-sample streams).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return detail::splitmix64(a ^ detail::splitmix64(b + 0x165667b19e3779f9ULL));
}

inline std::uint64_t rng_u64(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return detail::splitmix64(detail::splitmix64(seed ^ detail::splitmix64(stream)) + counter);
}

/// Uniform double in [0, 1), 53-bit resolution.
inline double rng_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return static_cast<double>(rng_u64(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi] (closed; hi is reached when the raw draw is 0).
inline double rng_uniform_range(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                                double lo, double hi) {
    const double u = rng_uniform(seed, stream, counter);
    return lo + (hi - lo) * (1.0 - u);
}

/// Standard normal via Box-Muller on counters (2*counter, 2*counter+1).
inline double rng_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const double u1 = 1.0 - rng_uniform(seed, stream, 2 * counter);      // (0, 1]
    const double u2 = rng_uniform(seed, stream, 2 * counter + 1);        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t rng_below(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                               std::uint64_t n) {
    // Multiply-shift bounded draw; bias is ~n / 2^64 and irrelevant here.
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(rng_u64(seed, stream, counter)) * n;
    return static_cast<std::uint64_t>(wide >> 64);
}

}  // namespace rbrnet
