#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace imlmc {

/// Identifies one replication's random stream. Distinct
/// (master_seed, replication_index) pairs map to statistically independent
/// streams via seed hashing, so replications can run in any order on any
/// number of workers and still reproduce bit-identical results.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t replication_index = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Order-sensitive 64-bit hash combine with a splitmix finalizer.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9E3779B97F4A7C15ull;
    x ^= b + 0x9E3779B97F4A7C15ull + (x << 12) + (x >> 4);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stream domains. Consumers that need several independent sources from one
// SeedSpec (e.g. a Brownian driver plus an auxiliary noise) pull them from
// disjoint domains.
inline constexpr std::uint64_t kStreamPath = 0xB001;       // Euler-scheme Brownian increments
inline constexpr std::uint64_t kStreamLimitW = 0xB002;     // limit process driver W
inline constexpr std::uint64_t kStreamLimitB = 0xB003;     // limit process driver B (independent of W)
inline constexpr std::uint64_t kStreamBridge = 0xB004;     // conditional bridge draws in statistics checks
inline constexpr std::uint64_t kStreamReference = 0xB005;  // synthetic reference samples

/// xoshiro256++ with Box-Muller normals. Self-contained so streams are
/// bit-reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = detail::splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    /// Uniform in (0, 1]; never 0 so log() is safe.
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * std::numbers::pi * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double stddev) { return stddev * normal(); }

private:
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline Rng make_stream(const SeedSpec& seed, std::uint64_t domain) {
    return Rng(mix_seed(mix_seed(seed.master_seed, domain), seed.replication_index));
}

/// Derives a child master seed, e.g. one per MLMC level or ensemble run.
inline std::uint64_t derive_master(std::uint64_t master, std::uint64_t tag) {
    return mix_seed(master, tag);
}

}  // namespace imlmc
