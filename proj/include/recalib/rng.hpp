#pragma once

#include <cstdint>
#include <random>

namespace recalib {

/// One splitmix64 step; used to turn (seed, stream) pairs into well-mixed
/// engine seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic random stream. Substream b of a master seed is derived via
/// splitmix64, so replicate b sees the same draws no matter which thread
/// runs it or in what order. Variate generation is implemented here rather
/// than with std::*_distribution, whose output is not pinned by the
/// standard; this keeps (config, seed) -> data bitwise reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        engine_.seed(splitmix64(s));
    }

    static Rng substream(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (0xA0761D6478BD642Full * (stream + 1));
        return Rng(splitmix64(s));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Unbiased uniform draw from {0, ..., n-1} (Lemire's method).
    std::size_t uniform_index(std::size_t n) {
        const auto bound = static_cast<std::uint64_t>(n);
        unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(engine_()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

    static constexpr const char* algorithm = "mt19937_64/splitmix64-substreams";

  private:
    std::mt19937_64 engine_;
};

}  // namespace recalib
