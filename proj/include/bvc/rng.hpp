#pragma once

#include <cstdint>

namespace bvc {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Stream ids keep independent sampling tasks off each other's counters.
namespace streams {
inline constexpr std::uint64_t kTails = 1;
inline constexpr std::uint64_t kRoots = 2;
inline constexpr std::uint64_t kConcat = 3;
inline constexpr std::uint64_t kChains = 4;
inline constexpr std::uint64_t kSynthetic = 5;
} // namespace streams

// Counter-based generator: every draw is a pure function of
// (seed, stream, index, slot). Sampling loops can therefore be split across
// any number of workers and still produce bit-identical results.
struct CounterRng {
    std::uint64_t seed = 0;

    std::uint64_t bits(std::uint64_t stream, std::uint64_t index, std::uint64_t slot = 0) const {
        std::uint64_t z = splitmix64(seed ^ (stream * 0xA24BAED4963EE407ull));
        z = splitmix64(z ^ (index * 0x9FB21C651E98DF25ull));
        return splitmix64(z ^ slot);
    }

    // uniform in [0, 1), 53 bits
    double uniform(std::uint64_t stream, std::uint64_t index, std::uint64_t slot = 0) const {
        return static_cast<double>(bits(stream, index, slot) >> 11) * 0x1.0p-53;
    }

    double uniform_in(double lo, double hi, std::uint64_t stream, std::uint64_t index,
                      std::uint64_t slot = 0) const {
        return lo + (hi - lo) * uniform(stream, index, slot);
    }

    // integer in [0, n), n >= 1
    std::uint64_t below(std::uint64_t n, std::uint64_t stream, std::uint64_t index,
                        std::uint64_t slot = 0) const {
        return bits(stream, index, slot) % n;
    }
};

} // namespace bvc
