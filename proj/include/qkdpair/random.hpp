#pragma once

#include <cstdint>
#include <random>

namespace qkd {

// Independent random streams used by one protocol run. Each party owns its
// own stream so that a party running in a separate process draws exactly the
// same values as it would in-process.
enum class Stream : std::uint64_t {
    Alice = 1,
    Bob = 2,
    Channel = 3,       // Eve, noise and Born-rule outcomes (everything in flight)
    AliceSample = 4,   // verification sample selection
};

// SplitMix64 finaliser. Used only to derive seeds, never as the generator.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Seed-splitting rule: seed(master, stream, index) =
//   mix64(mix64(mix64(master) ^ stream) ^ index).
// Round r of party P draws from seed(master, P, r).
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index) noexcept {
    return mix64(mix64(mix64(master) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

/// Seeded pseudo-random source backed by std::mt19937_64.
///
/// The engine's output sequence is fixed by the C++ standard; the conversions
/// to reals, bits and bounded integers are done here rather than through
/// <random> distributions, whose algorithms are implementation-defined.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    static RandomSource for_stream(std::uint64_t master, Stream stream,
                                   std::uint64_t index = 0) {
        return RandomSource(derive_seed(master, stream, index));
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform bit from the top of the word.
    std::uint8_t bit() { return static_cast<std::uint8_t>(engine_() >> 63); }

    // Uniform integer in [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

inline std::uint64_t RandomSource::below(std::uint64_t bound) {
    // Largest multiple of bound that fits; values above it are rejected.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
    for (;;) {
        const std::uint64_t x = engine_();
        if (x <= limit) return x % bound;
    }
}

}  // namespace qkd
