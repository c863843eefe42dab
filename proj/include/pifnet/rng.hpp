#pragma once

#include <array>
#include <cstdint>

namespace pifnet {

// Deterministic generator: xoshiro256++ seeded through splitmix64.
// The algorithm is fixed here rather than delegated to <random> engines so
// that a given seed yields the same draw sequence on every platform and
// standard library. Uniform doubles are built from the top 53 bits of the
// raw output; normal draws use Box-Muller on those uniforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_below(std::uint64_t n);

    // Standard normal draw (Box-Muller, one value per pair of uniforms).
    double normal();

    // Independent substream; draws from the child do not advance this
    // generator. Used to keep e.g. noise and jitter streams separate.
    Rng child(std::uint64_t stream) const;

private:
    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace pifnet
