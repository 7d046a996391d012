#pragma once

#include <array>
#include <cstdint>

namespace qcpd {

// Deterministic 64-bit RNG used everywhere randomness is needed.
//
// The generator is xoshiro256++ seeded through SplitMix64, so results are
// identical across platforms and standard libraries (std::normal_distribution
// and friends are implementation-defined and deliberately avoided).
//
// Substream rule: a parent seed fans out to child streams with
// derive_seed(seed, k). Generators (one entity/oscillator per substream),
// training, splits and test runs each draw from their own derived stream,
// so per-entity output does not depend on how many entities exist.

uint64_t splitmix64_next(uint64_t& state);

// Substream k of a base seed. Defined as three SplitMix64 steps starting from
// base mixed with the golden-ratio multiple of (k+1).
uint64_t derive_seed(uint64_t base, uint64_t stream);

class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01();
    // Uniform on [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller (no internal cache; one value per call).
    double normal01();
    double normal(double mean, double stddev);
    // Uniform integer in [0, n).
    uint64_t below(uint64_t n);

    // Derived child stream, independent of draws made on this generator.
    Rng substream(uint64_t stream) const;

private:
    std::array<uint64_t, 4> state_;
    uint64_t seed_;
};

}  // namespace qcpd
