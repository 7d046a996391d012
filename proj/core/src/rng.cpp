#include "qcpd/rng.hpp"

#include <cmath>
#include <numbers>

namespace qcpd {

namespace {
constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}
}  // namespace

uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += kGolden);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t stream) {
    uint64_t s = base ^ (kGolden * (stream + 1));
    splitmix64_next(s);
    splitmix64_next(s);
    return splitmix64_next(s);
}

Rng::Rng(uint64_t seed) : seed_(seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64_next(s);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

double Rng::normal01() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double stddev) {
    return mean + stddev * normal01();
}

uint64_t Rng::below(uint64_t n) {
    // Rejection-free would bias for huge n; rejection keeps it exact.
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
        const uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

Rng Rng::substream(uint64_t stream) const {
    return Rng(derive_seed(seed_, stream));
}

}  // namespace qcpd
