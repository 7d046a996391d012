#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qcpd/tensor.hpp"

namespace qcpd {

// Second-order autoregressive generator with a switch in the noise
// distribution at change_index. A normal (change-free) sequence uses
// change_index = nullopt; the "before" noise then runs for the whole length.
struct ArConfig {
    int n_entities = 10;
    int length = 300;
    std::optional<int> change_index = 150;  // t*, 1-based; nullopt = no change
    double phi1 = 0.6;
    double phi2 = -0.5;
    double noise_mean_before = 0.0;
    double noise_mean_after = 0.0;
    double noise_std_before = 0.5;
    double noise_std_after = 0.5;
    uint64_t seed = 0;

    void validate() const;

    // Mean jump 0 -> 2 with sigma fixed at 0.5.
    static ArConfig paper_mean_shift(uint64_t seed);
    // Variance jump: sigma 0.1 -> 0.3 with zero mean.
    static ArConfig paper_variance_shift(uint64_t seed);
};

// y_{1,p} = y_{2,p} = 0; y_{t,p} = phi1*y_{t-1,p} + phi2*y_{t-2,p} + eps_t,
// eps_t drawn per entity from the before-noise for t < t* and the after-noise
// for t >= t*. One RNG substream per entity, so entity trajectories do not
// depend on P. Output: F = 1, dt = 1 s, annotation = t* when present.
EntityTensor generate_ar(const ArConfig& cfg);

// Same recurrence with zero noise mean throughout (rejects configs with
// nonzero means); the change switches only the noise standard deviation.
EntityTensor generate_ar_variance(const ArConfig& cfg);

// Network of identical Chen oscillators coupled through one damped
// environmental variable. The abnormal variant decouples the network and
// shifts c at t_change_seconds; the normal variant (t_change_seconds =
// nullopt) keeps phase-1 dynamics throughout.
struct ChenConfig {
    int n_oscillators = 4;
    double a = 35.0;
    double b = 2.8;
    double c_phase1 = 24.0;
    double c_phase2 = 27.0;
    double eps1_phase1 = 0.5;  // oscillators -> environment; 0 in phase 2
    double eps2_phase1 = 0.9;  // environment -> oscillators; 0 in phase 2
    double lambda_env = 1.0;
    double dt = 0.01;
    std::optional<double> t_change_seconds = 10.0;
    double t_end_seconds = 20.0;
    int transient_discard_steps = 100;  // tau
    uint64_t seed = 0;
    // Tight enough that halving them moves the sampled trajectory by less
    // than 1e-4 in max-norm over the first five emitted seconds.
    double rtol = 1e-10;
    double atol = 1e-13;
    // Fixed (x, y, z) starts instead of the seeded Uniform[-1, 1] draws.
    std::optional<std::vector<std::array<double, 3>>> initial_states;

    void validate() const;

    static ChenConfig paper(uint64_t seed);
};

// Integrates the network with Dormand-Prince 5(4), samples states on the
// uniform dt grid, drops the first tau samples, and emits F = 3 channels
// (x, y, z) per oscillator; the environment variable is not emitted.
// Annotation: t* = t_change_seconds/dt - tau.
EntityTensor generate_chen(const ChenConfig& cfg);

}  // namespace qcpd
