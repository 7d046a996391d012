#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "qcpd/aggregate.hpp"
#include "qcpd/autoencoder.hpp"
#include "qcpd/tensor.hpp"

namespace qcpd {

enum class Statistic { mean, variance, wasserstein };

std::string statistic_name(Statistic s);
Statistic statistic_from_name(const std::string& name);

// Training references plus the calibrated density threshold.
struct DetectorProfile {
    Statistic statistic = Statistic::mean;
    double mu_train = 0.0;      // pooled mean of training IDfN
    double sigma2_train = 0.0;  // pooled population variance of training IDfN
    Kde1d train_kde{{0.0}, 1.0};  // reference IDfN density
    double bandwidth = 0.0;     // shared KDE bandwidth h
    double delta_thr = 0.0;     // density threshold
    double warmup_seconds = 2.0;
    double alpha = 0.05;
    double dt = 1.0;

    int warmup_ticks() const;
};

struct ProfileOptions {
    Statistic statistic = Statistic::mean;
    double alpha = 0.05;
    double warmup_seconds = 2.0;
    int bandwidth_folds = 5;
    // Cost caps: cross-validating the bandwidth is O(n^2) and every
    // Wasserstein tick pays O(|train centers|), so both run on seeded
    // subsamples of the pooled training scores.
    size_t max_bandwidth_samples = 2000;
    size_t max_kde_centers = 512;
    uint64_t subsample_seed = 0;
};

// Builds the references (pooled mean/variance/KDE + cross-validated
// bandwidth) from the held-out training IDfN series, then replays each series
// through the deviation -> CUSUM -> density pipeline and sets delta_thr to
// the alpha-quantile of the post-warmup density values (alpha = 0 means the
// observed minimum).
DetectorProfile build_profile(std::span<const IdfnSeries> train, const ProfileOptions& opts);
DetectorProfile build_profile(const IdfnSeries& train_idfn, Statistic statistic,
                              double alpha_quantile, double dt);

// Deviation of one tick's active-entity IDfN row from the training reference.
double deviation(Statistic statistic, std::span<const double> idfn_row,
                 const DetectorProfile& profile);

// Sequential detector state (single mutator; one instance per stream).
struct DetectorState {
    int t = 0;           // ticks consumed
    double cusum = 0.0;  // C_t
    std::vector<double> log_history;  // log(1 + C_i) for i = 1..t
    std::optional<int> fired;         // latched t-hat
};

// C_t = C_{t-1} + f_t; rejects negative or non-finite deviations.
void cusum_step(DetectorState& state, double f_t);

// Log-transform, Silverman-bandwidth KDE over the history, density threshold
// test. Must follow cusum_step on the same tick. Returns the density of the
// current transformed value (0 while the history is empty) and latches
// state.fired on the first post-warmup tick with density < delta_thr.
double threshold_step(DetectorState& state, const DetectorProfile& profile);

// Batch pipeline over precomputed IDfN scores: deviation, CUSUM and
// thresholding tick by tick. Equals the streaming run exactly.
DetectionOutcome run_offline(const IdfnSeries& idfn, const DetectorProfile& profile);

// Online run over a stream of F x P observation ticks: scores IDfN per
// entity with a causal window buffer, then aggregates and tests each tick.
DetectionOutcome run_online(const DenseAutoencoder& model, const NormStats& stats,
                            const DetectorProfile& profile,
                            std::span<const Eigen::MatrixXd> ticks, int w);
// Convenience replay of a recorded tensor.
DetectionOutcome run_online(const ModelBundle& bundle, const DetectorProfile& profile,
                            const EntityTensor& tensor);

void save_profile(const DetectorProfile& profile, const std::filesystem::path& path);
DetectorProfile load_profile(const std::filesystem::path& path);

}  // namespace qcpd
