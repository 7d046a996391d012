#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qcpd {

// One detection run: ground truth plus the detector's stopping index.
struct RunRecord {
    std::string dataset_id;
    bool has_true_change = false;
    std::optional<int> true_change_index;  // t*, required when has_true_change
    std::optional<int> detected_index;     // t-hat, absent when never fired
    double dt = 1.0;
};

enum class RunClass { TP, FN, FP, TN };

// Change present: t-hat >= t* is a correct (true positive) detection, firing
// early is a false positive and never firing is a false negative. Change
// absent: any firing is a false positive, silence a true negative.
RunClass classify(const RunRecord& run);

struct MetricsReport {
    double cd = 0.0;  // TP / N_a
    double md = 0.0;  // FN / N_a
    double fa = 0.0;  // FP / (N_a + N_n)
    long n_change = 0, n_normal = 0;
    long tp = 0, fn = 0, fp = 0, tn = 0;

    std::vector<double> delays_seconds;  // (t-hat - t*) * dt over TP runs
    // Cumulative delay distribution on the dt-resolution grid from the
    // smallest to the largest observed delay.
    std::vector<std::pair<double, double>> delay_cdf;
    std::map<double, double> d_alpha;  // requested confidence levels
    std::optional<double> mean_delay_seconds;
    std::optional<double> median_delay_seconds;
};

// Rates, delays, the delay CDF and its alpha-quantiles. Runs must share dt
// when any delay exists; N_a = 0 is an error.
MetricsReport metrics(std::span<const RunRecord> runs, std::span<const double> alphas);

// Area under the ROC curve by the midrank (Mann-Whitney) convention.
// labels are 0/1; both classes must be present.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct BestF1 {
    double f1 = 0.0;
    double threshold = 0.0;  // predict positive when score >= threshold
};

// Maximum F1 over all distinct score thresholds (exhaustive scan).
BestF1 best_f1(std::span<const double> scores, std::span<const int> labels);

// ROC curve points (false-positive rate, true-positive rate) swept from the
// highest threshold down, starting at (0, 0); tie groups collapse to one point.
std::vector<std::pair<double, double>> roc_points(std::span<const double> scores,
                                                  std::span<const int> labels);

struct SweepCell {
    int window = 0;
    std::string statistic;
    double mean_delay_seconds = 0.0;
    double std_delay_seconds = 0.0;
    int n_delays = 0;
};

// Delays per statistic for one (window, repeat) configuration.
using SweepRunFn =
    std::function<std::map<std::string, std::vector<double>>(int window, int repeat)>;

// Runs fn for every window length and repeat, pooling delays per statistic;
// reports mean and sample standard deviation per (window, statistic), rows
// ordered by window then statistic name.
std::vector<SweepCell> window_sweep(std::span<const int> w_values, int repeats,
                                    const SweepRunFn& fn);

}  // namespace qcpd
