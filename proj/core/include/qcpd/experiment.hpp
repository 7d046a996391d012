#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcpd/autoencoder.hpp"
#include "qcpd/detect.hpp"
#include "qcpd/eval.hpp"
#include "qcpd/synth.hpp"

namespace qcpd {

// Declarative description of one end-to-end run: generate training and test
// data, train the autoencoder once, calibrate one profile per statistic, run
// online detection over every test sequence and aggregate the metrics.
//
// Seeding: training sequence i uses derive_seed(seed, 1000000 + i); the
// trainer, window subsampling and profile subsampling use streams 1..3 of the
// master seed. Test sequences use the literal seeds test_seed_start ..
// test_seed_start + n_test_abnormal + n_test_normal - 1, abnormal first.
struct ExperimentConfig {
    std::string name = "experiment";
    std::string dataset = "ar";  // ar | ar_var | chen
    ArConfig ar;
    ChenConfig chen;

    int n_train = 100;
    int n_test_abnormal = 50;
    int n_test_normal = 50;
    uint64_t test_seed_start = 1;

    int window = 50;
    TrainConfig train;
    size_t max_train_windows = 131072;
    bool grid_search = false;
    double holdout_fraction = 0.1;  // trailing share of training sequences
                                    // replayed for threshold calibration

    std::vector<Statistic> statistics{Statistic::mean};
    double alpha = 0.05;
    double warmup_seconds = 2.0;
    std::vector<double> delay_alphas{0.5, 0.9, 0.95};

    uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

struct StatisticResult {
    Statistic statistic = Statistic::mean;
    MetricsReport metrics;
    double auroc = 0.0;
    double best_f1 = 0.0;
    double best_f1_threshold = 0.0;
    double delta_thr = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    TrainReport train_report;
    double bandwidth = 0.0;
    std::vector<StatisticResult> per_statistic;
    std::vector<RunRecord> runs;  // sorted by dataset_id; one per (run, statistic)
};

// Trained model plus calibrated profiles, reusable across test batches.
struct FittedPipeline {
    ModelBundle bundle;
    TrainReport train_report;
    std::vector<DetectorProfile> profiles;  // parallel to config.statistics
};

EntityTensor generate_dataset(const ExperimentConfig& cfg, uint64_t seed, bool with_change);

FittedPipeline fit_pipeline(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Re-evaluates a fitted pipeline on freshly generated test data.
ExperimentResult evaluate_pipeline(const ExperimentConfig& cfg, const FittedPipeline& fitted);

// Window-size sweep: retrains per (window, repeat) on repeat-seeded data and
// reports detection delays per statistic. Uses abnormal runs only.
struct SweepConfig {
    ExperimentConfig base;
    std::vector<int> windows{5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    int repeats = 5;
    int runs_per_repeat = 3;
};

std::vector<SweepCell> run_window_sweep(const SweepConfig& cfg);

ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
nlohmann::json experiment_result_to_json(const ExperimentResult& result);
nlohmann::json metrics_report_to_json(const MetricsReport& report);
nlohmann::json sweep_table_to_json(const std::vector<SweepCell>& table);

}  // namespace qcpd
