#include "qcpd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <thread>

#include "qcpd/error.hpp"
#include "qcpd/preprocess.hpp"
#include "qcpd/rng.hpp"
#include "qcpd/score.hpp"

namespace qcpd {

using nlohmann::json;

void ExperimentConfig::validate() const {
    if (dataset != "ar" && dataset != "ar_var" && dataset != "chen")
        throw ValidationError("ExperimentConfig: dataset must be ar, ar_var or chen");
    if (n_train < 2) throw ValidationError("ExperimentConfig: n_train must be >= 2");
    if (n_test_abnormal < 0 || n_test_normal < 0 || n_test_abnormal + n_test_normal < 1)
        throw ValidationError("ExperimentConfig: need at least one test sequence");
    if (window < 1) throw ValidationError("ExperimentConfig: window must be >= 1");
    if (!(holdout_fraction > 0.0) || !(holdout_fraction < 1.0))
        throw ValidationError("ExperimentConfig: holdout_fraction must be in (0, 1)");
    if (statistics.empty()) throw ValidationError("ExperimentConfig: no statistics selected");
    if (jobs < 1) throw ValidationError("ExperimentConfig: jobs must be >= 1");
    train.validate();
}

EntityTensor generate_dataset(const ExperimentConfig& cfg, uint64_t seed, bool with_change) {
    if (cfg.dataset == "chen") {
        ChenConfig c = cfg.chen;
        c.seed = seed;
        if (!with_change) c.t_change_seconds.reset();
        return generate_chen(c);
    }
    ArConfig a = cfg.ar;
    a.seed = seed;
    if (!with_change) {
        // Normal variant: before-noise throughout, no annotation.
        a.change_index.reset();
        a.noise_mean_after = a.noise_mean_before;
        a.noise_std_after = a.noise_std_before;
    }
    return cfg.dataset == "ar_var" ? generate_ar_variance(a) : generate_ar(a);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; exceptions propagate.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const int n_threads = std::min(jobs, n);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

FittedPipeline fit_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();

    std::vector<EntityTensor> train_raw;
    train_raw.reserve(cfg.n_train);
    for (int i = 0; i < cfg.n_train; ++i)
        train_raw.push_back(generate_dataset(cfg, derive_seed(cfg.seed, 1000000 + i), false));

    const NormStats stats = fit_norm_pooled(train_raw);

    // Trailing holdout_fraction of sequences calibrate the threshold; the
    // rest feed the autoencoder.
    const int n_holdout = std::clamp<int>(
        static_cast<int>(std::llround(cfg.holdout_fraction * cfg.n_train)), 1, cfg.n_train - 1);
    const int n_fit = cfg.n_train - n_holdout;

    const int F = train_raw[0].sensors();
    const int d = F * cfg.window;

    // Enumerate candidate windows, subsample to the training budget, then
    // materialize only the chosen ones.
    struct WindowRef {
        int seq, p, t;
    };
    std::vector<WindowRef> refs;
    for (int i = 0; i < n_fit; ++i) {
        const auto& tensor = train_raw[i];
        for (int p = 1; p <= tensor.entities(); ++p)
            for (int t = 1; t <= tensor.ticks(); ++t) refs.push_back({i, p, t});
    }
    if (refs.size() > cfg.max_train_windows) {
        Rng rng(derive_seed(cfg.seed, 2));
        for (size_t i = refs.size() - 1; i > 0; --i)
            std::swap(refs[i], refs[rng.below(i + 1)]);
        refs.resize(cfg.max_train_windows);
    }

    Eigen::MatrixXd windows(d, static_cast<Eigen::Index>(refs.size()));
    for (size_t i = 0; i < refs.size(); ++i) {
        Eigen::MatrixXd win = make_window(train_raw[refs[i].seq], refs[i].t, refs[i].p,
                                          cfg.window)
                                  .values;
        for (int s = 0; s < F; ++s)
            win.row(s) = (win.row(s).array() - stats.mu[s]) / stats.sigma[s];
        windows.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXd>(win.data(), win.size());
    }

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 1);
    TrainResult trained = cfg.grid_search
                              ? train_grid_search(windows, tc)
                              : train_autoencoder(
                                    DenseAutoencoder({d, 128, 32, 128, d}, tc.dropout, tc.seed),
                                    windows, tc);

    FittedPipeline fitted{ModelBundle{std::move(trained.model), stats, cfg.window},
                          std::move(trained.report),
                          {}};

    std::vector<IdfnSeries> holdout_scores;
    holdout_scores.reserve(n_holdout);
    for (int i = n_fit; i < cfg.n_train; ++i)
        holdout_scores.push_back(
            idfn_series(fitted.bundle.model, train_raw[i], stats, cfg.window));

    for (const Statistic stat : cfg.statistics) {
        ProfileOptions opts;
        opts.statistic = stat;
        opts.alpha = cfg.alpha;
        opts.warmup_seconds = cfg.warmup_seconds;
        opts.subsample_seed = derive_seed(cfg.seed, 3);
        fitted.profiles.push_back(build_profile(holdout_scores, opts));
    }
    return fitted;
}

ExperimentResult evaluate_pipeline(const ExperimentConfig& cfg, const FittedPipeline& fitted) {
    cfg.validate();
    if (fitted.profiles.size() != cfg.statistics.size())
        throw ValidationError("evaluate_pipeline: profile/statistic count mismatch");

    const int n_runs = cfg.n_test_abnormal + cfg.n_test_normal;
    const size_t n_stats = cfg.statistics.size();

    struct RunEval {
        std::vector<RunRecord> records;          // per statistic
        std::vector<std::vector<double>> devs;   // per statistic, per tick
        std::vector<int> labels;                 // per tick
    };
    std::vector<RunEval> evals(n_runs);

    parallel_for(n_runs, cfg.jobs, [&](int i) {
        const bool abnormal = i < cfg.n_test_abnormal;
        const uint64_t run_seed = cfg.test_seed_start + static_cast<uint64_t>(i);
        const EntityTensor tensor = generate_dataset(cfg, run_seed, abnormal);

        char id[32];
        std::snprintf(id, sizeof(id), "%s-%04d", abnormal ? "abn" : "nrm", i + 1);

        RunEval& ev = evals[i];
        ev.records.resize(n_stats);
        ev.devs.resize(n_stats);
        ev.labels.reserve(tensor.ticks());
        const int t_star = abnormal ? tensor.annotation()->true_change_index : 0;
        for (int t = 1; t <= tensor.ticks(); ++t)
            ev.labels.push_back(abnormal && t >= t_star ? 1 : 0);

        for (size_t s = 0; s < n_stats; ++s) {
            const DetectionOutcome outcome =
                run_online(fitted.bundle, fitted.profiles[s], tensor);
            RunRecord rec;
            rec.dataset_id = id;
            rec.has_true_change = abnormal;
            if (abnormal) rec.true_change_index = t_star;
            rec.detected_index = outcome.stop_index;
            rec.dt = tensor.dt();
            ev.records[s] = std::move(rec);

            // Deviation trace recovered from the cumulative sum.
            auto& devs = ev.devs[s];
            devs.reserve(outcome.cusum.ticks());
            double prev = 0.0;
            for (double c : outcome.cusum.values) {
                devs.push_back(c - prev);
                prev = c;
            }
        }
    });

    ExperimentResult result;
    result.config = cfg;
    result.train_report = fitted.train_report;
    result.bandwidth = fitted.profiles.empty() ? 0.0 : fitted.profiles[0].bandwidth;

    for (size_t s = 0; s < n_stats; ++s) {
        std::vector<RunRecord> records;
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& ev : evals) {
            records.push_back(ev.records[s]);
            scores.insert(scores.end(), ev.devs[s].begin(), ev.devs[s].end());
            labels.insert(labels.end(), ev.labels.begin(), ev.labels.end());
        }
        std::sort(records.begin(), records.end(),
                  [](const RunRecord& a, const RunRecord& b) { return a.dataset_id < b.dataset_id; });

        StatisticResult sr;
        sr.statistic = cfg.statistics[s];
        sr.delta_thr = fitted.profiles[s].delta_thr;
        sr.metrics = metrics(records, cfg.delay_alphas);
        const bool both_classes =
            std::count(labels.begin(), labels.end(), 1) > 0 &&
            std::count(labels.begin(), labels.end(), 0) > 0;
        if (both_classes) {
            sr.auroc = auroc(scores, labels);
            const BestF1 bf = best_f1(scores, labels);
            sr.best_f1 = bf.f1;
            sr.best_f1_threshold = bf.threshold;
        }
        result.per_statistic.push_back(std::move(sr));
        result.runs.insert(result.runs.end(), records.begin(), records.end());
    }
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    return evaluate_pipeline(cfg, fit_pipeline(cfg));
}

std::vector<SweepCell> run_window_sweep(const SweepConfig& cfg) {
    const SweepRunFn fn = [&](int window, int repeat) {
        ExperimentConfig run_cfg = cfg.base;
        run_cfg.window = window;
        run_cfg.seed = derive_seed(cfg.base.seed, 7000000 + static_cast<uint64_t>(repeat));
        run_cfg.n_test_abnormal = cfg.runs_per_repeat;
        run_cfg.n_test_normal = 0;
        run_cfg.test_seed_start =
            derive_seed(run_cfg.seed, 42) | 1;  // fresh test data each repeat
        run_cfg.statistics = {Statistic::mean, Statistic::variance, Statistic::wasserstein};

        const ExperimentResult result = run_experiment(run_cfg);
        std::map<std::string, std::vector<double>> delays;
        for (const auto& sr : result.per_statistic)
            delays[statistic_name(sr.statistic)] = sr.metrics.delays_seconds;
        return delays;
    };
    return window_sweep(cfg.windows, cfg.repeats, fn);
}

// ---------------------------------------------------------------------------
// JSON bindings
// ---------------------------------------------------------------------------

namespace {

ArConfig ar_from_json(const json& j) {
    ArConfig cfg;
    cfg.n_entities = j.value("n_entities", cfg.n_entities);
    cfg.length = j.value("length", cfg.length);
    if (j.contains("change_index")) {
        if (j["change_index"].is_null())
            cfg.change_index.reset();
        else
            cfg.change_index = j["change_index"].get<int>();
    }
    cfg.phi1 = j.value("phi1", cfg.phi1);
    cfg.phi2 = j.value("phi2", cfg.phi2);
    cfg.noise_mean_before = j.value("noise_mean_before", cfg.noise_mean_before);
    cfg.noise_mean_after = j.value("noise_mean_after", cfg.noise_mean_after);
    cfg.noise_std_before = j.value("noise_std_before", cfg.noise_std_before);
    cfg.noise_std_after = j.value("noise_std_after", cfg.noise_std_after);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

ChenConfig chen_from_json(const json& j) {
    ChenConfig cfg;
    cfg.n_oscillators = j.value("n_oscillators", cfg.n_oscillators);
    cfg.a = j.value("a", cfg.a);
    cfg.b = j.value("b", cfg.b);
    cfg.c_phase1 = j.value("c_phase1", cfg.c_phase1);
    cfg.c_phase2 = j.value("c_phase2", cfg.c_phase2);
    cfg.eps1_phase1 = j.value("eps1_phase1", cfg.eps1_phase1);
    cfg.eps2_phase1 = j.value("eps2_phase1", cfg.eps2_phase1);
    cfg.lambda_env = j.value("lambda_env", cfg.lambda_env);
    cfg.dt = j.value("dt", cfg.dt);
    if (j.contains("t_change_seconds")) {
        if (j["t_change_seconds"].is_null())
            cfg.t_change_seconds.reset();
        else
            cfg.t_change_seconds = j["t_change_seconds"].get<double>();
    }
    cfg.t_end_seconds = j.value("t_end_seconds", cfg.t_end_seconds);
    cfg.transient_discard_steps = j.value("transient_discard_steps", cfg.transient_discard_steps);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.rtol = j.value("rtol", cfg.rtol);
    cfg.atol = j.value("atol", cfg.atol);
    return cfg;
}

TrainConfig train_from_json(const json& j) {
    TrainConfig cfg;
    cfg.lr_init = j.value("lr_init", cfg.lr_init);
    cfg.lr_floor = j.value("lr_floor", cfg.lr_floor);
    cfg.lr_factor = j.value("lr_factor", cfg.lr_factor);
    cfg.plateau_patience = j.value("plateau_patience", cfg.plateau_patience);
    cfg.early_stop_patience = j.value("early_stop_patience", cfg.early_stop_patience);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    return cfg;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& doc) {
    ExperimentConfig cfg;
    cfg.name = doc.value("name", cfg.name);
    cfg.dataset = doc.value("dataset", cfg.dataset);
    if (doc.contains("ar")) cfg.ar = ar_from_json(doc["ar"]);
    if (doc.contains("chen")) cfg.chen = chen_from_json(doc["chen"]);
    cfg.n_train = doc.value("n_train", cfg.n_train);
    cfg.n_test_abnormal = doc.value("n_test_abnormal", cfg.n_test_abnormal);
    cfg.n_test_normal = doc.value("n_test_normal", cfg.n_test_normal);
    cfg.test_seed_start = doc.value("test_seed_start", cfg.test_seed_start);
    cfg.window = doc.value("window", cfg.window);
    if (doc.contains("train")) cfg.train = train_from_json(doc["train"]);
    cfg.max_train_windows = doc.value("max_train_windows", cfg.max_train_windows);
    cfg.grid_search = doc.value("grid_search", cfg.grid_search);
    cfg.holdout_fraction = doc.value("holdout_fraction", cfg.holdout_fraction);
    if (doc.contains("statistics")) {
        cfg.statistics.clear();
        for (const auto& s : doc["statistics"])
            cfg.statistics.push_back(statistic_from_name(s.get<std::string>()));
    }
    cfg.alpha = doc.value("alpha", cfg.alpha);
    cfg.warmup_seconds = doc.value("warmup_seconds", cfg.warmup_seconds);
    if (doc.contains("delay_alphas"))
        cfg.delay_alphas = doc["delay_alphas"].get<std::vector<double>>();
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.jobs = doc.value("jobs", cfg.jobs);
    return cfg;
}

namespace {

std::string format_alpha_key(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", alpha);
    return buf;
}

}  // namespace

json metrics_report_to_json(const MetricsReport& report) {
    json j;
    j["cd"] = report.cd;
    j["md"] = report.md;
    j["fa"] = report.fa;
    j["n_change"] = report.n_change;
    j["n_normal"] = report.n_normal;
    j["tp"] = report.tp;
    j["fn"] = report.fn;
    j["fp"] = report.fp;
    j["tn"] = report.tn;
    j["delays_seconds"] = report.delays_seconds;
    json cdf = json::array();
    for (const auto& [r, fd] : report.delay_cdf) cdf.push_back({{"r", r}, {"F", fd}});
    j["delay_cdf"] = std::move(cdf);
    json da = json::object();
    for (const auto& [a, d] : report.d_alpha) da[format_alpha_key(a)] = d;
    j["d_alpha"] = std::move(da);
    if (report.mean_delay_seconds) j["mean_delay_seconds"] = *report.mean_delay_seconds;
    if (report.median_delay_seconds) j["median_delay_seconds"] = *report.median_delay_seconds;
    return j;
}

json experiment_result_to_json(const ExperimentResult& result) {
    json j;
    j["name"] = result.config.name;
    j["dataset"] = result.config.dataset;
    j["seed"] = result.config.seed;
    j["window"] = result.config.window;
    j["alpha"] = result.config.alpha;
    j["bandwidth"] = result.bandwidth;
    j["train"] = {{"epochs_run", result.train_report.epochs_run},
                  {"best_epoch", result.train_report.best_epoch},
                  {"stopped_early", result.train_report.stopped_early},
                  {"final_lr", result.train_report.final_lr},
                  {"train_loss", result.train_report.train_loss},
                  {"val_loss", result.train_report.val_loss}};
    json stats = json::array();
    for (const auto& sr : result.per_statistic) {
        json s;
        s["statistic"] = statistic_name(sr.statistic);
        s["delta_thr"] = sr.delta_thr;
        s["metrics"] = metrics_report_to_json(sr.metrics);
        s["auroc"] = sr.auroc;
        s["best_f1"] = sr.best_f1;
        s["best_f1_threshold"] = sr.best_f1_threshold;
        stats.push_back(std::move(s));
    }
    j["per_statistic"] = std::move(stats);
    json runs = json::array();
    for (const auto& rec : result.runs) {
        json r;
        r["dataset_id"] = rec.dataset_id;
        r["has_true_change"] = rec.has_true_change;
        r["true_change_index"] =
            rec.true_change_index ? json(*rec.true_change_index) : json(nullptr);
        r["stop_index"] = rec.detected_index ? json(*rec.detected_index) : json(nullptr);
        r["dt"] = rec.dt;
        runs.push_back(std::move(r));
    }
    j["runs"] = std::move(runs);
    return j;
}

json sweep_table_to_json(const std::vector<SweepCell>& table) {
    json rows = json::array();
    for (const auto& cell : table) {
        json r;
        r["window"] = cell.window;
        r["statistic"] = cell.statistic;
        r["mean_delay_seconds"] = cell.mean_delay_seconds;
        r["std_delay_seconds"] = cell.std_delay_seconds;
        r["n_delays"] = cell.n_delays;
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace qcpd
