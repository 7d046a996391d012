// qcpd: multi-entity change point detection over multivariate time series.
//
// Subcommands cover the full workflow: gen (synthetic datasets), ingest
// (position CSVs to acceleration features), train, score, profile, detect,
// eval, sweep and experiment. All randomness derives from --seed flags.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qcpd/error.hpp"
#include "qcpd/eval.hpp"
#include "qcpd/experiment.hpp"
#include "qcpd/ingest.hpp"
#include "qcpd/preprocess.hpp"
#include "qcpd/rng.hpp"
#include "qcpd/score.hpp"
#include "qcpd/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw qcpd::ValidationError("cannot open " + path.string());
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw qcpd::ValidationError(path.string() + ": bad JSON (" + e.what() + ")");
    }
    return doc;
}

void write_json_file(const json& doc, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw qcpd::ValidationError("cannot write " + path.string());
    f << doc.dump(2) << "\n";
}

// A data directory is either one dataset (contains meta.json) or a directory
// of datasets, scanned in name order.
std::vector<fs::path> dataset_dirs(const fs::path& root) {
    if (fs::exists(root / "meta.json")) return {root};
    std::vector<fs::path> dirs;
    if (fs::is_directory(root))
        for (const auto& entry : fs::directory_iterator(root))
            if (entry.is_directory() && fs::exists(entry.path() / "meta.json"))
                dirs.push_back(entry.path());
    if (dirs.empty())
        throw qcpd::ValidationError("no datasets under " + root.string() +
                                    " (expected meta.json)");
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

int default_jobs() {
    if (const char* env = std::getenv("QCPD_JOBS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const std::string& kind, const fs::path& config_path, const fs::path& out,
            uint64_t seed_override, bool has_seed_override) {
    const json cfg_json = config_path.empty() ? json::object() : load_json_file(config_path);
    json wrapper;
    if (kind == "chen") {
        wrapper["chen"] = cfg_json;
        wrapper["dataset"] = "chen";
    } else {
        wrapper["ar"] = cfg_json;
        wrapper["dataset"] = kind == "ar-var" ? "ar_var" : "ar";
    }
    qcpd::ExperimentConfig parsed = qcpd::experiment_config_from_json(wrapper);

    qcpd::EntityTensor tensor = [&] {
        if (kind == "chen") {
            if (has_seed_override) parsed.chen.seed = seed_override;
            return qcpd::generate_chen(parsed.chen);
        }
        if (has_seed_override) parsed.ar.seed = seed_override;
        if (kind == "ar-var") return qcpd::generate_ar_variance(parsed.ar);
        return qcpd::generate_ar(parsed.ar);
    }();

    qcpd::save_tensor(tensor, out);
    std::cout << "wrote " << out.string() << " (F=" << tensor.sensors()
              << " T=" << tensor.ticks() << " P=" << tensor.entities() << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const fs::path& positions, int sg_window, int sg_order, const fs::path& out) {
    const qcpd::EntityTensor raw = qcpd::load_tensor(positions);
    const qcpd::EntityTensor accel = qcpd::positions_to_accel(raw, sg_window, sg_order);
    qcpd::save_tensor(accel, out);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const fs::path& data, int window, const fs::path& out, bool grid_search,
              uint64_t seed, long max_windows) {
    std::vector<qcpd::EntityTensor> tensors;
    for (const auto& dir : dataset_dirs(data)) tensors.push_back(qcpd::load_tensor(dir));
    const qcpd::NormStats stats = qcpd::fit_norm_pooled(tensors);

    const int F = tensors[0].sensors();
    const int d = F * window;

    struct Ref {
        size_t seq;
        int p, t;
    };
    std::vector<Ref> refs;
    for (size_t i = 0; i < tensors.size(); ++i)
        for (int p = 1; p <= tensors[i].entities(); ++p)
            for (int t = 1; t <= tensors[i].ticks(); ++t)
                if (tensors[i].active(t, p)) refs.push_back({i, p, t});
    if (max_windows > 0 && refs.size() > static_cast<size_t>(max_windows)) {
        qcpd::Rng rng(qcpd::derive_seed(seed, 2));
        for (size_t i = refs.size() - 1; i > 0; --i)
            std::swap(refs[i], refs[rng.below(i + 1)]);
        refs.resize(max_windows);
    }
    if (refs.size() < 2) throw qcpd::ValidationError("train: not enough windows");

    Eigen::MatrixXd windows(d, static_cast<Eigen::Index>(refs.size()));
    for (size_t i = 0; i < refs.size(); ++i) {
        Eigen::MatrixXd win =
            qcpd::make_window(tensors[refs[i].seq], refs[i].t, refs[i].p, window).values;
        for (int s = 0; s < F; ++s)
            win.row(s) = (win.row(s).array() - stats.mu[s]) / stats.sigma[s];
        windows.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXd>(win.data(), win.size());
    }

    qcpd::TrainConfig tc;
    tc.seed = qcpd::derive_seed(seed, 1);
    qcpd::TrainResult result =
        grid_search ? qcpd::train_grid_search(windows, tc)
                    : qcpd::train_autoencoder(
                          qcpd::DenseAutoencoder({d, 128, 32, 128, d}, tc.dropout, tc.seed),
                          windows, tc);

    qcpd::save_model(qcpd::ModelBundle{std::move(result.model), stats, window}, out);
    std::cout << "trained on " << refs.size() << " windows, " << result.report.epochs_run
              << " epochs (best " << result.report.best_epoch
              << ", val loss " << result.report.val_loss[result.report.best_epoch - 1] << ")\n"
              << "wrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

int cmd_score(const fs::path& model_path, const fs::path& data, const fs::path& out) {
    const qcpd::ModelBundle bundle = qcpd::load_model(model_path);
    const qcpd::EntityTensor tensor = qcpd::load_tensor(data);
    const qcpd::IdfnSeries series =
        qcpd::idfn_series(bundle.model, tensor, bundle.stats, bundle.window);

    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw qcpd::ValidationError("cannot write " + out.string());
    f << "time,entity,idfn\n";
    for (int t = 1; t <= series.ticks(); ++t)
        for (int p = 1; p <= series.entities(); ++p)
            if (series.active(t, p))
                f << t << ',' << p << ',' << qcpd::format_double(series.at(t, p)) << "\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

int cmd_profile(const fs::path& model_path, const fs::path& data, const std::string& stat,
                double alpha, double warmup_seconds, uint64_t seed, const fs::path& out) {
    const qcpd::ModelBundle bundle = qcpd::load_model(model_path);
    std::vector<qcpd::IdfnSeries> series;
    for (const auto& dir : dataset_dirs(data)) {
        const qcpd::EntityTensor tensor = qcpd::load_tensor(dir);
        series.push_back(qcpd::idfn_series(bundle.model, tensor, bundle.stats, bundle.window));
    }
    qcpd::ProfileOptions opts;
    opts.statistic = qcpd::statistic_from_name(stat);
    opts.alpha = alpha;
    opts.warmup_seconds = warmup_seconds;
    opts.subsample_seed = seed;
    const qcpd::DetectorProfile profile = qcpd::build_profile(series, opts);
    qcpd::save_profile(profile, out);
    std::cout << "calibrated delta_thr = " << profile.delta_thr
              << " (bandwidth " << profile.bandwidth << ")\nwrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

int cmd_detect(const fs::path& model_path, const fs::path& profile_path, const fs::path& data,
               const std::string& stat, const fs::path& out) {
    const qcpd::ModelBundle bundle = qcpd::load_model(model_path);
    const qcpd::DetectorProfile profile = qcpd::load_profile(profile_path);
    if (!stat.empty() && qcpd::statistic_from_name(stat) != profile.statistic)
        throw qcpd::ValidationError("detect: profile was calibrated for statistic '" +
                                    qcpd::statistic_name(profile.statistic) + "'");
    const qcpd::EntityTensor tensor = qcpd::load_tensor(data);
    const qcpd::DetectionOutcome outcome = qcpd::run_online(bundle, profile, tensor);

    json doc;
    doc["format"] = "qcpd-outcome";
    doc["version"] = 1;
    doc["stop_index"] = outcome.stop_index ? json(*outcome.stop_index) : json(nullptr);
    doc["threshold"] = outcome.threshold;
    doc["warmup_samples"] = outcome.warmup_samples;
    doc["dt"] = tensor.dt();
    doc["statistic"] = qcpd::statistic_name(profile.statistic);
    doc["has_true_change"] = tensor.annotation().has_value();
    doc["true_change_index"] =
        tensor.annotation() ? json(tensor.annotation()->true_change_index) : json(nullptr);
    doc["cusum"] = outcome.cusum.values;
    doc["density"] = outcome.density_at_current.values;
    doc["config"] = {{"model", model_path.string()},
                     {"profile", profile_path.string()},
                     {"data", data.string()}};
    write_json_file(doc, out);
    if (outcome.stop_index)
        std::cout << "change detected at index " << *outcome.stop_index << " ("
                  << *outcome.stop_index * tensor.dt() << " s)\n";
    else
        std::cout << "no change detected\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const fs::path& runs_dir, const std::string& alpha_csv, const fs::path& out,
             const fs::path& emit_cdf, const fs::path& emit_roc) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(runs_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    if (files.empty())
        throw qcpd::ValidationError("eval: no outcome .json files under " + runs_dir.string());
    std::sort(files.begin(), files.end());

    std::vector<qcpd::RunRecord> records;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& file : files) {
        const json doc = load_json_file(file);
        if (!doc.contains("format") || doc["format"] != "qcpd-outcome")
            throw qcpd::ValidationError(file.string() + ": not a qcpd outcome file");
        qcpd::RunRecord rec;
        rec.dataset_id = file.stem().string();
        rec.has_true_change = doc["has_true_change"].get<bool>();
        if (!doc["true_change_index"].is_null())
            rec.true_change_index = doc["true_change_index"].get<int>();
        if (!doc["stop_index"].is_null()) rec.detected_index = doc["stop_index"].get<int>();
        rec.dt = doc["dt"].get<double>();
        records.push_back(rec);

        const auto cusum = doc["cusum"].get<std::vector<double>>();
        const int t_star = rec.has_true_change ? *rec.true_change_index : 0;
        double prev = 0.0;
        for (size_t i = 0; i < cusum.size(); ++i) {
            scores.push_back(cusum[i] - prev);
            prev = cusum[i];
            labels.push_back(rec.has_true_change && static_cast<int>(i) + 1 >= t_star ? 1 : 0);
        }
    }
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.dataset_id < b.dataset_id; });

    std::vector<double> alphas;
    {
        std::stringstream ss(alpha_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) alphas.push_back(std::stod(tok));
    }

    const qcpd::MetricsReport report = qcpd::metrics(records, alphas);
    json doc = qcpd::metrics_report_to_json(report);
    const bool both_classes = std::count(labels.begin(), labels.end(), 1) > 0 &&
                              std::count(labels.begin(), labels.end(), 0) > 0;
    if (both_classes) {
        doc["auroc"] = qcpd::auroc(scores, labels);
        const qcpd::BestF1 bf = qcpd::best_f1(scores, labels);
        doc["best_f1"] = bf.f1;
        doc["best_f1_threshold"] = bf.threshold;
    }
    write_json_file(doc, out);
    std::cout << "CD=" << report.cd << " MD=" << report.md << " FA=" << report.fa << "\n"
              << "wrote " << out.string() << "\n";

    if (!emit_cdf.empty()) {
        std::ofstream f(emit_cdf);
        if (!f) throw qcpd::ValidationError("cannot write " + emit_cdf.string());
        f << "r,F\n";
        for (const auto& [r, fd] : report.delay_cdf)
            f << qcpd::format_double(r) << ',' << qcpd::format_double(fd) << "\n";
        std::cout << "wrote " << emit_cdf.string() << "\n";
    }
    if (!emit_roc.empty()) {
        if (!both_classes)
            throw qcpd::ValidationError("eval: ROC needs both labels present");
        std::ofstream f(emit_roc);
        if (!f) throw qcpd::ValidationError("cannot write " + emit_roc.string());
        f << "fpr,tpr\n";
        for (const auto& [fpr, tpr] : qcpd::roc_points(scores, labels))
            f << qcpd::format_double(fpr) << ',' << qcpd::format_double(tpr) << "\n";
        std::cout << "wrote " << emit_roc.string() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// sweep / experiment
// ---------------------------------------------------------------------------

int cmd_sweep(const fs::path& config_path, const fs::path& out, const fs::path& emit_csv,
              int jobs) {
    const json doc = load_json_file(config_path);
    qcpd::SweepConfig cfg;
    cfg.base = qcpd::experiment_config_from_json(doc.value("base", json::object()));
    cfg.base.jobs = jobs;
    if (doc.contains("windows")) cfg.windows = doc["windows"].get<std::vector<int>>();
    cfg.repeats = doc.value("repeats", cfg.repeats);
    cfg.runs_per_repeat = doc.value("runs_per_repeat", cfg.runs_per_repeat);

    const auto table = qcpd::run_window_sweep(cfg);
    write_json_file(qcpd::sweep_table_to_json(table), out);
    std::cout << "wrote " << out.string() << "\n";

    if (!emit_csv.empty()) {
        std::ofstream f(emit_csv);
        if (!f) throw qcpd::ValidationError("cannot write " + emit_csv.string());
        f << "window,statistic,mean_delay_seconds,std_delay_seconds,n\n";
        for (const auto& cell : table)
            f << cell.window << ',' << cell.statistic << ','
              << qcpd::format_double(cell.mean_delay_seconds) << ','
              << qcpd::format_double(cell.std_delay_seconds) << ',' << cell.n_delays << "\n";
        std::cout << "wrote " << emit_csv.string() << "\n";
    }
    return 0;
}

int cmd_experiment(const fs::path& config_path, const fs::path& out, int jobs) {
    qcpd::ExperimentConfig cfg = qcpd::experiment_config_from_json(load_json_file(config_path));
    cfg.jobs = jobs;
    const qcpd::ExperimentResult result = qcpd::run_experiment(cfg);
    write_json_file(qcpd::experiment_result_to_json(result), out);
    for (const auto& sr : result.per_statistic)
        std::cout << qcpd::statistic_name(sr.statistic) << ": CD=" << sr.metrics.cd
                  << " MD=" << sr.metrics.md << " FA=" << sr.metrics.fa
                  << (sr.metrics.mean_delay_seconds
                          ? " mean_delay=" + std::to_string(*sr.metrics.mean_delay_seconds) + "s"
                          : "")
                  << "\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qcpd: online change point detection for multi-entity time series"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->require_subcommand(1);
    std::string gen_config;
    std::string gen_out;
    uint64_t gen_seed = 0;
    bool gen_has_seed = false;
    std::string gen_kind;
    for (const char* kind : {"ar", "ar-var", "chen"}) {
        auto* sub = gen->add_subcommand(kind);
        sub->add_option("--config", gen_config, "JSON config mirroring the generator fields");
        sub->add_option("--out", gen_out, "Output dataset directory")->required();
        sub->add_option("--seed", gen_seed, "Override the config seed")
            ->each([&](const std::string&) { gen_has_seed = true; });
        sub->callback([&, kind] { gen_kind = kind; });
    }

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Convert position tracks to accelerations");
    std::string ingest_positions, ingest_out;
    int sg_window = 9, sg_order = 2;
    ingest->add_option("--positions", ingest_positions, "Dataset directory with position data")
        ->required();
    ingest->add_option("--sg-window", sg_window, "Savitzky-Golay window length (odd)");
    ingest->add_option("--sg-order", sg_order, "Savitzky-Golay polynomial order");
    ingest->add_option("--out", ingest_out, "Output dataset directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train the autoencoder on normal data");
    std::string train_data, train_out;
    int train_window = 50;
    bool train_grid = false;
    uint64_t train_seed = 0;
    long train_max_windows = 131072;
    train->add_option("--data", train_data, "Dataset directory (or directory of datasets)")
        ->required();
    train->add_option("--window", train_window, "Sliding window length");
    train->add_option("--out", train_out, "Model output path")->required();
    train->add_flag("--grid-search", train_grid, "Grid search over hidden/bottleneck sizes");
    train->add_option("--seed", train_seed, "Master seed");
    train->add_option("--max-windows", train_max_windows,
                      "Training window budget (seeded subsample; 0 = use all)");

    // score
    auto* score = app.add_subcommand("score", "Emit per-entity IDfN scores");
    std::string score_model, score_data, score_out;
    score->add_option("--model", score_model, "Trained model file")->required();
    score->add_option("--data", score_data, "Dataset directory")->required();
    score->add_option("--out", score_out, "Output CSV (time,entity,idfn)")->required();

    // profile
    auto* profile = app.add_subcommand("profile", "Calibrate a detector profile");
    std::string prof_model, prof_data, prof_stat = "mean", prof_out;
    double prof_alpha = 0.05, prof_warmup = 2.0;
    uint64_t prof_seed = 0;
    profile->add_option("--model", prof_model, "Trained model file")->required();
    profile->add_option("--data", prof_data, "Held-out normal dataset directory")->required();
    profile->add_option("--stat", prof_stat, "mean|var|wass");
    profile->add_option("--alpha", prof_alpha, "Quantile for the density threshold");
    profile->add_option("--warmup", prof_warmup, "Warmup window in seconds");
    profile->add_option("--seed", prof_seed, "Subsampling seed");
    profile->add_option("--out", prof_out, "Profile output path")->required();

    // detect
    auto* detect = app.add_subcommand("detect", "Run online detection over a dataset");
    std::string det_model, det_profile, det_data, det_stat, det_out;
    detect->add_option("--model", det_model, "Trained model file")->required();
    detect->add_option("--profile", det_profile, "Calibrated profile file")->required();
    detect->add_option("--data", det_data, "Dataset directory")->required();
    detect->add_option("--stat", det_stat, "Must match the profile statistic");
    detect->add_option("--out", det_out, "Outcome JSON path")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Aggregate outcome files into metrics");
    std::string eval_runs, eval_alphas = "0.5,0.9,0.95", eval_out, eval_cdf, eval_roc;
    eval->add_option("--runs", eval_runs, "Directory of outcome .json files")->required();
    eval->add_option("--alpha", eval_alphas, "Comma-separated delay confidence levels");
    eval->add_option("--out", eval_out, "Report JSON path")->required();
    eval->add_option("--emit-cdf", eval_cdf, "Write the delay CDF as CSV");
    eval->add_option("--emit-roc", eval_roc, "Write ROC curve points as CSV");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Window-size sensitivity sweep");
    std::string sweep_config, sweep_out, sweep_csv;
    sweep->add_option("--config", sweep_config, "Sweep config JSON")->required();
    sweep->add_option("--out", sweep_out, "Sweep table JSON path")->required();
    sweep->add_option("--emit-csv", sweep_csv, "Also write the table as CSV");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Full gen/train/detect/eval pipeline");
    std::string exp_config, exp_out;
    experiment->add_option("--config", exp_config, "Experiment config JSON")->required();
    experiment->add_option("--out", exp_out, "Report JSON path")->required();

    int jobs = default_jobs();
    sweep->add_option("--jobs", jobs, "Parallel runs (default QCPD_JOBS or 1)");
    experiment->add_option("--jobs", jobs, "Parallel runs (default QCPD_JOBS or 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*gen) return cmd_gen(gen_kind, gen_config, gen_out, gen_seed, gen_has_seed);
        if (*ingest) return cmd_ingest(ingest_positions, sg_window, sg_order, ingest_out);
        if (*train)
            return cmd_train(train_data, train_window, train_out, train_grid, train_seed,
                             train_max_windows);
        if (*score) return cmd_score(score_model, score_data, score_out);
        if (*profile)
            return cmd_profile(prof_model, prof_data, prof_stat, prof_alpha, prof_warmup,
                               prof_seed, prof_out);
        if (*detect) return cmd_detect(det_model, det_profile, det_data, det_stat, det_out);
        if (*eval) return cmd_eval(eval_runs, eval_alphas, eval_out, eval_cdf, eval_roc);
        if (*sweep) return cmd_sweep(sweep_config, sweep_out, sweep_csv, jobs);
        if (*experiment) return cmd_experiment(exp_config, exp_out, jobs);
    } catch (const qcpd::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const qcpd::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
