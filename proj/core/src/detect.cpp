#include "qcpd/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "qcpd/error.hpp"
#include "qcpd/rng.hpp"
#include "qcpd/score.hpp"

namespace qcpd {

using nlohmann::json;

std::string statistic_name(Statistic s) {
    switch (s) {
        case Statistic::mean: return "mean";
        case Statistic::variance: return "variance";
        case Statistic::wasserstein: return "wasserstein";
    }
    throw ValidationError("unknown statistic");
}

Statistic statistic_from_name(const std::string& name) {
    if (name == "mean") return Statistic::mean;
    if (name == "variance" || name == "var") return Statistic::variance;
    if (name == "wasserstein" || name == "wass") return Statistic::wasserstein;
    throw ValidationError("unknown statistic: " + name);
}

int DetectorProfile::warmup_ticks() const {
    return static_cast<int>(std::ceil(warmup_seconds / dt));
}

double deviation(Statistic statistic, std::span<const double> idfn_row,
                 const DetectorProfile& profile) {
    if (idfn_row.empty()) throw ValidationError("deviation: no active entities");
    switch (statistic) {
        case Statistic::mean:
            return std::abs(mean_of(idfn_row) - profile.mu_train);
        case Statistic::variance:
            return std::abs(population_variance(idfn_row) - profile.sigma2_train);
        case Statistic::wasserstein: {
            const Kde1d current(std::vector<double>(idfn_row.begin(), idfn_row.end()),
                                profile.bandwidth);
            return wasserstein1(current, profile.train_kde);
        }
    }
    throw ValidationError("unknown statistic");
}

void cusum_step(DetectorState& state, double f_t) {
    if (!std::isfinite(f_t) || f_t < 0.0)
        throw ValidationError("cusum_step: deviation must be finite and >= 0");
    state.t += 1;
    state.cusum += f_t;
}

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Silverman plug-in bandwidth over the current history, floored to survive
// constant histories.
double silverman_bandwidth(const std::vector<double>& values) {
    const double sigma = std::sqrt(population_variance(values));
    const double n = static_cast<double>(values.size());
    return std::max(1.06 * sigma * std::pow(n, -0.2), 1e-6);
}

double history_density(const std::vector<double>& history, double x) {
    const double h = silverman_bandwidth(history);
    double acc = 0.0;
    for (double c : history) {
        const double u = (x - c) / h;
        acc += std::exp(-0.5 * u * u);
    }
    return acc * kInvSqrt2Pi / (static_cast<double>(history.size()) * h);
}

}  // namespace

double threshold_step(DetectorState& state, const DetectorProfile& profile) {
    if (state.t < 1 || static_cast<int>(state.log_history.size()) != state.t - 1)
        throw ValidationError("threshold_step: cusum_step must advance the tick first");

    const double log_cusum = std::log1p(state.cusum);
    const double density =
        state.log_history.empty() ? 0.0 : history_density(state.log_history, log_cusum);

    if (state.t > profile.warmup_ticks() && !state.fired && density < profile.delta_thr)
        state.fired = state.t;

    state.log_history.push_back(log_cusum);
    return density;
}

namespace {

DetectionOutcome run_over_rows(const std::function<std::vector<double>(int)>& row_at, int ticks,
                               const DetectorProfile& profile) {
    DetectorState state;
    DetectionOutcome outcome;
    outcome.cusum.dt = profile.dt;
    outcome.cusum.kind = SeriesKind::cusum;
    outcome.density_at_current.dt = profile.dt;
    outcome.density_at_current.kind = SeriesKind::density;
    outcome.threshold = profile.delta_thr;
    outcome.warmup_samples = profile.warmup_ticks();

    for (int t = 1; t <= ticks; ++t) {
        const std::vector<double> row = row_at(t);
        const double f_t = deviation(profile.statistic, row, profile);
        cusum_step(state, f_t);
        const double density = threshold_step(state, profile);
        outcome.cusum.values.push_back(state.cusum);
        outcome.density_at_current.values.push_back(density);
    }
    outcome.stop_index = state.fired;
    return outcome;
}

}  // namespace

DetectionOutcome run_offline(const IdfnSeries& idfn, const DetectorProfile& profile) {
    return run_over_rows([&](int t) { return idfn.active_row(t); }, idfn.ticks(), profile);
}

DetectionOutcome run_online(const DenseAutoencoder& model, const NormStats& stats,
                            const DetectorProfile& profile,
                            std::span<const Eigen::MatrixXd> ticks, int w) {
    if (w < 1) throw ValidationError("run_online: window length must be >= 1");
    const int T = static_cast<int>(ticks.size());
    int P = 0, F = 0;
    if (T > 0) {
        F = static_cast<int>(ticks[0].rows());
        P = static_cast<int>(ticks[0].cols());
        if (model.input_size() != F * w)
            throw ValidationError("run_online: model window length mismatch");
        if (stats.mu.size() != F) throw ValidationError("run_online: stats sensor mismatch");
    }

    // Causal per-entity window buffers; column j of buffer[p] is the
    // observation w - 1 - j ticks ago, replication-padded before the start.
    std::vector<Eigen::MatrixXd> buffers(P, Eigen::MatrixXd::Zero(F, w));
    int seen = 0;

    const auto row_at = [&](int t) {
        const Eigen::MatrixXd& obs = ticks[t - 1];
        if (obs.rows() != F || obs.cols() != P)
            throw ValidationError("run_online: tick shape mismatch");
        for (int p = 0; p < P; ++p) {
            if (seen == 0) {
                buffers[p].colwise() = obs.col(p);  // replication padding
            } else {
                if (w > 1)
                    buffers[p].leftCols(w - 1) = buffers[p].rightCols(w - 1).eval();
                buffers[p].col(w - 1) = obs.col(p);
            }
        }
        ++seen;
        std::vector<double> row(P);
        for (int p = 0; p < P; ++p) {
            Eigen::MatrixXd win = buffers[p];
            for (int s = 0; s < F; ++s)
                win.row(s) = (win.row(s).array() - stats.mu[s]) / stats.sigma[s];
            row[p] = idfn_from_normalized_window(model, win);
        }
        return row;
    };

    return run_over_rows(row_at, T, profile);
}

DetectionOutcome run_online(const ModelBundle& bundle, const DetectorProfile& profile,
                            const EntityTensor& tensor) {
    std::vector<Eigen::MatrixXd> ticks;
    ticks.reserve(tensor.ticks());
    for (int t = 1; t <= tensor.ticks(); ++t) ticks.push_back(slice_time(tensor, t));
    return run_online(bundle.model, bundle.stats, profile, ticks, bundle.window);
}

DetectorProfile build_profile(std::span<const IdfnSeries> train, const ProfileOptions& opts) {
    if (train.empty()) throw ValidationError("build_profile: no training IDfN series");
    if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0))
        throw ValidationError("build_profile: alpha must be in [0, 1]");
    const double dt = train[0].dt();

    std::vector<double> pooled;
    for (const auto& series : train) {
        if (series.dt() != dt) throw ValidationError("build_profile: mixed sampling intervals");
        for (int t = 1; t <= series.ticks(); ++t)
            for (double v : series.active_row(t)) pooled.push_back(v);
    }
    if (pooled.empty()) throw ValidationError("build_profile: no active training scores");

    DetectorProfile profile;
    profile.statistic = opts.statistic;
    profile.alpha = opts.alpha;
    profile.warmup_seconds = opts.warmup_seconds;
    profile.dt = dt;
    profile.mu_train = mean_of(pooled);
    profile.sigma2_train = population_variance(pooled);
    if (!(profile.sigma2_train > 0.0))
        throw ValidationError("build_profile: degenerate training scores (all identical)");

    const auto subsample = [&](const std::vector<double>& values, size_t cap, uint64_t stream) {
        if (values.size() <= cap) return values;
        std::vector<double> out(values);
        Rng rng(derive_seed(opts.subsample_seed, stream));
        for (size_t i = out.size() - 1; i > 0; --i)
            std::swap(out[i], out[rng.below(i + 1)]);
        out.resize(cap);
        return out;
    };

    const auto grid = make_bandwidth_grid(pooled);
    const auto cv_samples = subsample(pooled, opts.max_bandwidth_samples, 101);
    const int folds = std::min<int>(opts.bandwidth_folds, static_cast<int>(cv_samples.size()));
    profile.bandwidth = select_bandwidth(cv_samples, grid, folds);
    profile.train_kde = Kde1d(subsample(pooled, opts.max_kde_centers, 102), profile.bandwidth);

    // Replay each held-out series through the full pipeline with firing
    // disabled (delta_thr below any density) and pool the post-warmup
    // densities; their alpha-quantile becomes the threshold.
    DetectorProfile replay = profile;
    replay.delta_thr = -1.0;
    std::vector<double> densities;
    for (const auto& series : train) {
        const DetectionOutcome outcome = run_offline(series, replay);
        for (int t = replay.warmup_ticks(); t < outcome.density_at_current.ticks(); ++t)
            densities.push_back(outcome.density_at_current.values[t]);
    }
    if (densities.empty())
        throw ValidationError("build_profile: training series shorter than the warmup window");

    std::sort(densities.begin(), densities.end());
    size_t idx = 0;
    if (opts.alpha > 0.0) {
        const double pos = std::ceil(opts.alpha * static_cast<double>(densities.size())) - 1.0;
        idx = static_cast<size_t>(std::clamp<double>(pos, 0.0, densities.size() - 1.0));
    }
    // Keep the threshold positive so a fully collapsed density (underflow to
    // zero) still fires under the strict inequality.
    profile.delta_thr = std::max(densities[idx], std::numeric_limits<double>::min());
    return profile;
}

DetectorProfile build_profile(const IdfnSeries& train_idfn, Statistic statistic,
                              double alpha_quantile, double dt) {
    if (train_idfn.dt() != dt)
        throw ValidationError("build_profile: dt does not match the training series");
    ProfileOptions opts;
    opts.statistic = statistic;
    opts.alpha = alpha_quantile;
    return build_profile(std::span<const IdfnSeries>(&train_idfn, 1), opts);
}

void save_profile(const DetectorProfile& profile, const std::filesystem::path& path) {
    json doc;
    doc["format"] = "qcpd-profile";
    doc["version"] = 1;
    doc["statistic"] = statistic_name(profile.statistic);
    doc["mu_train"] = profile.mu_train;
    doc["sigma2_train"] = profile.sigma2_train;
    doc["bandwidth"] = profile.bandwidth;
    doc["delta_thr"] = profile.delta_thr;
    doc["warmup_seconds"] = profile.warmup_seconds;
    doc["alpha"] = profile.alpha;
    doc["dt"] = profile.dt;
    doc["kde_centers"] = profile.train_kde.centers();
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write profile file " + path.string());
    f << doc.dump() << "\n";
}

DetectorProfile load_profile(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open profile file " + path.string());
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": corrupt profile file (" + e.what() + ")");
    }
    if (!doc.contains("format") || doc["format"] != "qcpd-profile")
        throw ValidationError(path.string() + ": not a qcpd profile file");

    DetectorProfile profile;
    profile.statistic = statistic_from_name(doc["statistic"].get<std::string>());
    profile.mu_train = doc["mu_train"].get<double>();
    profile.sigma2_train = doc["sigma2_train"].get<double>();
    profile.bandwidth = doc["bandwidth"].get<double>();
    profile.delta_thr = doc["delta_thr"].get<double>();
    profile.warmup_seconds = doc["warmup_seconds"].get<double>();
    profile.alpha = doc["alpha"].get<double>();
    profile.dt = doc["dt"].get<double>();
    profile.train_kde = Kde1d(doc["kde_centers"].get<std::vector<double>>(), profile.bandwidth);
    return profile;
}

}  // namespace qcpd
