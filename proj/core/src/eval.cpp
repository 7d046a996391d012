#include "qcpd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "qcpd/error.hpp"

namespace qcpd {

RunClass classify(const RunRecord& run) {
    if (run.has_true_change) {
        if (!run.true_change_index)
            throw ValidationError("classify: change-present run without true index");
        if (!run.detected_index) return RunClass::FN;
        return *run.detected_index >= *run.true_change_index ? RunClass::TP : RunClass::FP;
    }
    return run.detected_index ? RunClass::FP : RunClass::TN;
}

MetricsReport metrics(std::span<const RunRecord> runs, std::span<const double> alphas) {
    if (runs.empty()) throw ValidationError("metrics: no runs");

    MetricsReport report;
    double dt = 0.0;
    for (const auto& run : runs) {
        const RunClass cls = classify(run);
        if (run.has_true_change)
            ++report.n_change;
        else
            ++report.n_normal;
        switch (cls) {
            case RunClass::TP: {
                ++report.tp;
                if (dt == 0.0)
                    dt = run.dt;
                else if (run.dt != dt)
                    throw ValidationError("metrics: delay runs must share dt");
                report.delays_seconds.push_back(
                    (*run.detected_index - *run.true_change_index) * run.dt);
                break;
            }
            case RunClass::FN: ++report.fn; break;
            case RunClass::FP: ++report.fp; break;
            case RunClass::TN: ++report.tn; break;
        }
    }
    if (report.n_change == 0) throw ValidationError("metrics: no change-present runs (N_a = 0)");

    report.cd = static_cast<double>(report.tp) / report.n_change;
    report.md = static_cast<double>(report.fn) / report.n_change;
    report.fa = static_cast<double>(report.fp) / (report.n_change + report.n_normal);

    if (!report.delays_seconds.empty()) {
        std::vector<double> sorted = report.delays_seconds;
        std::sort(sorted.begin(), sorted.end());
        const double n = static_cast<double>(sorted.size());
        report.mean_delay_seconds = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
        report.median_delay_seconds = sorted.size() % 2 == 1
                                          ? sorted[sorted.size() / 2]
                                          : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                                   sorted[sorted.size() / 2]);

        // Resolution grid from d_min to d_max in dt steps. Delays are exact
        // multiples of dt, so round the interval count to absorb fp noise.
        const double d_min = sorted.front();
        const double d_max = sorted.back();
        const long n_d = std::lround(std::floor((d_max - d_min) / dt + 1e-9));
        const double slack = 1e-9 * dt;
        for (long j = 0; j <= n_d; ++j) {
            const double r = d_min + static_cast<double>(j) * dt;
            const auto count = std::upper_bound(sorted.begin(), sorted.end(), r + slack) -
                               sorted.begin();
            report.delay_cdf.emplace_back(r, static_cast<double>(count) / n);
        }
        for (double alpha : alphas) {
            for (const auto& [r, fd] : report.delay_cdf) {
                if (fd >= alpha) {
                    report.d_alpha[alpha] = r;
                    break;
                }
            }
        }
    }
    return report;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ValidationError("auroc: size mismatch");
    const size_t n = scores.size();
    long n_pos = 0, n_neg = 0;
    for (int l : labels) (l != 0 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw ValidationError("auroc: both classes required");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups; sum ranks of the positive class.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>((i + 1) + (j + 1));
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

BestF1 best_f1(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ValidationError("best_f1: size mismatch");
    long n_pos = 0, n_neg = 0;
    for (int l : labels) (l != 0 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw ValidationError("best_f1: both classes required");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    // Sweep thresholds from the highest score down; predictions are
    // score >= threshold, so each distinct value adds its tie group.
    BestF1 best{-1.0, 0.0};
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        size_t j = i;
        while (j < order.size() && scores[order[j]] == threshold) {
            if (labels[order[j]] != 0)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const long fn = n_pos - tp;
        const double f1 = (2.0 * tp) / static_cast<double>(2 * tp + fp + fn);
        if (f1 > best.f1) best = BestF1{f1, threshold};
        i = j;
    }
    return best;
}

std::vector<std::pair<double, double>> roc_points(std::span<const double> scores,
                                                  std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ValidationError("roc_points: size mismatch");
    long n_pos = 0, n_neg = 0;
    for (int l : labels) (l != 0 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw ValidationError("roc_points: both classes required");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] != 0)
                ++tp;
            else
                ++fp;
            ++j;
        }
        points.emplace_back(static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos);
        i = j;
    }
    return points;
}

std::vector<SweepCell> window_sweep(std::span<const int> w_values, int repeats,
                                    const SweepRunFn& fn) {
    if (repeats < 1) throw ValidationError("window_sweep: repeats must be >= 1");
    std::vector<SweepCell> table;
    for (int w : w_values) {
        std::map<std::string, std::vector<double>> pooled;
        for (int r = 0; r < repeats; ++r)
            for (auto& [stat, delays] : fn(w, r))
                pooled[stat].insert(pooled[stat].end(), delays.begin(), delays.end());
        for (const auto& [stat, delays] : pooled) {
            SweepCell cell;
            cell.window = w;
            cell.statistic = stat;
            cell.n_delays = static_cast<int>(delays.size());
            if (!delays.empty()) {
                const double mean =
                    std::accumulate(delays.begin(), delays.end(), 0.0) / delays.size();
                cell.mean_delay_seconds = mean;
                if (delays.size() > 1) {
                    double acc = 0.0;
                    for (double d : delays) acc += (d - mean) * (d - mean);
                    cell.std_delay_seconds = std::sqrt(acc / (delays.size() - 1));
                }
            }
            table.push_back(std::move(cell));
        }
    }
    return table;
}

}  // namespace qcpd
