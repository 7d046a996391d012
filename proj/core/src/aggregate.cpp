#include "qcpd/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "qcpd/error.hpp"
#include "qcpd/rng.hpp"

namespace qcpd {

double mean_of(std::span<const double> values) {
    if (values.empty()) throw ValidationError("mean_of: no values");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double population_variance(std::span<const double> values) {
    const double mu = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mu) * (v - mu);
    return acc / static_cast<double>(values.size());
}

double swas_mean(const IdfnSeries& idfn, int t) {
    const auto row = idfn.active_row(t);
    if (row.empty()) throw ValidationError("swas_mean: no active entities at tick");
    return mean_of(row);
}

double swas_variance(const IdfnSeries& idfn, int t) {
    const auto row = idfn.active_row(t);
    if (row.empty()) throw ValidationError("swas_variance: no active entities at tick");
    return population_variance(row);
}

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)
constexpr double kInvSqrt2 = 0.7071067811865475244;    // 1/sqrt(2)

inline double gauss_kernel(double u) {
    return kInvSqrt2Pi * std::exp(-0.5 * u * u);
}

inline double gauss_cdf(double z) {
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

}  // namespace

Kde1d::Kde1d(std::vector<double> centers, double bandwidth)
    : centers_(std::move(centers)), h_(bandwidth) {
    if (centers_.empty()) throw ValidationError("Kde1d: need at least one sample");
    if (!(h_ > 0.0)) throw ValidationError("Kde1d: bandwidth must be > 0");
    for (double c : centers_)
        if (!std::isfinite(c)) throw ValidationError("Kde1d: non-finite sample");
}

double Kde1d::pdf(double x) const {
    double acc = 0.0;
    for (double c : centers_) acc += gauss_kernel((x - c) / h_);
    return acc / (static_cast<double>(centers_.size()) * h_);
}

double Kde1d::cdf(double x) const {
    double acc = 0.0;
    for (double c : centers_) acc += gauss_cdf((x - c) / h_);
    return acc / static_cast<double>(centers_.size());
}

Kde1d kde_fit(std::vector<double> samples, double bandwidth) {
    return Kde1d(std::move(samples), bandwidth);
}

std::vector<double> make_bandwidth_grid(std::span<const double> samples, int n_candidates) {
    if (samples.empty()) throw ValidationError("make_bandwidth_grid: no samples");
    if (n_candidates < 1) throw ValidationError("make_bandwidth_grid: need >= 1 candidate");
    const double sigma = std::sqrt(population_variance(samples));
    if (!(sigma > 0.0))
        throw ValidationError("make_bandwidth_grid: duplicate-only samples have no spread");
    const double lo = std::max(1e-2 * sigma, 1e-6);
    const double hi = std::max(10.0 * sigma, lo);
    std::vector<double> grid(n_candidates);
    if (n_candidates == 1) {
        grid[0] = lo;
        return grid;
    }
    const double log_lo = std::log(lo), log_hi = std::log(hi);
    for (int i = 0; i < n_candidates; ++i)
        grid[i] = std::exp(log_lo + (log_hi - log_lo) * i / (n_candidates - 1));
    return grid;
}

double select_bandwidth(std::span<const double> samples, std::span<const double> grid,
                        int folds) {
    if (grid.empty()) throw ValidationError("select_bandwidth: empty candidate grid");
    if (folds < 2) throw ValidationError("select_bandwidth: need >= 2 folds");
    if (static_cast<int>(samples.size()) < folds)
        throw ValidationError("select_bandwidth: need at least `folds` samples");

    // Sort first so fold assignment depends only on the sample multiset, then
    // shuffle with a fixed seed to decorrelate folds from sample order.
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    Rng rng(0x5eedf01d5eedf01dULL);
    for (size_t i = sorted.size() - 1; i > 0; --i)
        std::swap(sorted[i], sorted[rng.below(i + 1)]);

    double best_h = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<double> train;
    train.reserve(sorted.size());
    for (double h : grid) {
        if (!(h > 0.0)) throw ValidationError("select_bandwidth: bandwidth candidates must be > 0");
        double loglik = 0.0;
        long n_eval = 0;
        bool degenerate = false;
        for (int f = 0; f < folds && !degenerate; ++f) {
            train.clear();
            for (size_t i = 0; i < sorted.size(); ++i)
                if (static_cast<int>(i % folds) != f) train.push_back(sorted[i]);
            const Kde1d kde(train, h);
            for (size_t i = 0; i < sorted.size(); ++i) {
                if (static_cast<int>(i % folds) != f) continue;
                const double d = kde.pdf(sorted[i]);
                if (d <= 0.0) {
                    degenerate = true;
                    break;
                }
                loglik += std::log(d);
                ++n_eval;
            }
        }
        if (degenerate || n_eval == 0) continue;
        const double score = loglik / static_cast<double>(n_eval);
        if (score > best_score) {  // ties keep the earlier (smaller) h
            best_score = score;
            best_h = h;
        }
    }
    if (!(best_h > 0.0))
        throw ValidationError("select_bandwidth: all candidates gave degenerate likelihood");
    return best_h;
}

double wasserstein1(const Kde1d& f, const Kde1d& g, int grid_points) {
    if (grid_points < 2) throw ValidationError("wasserstein1: need >= 2 grid points");

    const auto span_of = [](const Kde1d& k) {
        const auto [mn, mx] = std::minmax_element(k.centers().begin(), k.centers().end());
        return std::pair<double, double>(*mn, *mx);
    };
    const auto [f_lo, f_hi] = span_of(f);
    const auto [g_lo, g_hi] = span_of(g);
    const double h_max = std::max(f.bandwidth(), g.bandwidth());
    const double lo = std::min(f_lo, g_lo) - 6.0 * h_max;
    const double hi = std::max(f_hi, g_hi) + 6.0 * h_max;
    if (!(hi > lo)) return 0.0;  // identical point masses

    std::vector<double> xs;
    xs.reserve(grid_points);
    const double step = (hi - lo) / (grid_points - 1);
    for (int i = 0; i < grid_points; ++i) xs.push_back(lo + i * step);

    // Kernels much narrower than the grid step produce near-steps in the CDF;
    // bracket each such transition so the trapezoids stay faithful.
    for (const Kde1d* k : {&f, &g}) {
        if (12.0 * k->bandwidth() >= step) continue;
        for (double c : k->centers()) {
            xs.push_back(std::clamp(c - 6.0 * k->bandwidth(), lo, hi));
            xs.push_back(std::clamp(c + 6.0 * k->bandwidth(), lo, hi));
        }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double integral = 0.0;
    double prev_x = xs[0];
    double prev_d = std::abs(f.cdf(prev_x) - g.cdf(prev_x));
    for (size_t i = 1; i < xs.size(); ++i) {
        const double x = xs[i];
        const double d = std::abs(f.cdf(x) - g.cdf(x));
        integral += 0.5 * (prev_d + d) * (x - prev_x);
        prev_x = x;
        prev_d = d;
    }
    return integral;
}

}  // namespace qcpd
