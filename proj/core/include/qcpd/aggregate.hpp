#pragma once

#include <span>
#include <vector>

#include "qcpd/tensor.hpp"

namespace qcpd {

double mean_of(std::span<const double> values);
double population_variance(std::span<const double> values);

// Mean of IDfN scores over the entities active at tick t.
double swas_mean(const IdfnSeries& idfn, int t);

// Population variance of IDfN scores over the entities active at tick t.
double swas_variance(const IdfnSeries& idfn, int t);

// Gaussian-kernel density estimate over one-dimensional samples.
class Kde1d {
public:
    Kde1d(std::vector<double> centers, double bandwidth);

    const std::vector<double>& centers() const { return centers_; }
    double bandwidth() const { return h_; }

    double pdf(double x) const;
    double cdf(double x) const;

private:
    std::vector<double> centers_;
    double h_;
};

Kde1d kde_fit(std::vector<double> samples, double bandwidth);

// 20 log-spaced bandwidth candidates spanning [1e-2, 10] times the sample
// standard deviation, floored at 1e-6. Errors on duplicate-only samples
// (zero spread leaves no usable scale).
std::vector<double> make_bandwidth_grid(std::span<const double> samples, int n_candidates = 20);

// k-fold cross-validated bandwidth: maximizes the mean held-out log-density.
// Folds are assigned by index after sorting and a seeded shuffle, so the
// result depends only on the sample multiset. Ties pick the smallest
// bandwidth; all-degenerate likelihoods are an error.
double select_bandwidth(std::span<const double> samples, std::span<const double> grid,
                        int folds = 5);

// Wasserstein-1 distance between two KDE mixtures: trapezoidal integral of
// |F(x) - G(x)| over a shared grid spanning all centers plus six bandwidths,
// with extra breakpoints around kernels too narrow for the uniform grid to
// resolve. Symmetric in its arguments by construction.
double wasserstein1(const Kde1d& f, const Kde1d& g, int grid_points = 512);

}  // namespace qcpd
