#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace qcpd {

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

struct Dopri5Options {
    double rtol = 1e-6;
    double atol = 1e-9;
    double initial_step = 0.0;  // 0 selects the step automatically
    long max_steps = 100000000;
};

// Embedded Dormand-Prince 5(4) with the standard 4th-order dense-output
// interpolant. Integrates y' = f(t, y) from t0 to t1 and evaluates the dense
// output at `sample_times` (ascending, within [t0, t1]); sampled states are
// appended to *samples when it is non-null. Returns the state at t1.
//
// Throws NumericError on step-size underflow or a non-finite state, reporting
// the failing time.
Eigen::VectorXd integrate_dopri5(const OdeRhs& f, Eigen::VectorXd y0, double t0, double t1,
                                 std::span<const double> sample_times,
                                 std::vector<Eigen::VectorXd>* samples,
                                 const Dopri5Options& opts = {});

}  // namespace qcpd
