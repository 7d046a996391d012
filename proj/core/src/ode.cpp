#include "qcpd/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qcpd/error.hpp"

namespace qcpd {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
// Fifth-order weights (also the last stage row; first-same-as-last).
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense-output coefficients.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, double atol, double rtol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = err[i] / sc;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

double initial_step(const OdeRhs& f, double t0, const Eigen::VectorXd& y0,
                    const Eigen::VectorXd& f0, double t1, double atol, double rtol) {
    const auto scaled_norm = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& ref) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = atol + rtol * std::abs(ref[i]);
            const double r = v[i] / sc;
            acc += r * r;
        }
        return std::sqrt(acc / static_cast<double>(v.size()));
    };
    const double dn0 = scaled_norm(y0, y0);
    const double dn1 = scaled_norm(f0, y0);
    double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
    h0 = std::min(h0, t1 - t0);

    Eigen::VectorXd y1 = y0 + h0 * f0;
    Eigen::VectorXd f1(y0.size());
    f(t0 + h0, y1, f1);
    const double dn2 = scaled_norm(f1 - f0, y0) / h0;

    double h1;
    const double dmax = std::max(dn1, dn2);
    if (dmax <= 1e-15)
        h1 = std::max(1e-6, h0 * 1e-3);
    else
        h1 = std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, t1 - t0});
}

}  // namespace

Eigen::VectorXd integrate_dopri5(const OdeRhs& f, Eigen::VectorXd y0, double t0, double t1,
                                 std::span<const double> sample_times,
                                 std::vector<Eigen::VectorXd>* samples,
                                 const Dopri5Options& opts) {
    if (!(t1 > t0)) throw ValidationError("integrate_dopri5: t1 must exceed t0");
    const Eigen::Index n = y0.size();
    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ynew(n), ytmp(n), err(n);

    size_t next_sample = 0;
    // Samples landing exactly on t0 take the initial state.
    while (next_sample < sample_times.size() && sample_times[next_sample] <= t0) {
        if (samples) samples->push_back(y0);
        ++next_sample;
    }

    double t = t0;
    f(t, y0, k1);
    double h = opts.initial_step > 0.0 ? std::min(opts.initial_step, t1 - t0)
                                       : initial_step(f, t0, y0, k1, t1, opts.atol, opts.rtol);
    bool rejected = false;
    const double eps = std::numeric_limits<double>::epsilon();

    for (long step = 0; step < opts.max_steps; ++step) {
        if (t >= t1) break;
        h = std::min(h, t1 - t);
        if (h <= 16.0 * eps * std::max(std::abs(t), 1.0))
            throw NumericError("integrate_dopri5: step size underflow at t = " + std::to_string(t));

        ytmp = y0 + h * (a21 * k1);
        f(t + c2 * h, ytmp, k2);
        ytmp = y0 + h * (a31 * k1 + a32 * k2);
        f(t + c3 * h, ytmp, k3);
        ytmp = y0 + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * h, ytmp, k4);
        ytmp = y0 + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * h, ytmp, k5);
        ytmp = y0 + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h, ytmp, k6);
        ynew = y0 + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        f(t + h, ynew, k7);

        if (!ynew.allFinite())
            throw NumericError("integrate_dopri5: non-finite state at t = " + std::to_string(t + h));

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = error_norm(err, y0, ynew, opts.atol, opts.rtol);

        if (en <= 1.0) {
            // Dense output over (t, t+h].
            if (next_sample < sample_times.size()) {
                const double t_hi = t + h;
                const bool last_step = t_hi >= t1 - 16.0 * eps * std::max(std::abs(t1), 1.0);
                const double emit_hi = last_step ? t1 + 1e-9 * std::max(std::abs(t1), 1.0) : t_hi;
                bool have_cont = false;
                Eigen::VectorXd r1, r2, r3, r4, r5;
                while (next_sample < sample_times.size() && sample_times[next_sample] <= emit_hi) {
                    if (!have_cont) {
                        r1 = y0;
                        r2 = ynew - y0;
                        r3 = h * k1 - r2;
                        r4 = r2 - h * k7 - r3;
                        r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                        have_cont = true;
                    }
                    const double theta =
                        std::clamp((sample_times[next_sample] - t) / h, 0.0, 1.0);
                    const double th1 = 1.0 - theta;
                    if (samples)
                        samples->push_back(r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5))));
                    ++next_sample;
                }
            }
            t += h;
            y0 = ynew;
            k1 = k7;  // first-same-as-last
            const double fac = std::clamp(0.9 * std::pow(en > 0.0 ? en : 1e-10, -0.2), 0.2,
                                          rejected ? 1.0 : 5.0);
            h *= fac;
            rejected = false;
        } else {
            h *= std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0);
            rejected = true;
        }
    }
    if (t < t1)
        throw NumericError("integrate_dopri5: max step count exceeded at t = " + std::to_string(t));
    return y0;
}

}  // namespace qcpd
