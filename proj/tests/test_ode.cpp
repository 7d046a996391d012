#include <doctest.h>

#include <cmath>
#include <vector>

#include "qcpd/error.hpp"
#include "qcpd/ode.hpp"

using namespace qcpd;

namespace {

// Test-side fixed-step classic RK4, independent of the adaptive integrator.
Eigen::VectorXd rk4_integrate(const OdeRhs& f, Eigen::VectorXd y, double t0, double t1,
                              double h) {
    Eigen::VectorXd k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size());
    double t = t0;
    while (t < t1 - 1e-12) {
        const double step = std::min(h, t1 - t);
        f(t, y, k1);
        f(t + 0.5 * step, y + 0.5 * step * k1, k2);
        f(t + 0.5 * step, y + 0.5 * step * k2, k3);
        f(t + step, y + step * k3, k4);
        y += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += step;
    }
    return y;
}

const OdeRhs kExpDecay = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
    dydt = -y;
};

OdeRhs chen_single(double a, double b, double c) {
    return [=](double, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
        dydt[0] = a * (y[1] - y[0]);
        dydt[1] = (c - a) * y[0] - y[0] * y[2] + c * y[1];
        dydt[2] = y[0] * y[1] - b * y[2];
    };
}

}  // namespace

TEST_CASE("exponential decay matches the analytic solution on the sample grid") {
    std::vector<double> ts;
    for (int k = 0; k <= 50; ++k) ts.push_back(0.1 * k);
    std::vector<Eigen::VectorXd> samples;
    const Eigen::VectorXd yend =
        integrate_dopri5(kExpDecay, Eigen::VectorXd::Ones(1), 0.0, 5.0, ts, &samples);

    REQUIRE(samples.size() == ts.size());
    for (size_t i = 0; i < ts.size(); ++i)
        CHECK(samples[i][0] == doctest::Approx(std::exp(-ts[i])).epsilon(1e-6));
    CHECK(yend[0] == doctest::Approx(std::exp(-5.0)).epsilon(1e-6));
}

TEST_CASE("harmonic oscillator conserves energy to tolerance") {
    const OdeRhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
        dydt[0] = y[1];
        dydt[1] = -y[0];
    };
    Eigen::VectorXd y0(2);
    y0 << 1.0, 0.0;
    const Eigen::VectorXd yend = integrate_dopri5(f, y0, 0.0, 20.0, {}, nullptr);
    const double energy = yend[0] * yend[0] + yend[1] * yend[1];
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("chen trajectory agrees with a fine fixed-step RK4 oracle over one second") {
    const auto rhs = chen_single(35.0, 2.8, 28.0);
    Eigen::VectorXd y0(3);
    y0 << -0.3, 0.4, 0.5;

    std::vector<double> ts;
    for (int k = 1; k <= 10; ++k) ts.push_back(0.1 * k);
    std::vector<Eigen::VectorXd> samples;
    integrate_dopri5(rhs, y0, 0.0, 1.0, ts, &samples);

    double max_err = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
        const Eigen::VectorXd oracle = rk4_integrate(rhs, y0, 0.0, ts[i], 1e-5);
        max_err = std::max(max_err, (samples[i] - oracle).cwiseAbs().maxCoeff());
    }
    CHECK(max_err < 1e-3);
}

TEST_CASE("finite-time blowup raises a numeric error naming the time") {
    // y' = y^2 diverges at t = 1.
    const OdeRhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
        dydt[0] = y[0] * y[0];
    };
    CHECK_THROWS_AS(integrate_dopri5(f, Eigen::VectorXd::Ones(1), 0.0, 2.0, {}, nullptr),
                    NumericError);
}

TEST_CASE("dense output covers sample times at the interval ends") {
    std::vector<double> ts{0.0, 1.0};
    std::vector<Eigen::VectorXd> samples;
    integrate_dopri5(kExpDecay, Eigen::VectorXd::Ones(1), 0.0, 1.0, ts, &samples);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0][0] == 1.0);
    CHECK(samples[1][0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-5));
}

TEST_CASE("invalid time span is rejected") {
    CHECK_THROWS_AS(integrate_dopri5(kExpDecay, Eigen::VectorXd::Ones(1), 1.0, 1.0, {}, nullptr),
                    ValidationError);
}
