#include <doctest.h>

#include <cmath>

#include "qcpd/detect.hpp"
#include "qcpd/error.hpp"
#include "qcpd/rng.hpp"
#include "qcpd/score.hpp"
#include "test_util.hpp"

using namespace qcpd;
using qcpd_test::TempDir;

namespace {

IdfnSeries series_from_matrix(const Eigen::MatrixXd& m, double dt = 1.0) {
    return IdfnSeries(m, dt);
}

IdfnSeries noisy_training_series(int T, int P, uint64_t seed, double dt = 1.0) {
    Rng rng(seed);
    Eigen::MatrixXd m(T, P);
    for (int t = 0; t < T; ++t)
        for (int p = 0; p < P; ++p) m(t, p) = std::abs(rng.normal(1.0, 0.3));
    return IdfnSeries(std::move(m), dt);
}

DetectorProfile hand_profile(Statistic stat, double mu, double sigma2, double delta_thr,
                             double dt = 1.0) {
    DetectorProfile profile;
    profile.statistic = stat;
    profile.mu_train = mu;
    profile.sigma2_train = sigma2;
    profile.bandwidth = 0.1;
    profile.train_kde = Kde1d({mu}, 0.1);
    profile.delta_thr = delta_thr;
    profile.dt = dt;
    return profile;
}

}  // namespace

TEST_CASE("build_profile references match hand arithmetic") {
    Eigen::MatrixXd scores(2, 2);
    scores << 0, 1, 2, 3;  // pooled {0, 1, 2, 3}
    const auto series = series_from_matrix(scores);
    const DetectorProfile profile = build_profile(series, Statistic::mean, 0.05, 1.0);
    CHECK(profile.mu_train == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(profile.sigma2_train == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("build_profile rejects degenerate training scores") {
    const auto series = series_from_matrix(Eigen::MatrixXd::Constant(5, 3, 2.0));
    CHECK_THROWS_WITH_AS(build_profile(series, Statistic::mean, 0.05, 1.0),
                         doctest::Contains("degenerate"), ValidationError);
}

TEST_CASE("alpha zero calibrates to the minimum observed density") {
    const auto series = noisy_training_series(60, 5, 1);
    const DetectorProfile at_zero = build_profile(series, Statistic::mean, 0.0, 1.0);
    const DetectorProfile at_half = build_profile(series, Statistic::mean, 0.5, 1.0);

    // Reproduce the calibration replay to recover the density pool.
    DetectorProfile replay = at_zero;
    replay.delta_thr = -1.0;
    const DetectionOutcome outcome = run_offline(series, replay);
    double min_density = std::numeric_limits<double>::infinity();
    for (int t = replay.warmup_ticks(); t < outcome.density_at_current.ticks(); ++t)
        min_density = std::min(min_density, outcome.density_at_current.values[t]);

    CHECK(at_zero.delta_thr == min_density);
    CHECK(at_half.delta_thr > at_zero.delta_thr);
}

TEST_CASE("deviation examples") {
    const auto profile = hand_profile(Statistic::mean, 1.5, 0.5, 1e-9);

    SUBCASE("row at the training mean deviates by zero") {
        const std::vector<double> row{1.5, 1.5, 1.5};
        CHECK(deviation(Statistic::mean, row, profile) == 0.0);
    }
    SUBCASE("mean deviation is the absolute difference") {
        const std::vector<double> row{2.0, 2.0};
        CHECK(deviation(Statistic::mean, row, profile) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("variance deviation") {
        const std::vector<double> row{1.0, 2.0, 3.0};  // popvar = 2/3
        CHECK(deviation(Statistic::variance, row, profile) ==
              doctest::Approx(2.0 / 3.0 - 0.5).epsilon(1e-12));
    }
    SUBCASE("wasserstein of the training set against itself is zero") {
        DetectorProfile wp = hand_profile(Statistic::wasserstein, 0.0, 0.0, 1e-9);
        wp.bandwidth = 0.2;
        wp.train_kde = Kde1d({0.5, 1.0, 2.0}, 0.2);
        const std::vector<double> row{0.5, 1.0, 2.0};
        CHECK(deviation(Statistic::wasserstein, row, wp) <= 1e-6);
    }
    SUBCASE("empty rows are rejected") {
        CHECK_THROWS_AS(deviation(Statistic::mean, {}, profile), ValidationError);
    }
}

TEST_CASE("deviations are invariant under entity permutation") {
    Rng rng(9);
    auto profile = hand_profile(Statistic::mean, 1.0, 0.2, 1e-9);
    profile.bandwidth = 0.3;
    profile.train_kde = Kde1d({0.8, 1.1, 1.3}, 0.3);
    std::vector<double> row(9);
    for (auto& v : row) v = std::abs(rng.normal(1.0, 0.4));
    std::vector<double> shuffled = row;
    std::swap(shuffled[0], shuffled[5]);
    std::swap(shuffled[2], shuffled[8]);
    std::reverse(shuffled.begin(), shuffled.end());
    for (const auto stat : {Statistic::mean, Statistic::variance, Statistic::wasserstein})
        CHECK(deviation(stat, row, profile) == doctest::Approx(deviation(stat, shuffled, profile))
                                                   .epsilon(1e-12));
}

TEST_CASE("mean deviation scales with a common positive factor") {
    auto profile = hand_profile(Statistic::mean, 1.0, 0.0, 1e-9);
    std::vector<double> row{0.5, 1.5, 2.5};
    const double base = deviation(Statistic::mean, row, profile);
    const double k = 3.7;
    auto scaled_profile = hand_profile(Statistic::mean, k * 1.0, 0.0, 1e-9);
    std::vector<double> scaled = row;
    for (auto& v : scaled) v *= k;
    CHECK(deviation(Statistic::mean, scaled, scaled_profile) ==
          doctest::Approx(k * base).epsilon(1e-12));
}

TEST_CASE("cusum accumulates exactly") {
    DetectorState state;
    CHECK(state.cusum == 0.0);

    SUBCASE("unit deviations count ticks") {
        for (int t = 1; t <= 10; ++t) {
            cusum_step(state, 1.0);
            CHECK(state.cusum == static_cast<double>(t));
        }
    }
    SUBCASE("zero deviations stay at zero") {
        for (int t = 1; t <= 10; ++t) cusum_step(state, 0.0);
        CHECK(state.cusum == 0.0);
    }
    SUBCASE("hand accumulation") {
        cusum_step(state, 0.5);
        CHECK(state.cusum == 0.5);
        cusum_step(state, 1.5);
        CHECK(state.cusum == 2.0);
        cusum_step(state, 2.0);
        CHECK(state.cusum == 4.0);
    }
    SUBCASE("random non-negative sequences match a hand oracle and never decrease") {
        Rng rng(77);
        double oracle = 0.0, prev = 0.0;
        for (int t = 1; t <= 500; ++t) {
            const double f = std::abs(rng.normal01());
            cusum_step(state, f);
            oracle += f;
            CHECK(state.cusum == oracle);
            CHECK(state.cusum >= prev);
            prev = state.cusum;
        }
    }
    SUBCASE("negative and non-finite deviations are rejected") {
        CHECK_THROWS_AS(cusum_step(state, -0.1), ValidationError);
        CHECK_THROWS_AS(cusum_step(state, std::nan("")), ValidationError);
    }
}

TEST_CASE("warmup arithmetic: first possible firing tick") {
    DetectorProfile profile = hand_profile(Statistic::mean, 0.0, 0.0, 1e300, 0.1);
    profile.warmup_seconds = 2.0;
    CHECK(profile.warmup_ticks() == 20);

    // Feed constant deviations; with delta_thr above every density the
    // detector fires at the first eligible tick, which must be 21.
    DetectorState state;
    std::optional<int> fired;
    for (int t = 1; t <= 30 && !fired; ++t) {
        cusum_step(state, 1.0);
        threshold_step(state, profile);
        fired = state.fired;
    }
    REQUIRE(fired.has_value());
    CHECK(*fired == 21);
}

TEST_CASE("stationary zero deviations never fire for a threshold below the peak") {
    // C stays 0, the log history concentrates at 0 and the density there is
    // the kernel peak 1/(h_floor * sqrt(2 pi)); any delta_thr below that
    // cannot fire.
    DetectorProfile profile = hand_profile(Statistic::mean, 0.0, 0.0, 1e3, 1.0);
    DetectorState state;
    for (int t = 1; t <= 200; ++t) {
        cusum_step(state, 0.0);
        threshold_step(state, profile);
    }
    CHECK_FALSE(state.fired.has_value());
}

TEST_CASE("a catastrophic outlier collapses the density and fires") {
    DetectorProfile profile = hand_profile(Statistic::mean, 0.0, 0.0, 1e-6, 1.0);
    profile.warmup_seconds = 5.0;
    DetectorState state;
    for (int t = 1; t <= 50; ++t) {
        cusum_step(state, 1.0);
        threshold_step(state, profile);
    }
    CHECK_FALSE(state.fired.has_value());
    cusum_step(state, 1e6);
    threshold_step(state, profile);
    REQUIRE(state.fired.has_value());
    CHECK(*state.fired == 51);
}

TEST_CASE("firing latches") {
    DetectorProfile profile = hand_profile(Statistic::mean, 0.0, 0.0, 1e-6, 1.0);
    DetectorState state;
    for (int t = 1; t <= 20; ++t) {
        cusum_step(state, 0.01);
        threshold_step(state, profile);
    }
    cusum_step(state, 1e7);
    threshold_step(state, profile);
    REQUIRE(state.fired.has_value());
    const int fired_at = *state.fired;
    for (int t = 0; t < 30; ++t) {
        cusum_step(state, 1e7);
        threshold_step(state, profile);
        CHECK(*state.fired == fired_at);
    }
}

TEST_CASE("threshold_step requires cusum_step first") {
    DetectorProfile profile = hand_profile(Statistic::mean, 0.0, 0.0, 1e-6);
    DetectorState state;
    CHECK_THROWS_AS(threshold_step(state, profile), ValidationError);
}

TEST_CASE("log-transformed cusum is nondecreasing") {
    DetectorProfile profile = hand_profile(Statistic::mean, 0.0, 0.0, 1e-12);
    DetectorState state;
    Rng rng(13);
    double prev = -1.0;
    for (int t = 1; t <= 300; ++t) {
        cusum_step(state, std::abs(rng.normal01()));
        threshold_step(state, profile);
        CHECK(state.log_history.back() >= prev);
        prev = state.log_history.back();
    }
}

TEST_CASE("online equals offline tick for tick on random datasets") {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        const auto tensor = qcpd_test::random_tensor(2, 40, 3, seed * 31 + 7);
        const int w = 5;
        const DenseAutoencoder model({2 * w, 6, 2 * w}, 0.0, seed);
        NormStats stats = NormStats::identity(2);
        stats.mu << 0.2, -0.4;
        stats.sigma << 1.3, 0.9;

        const IdfnSeries scores = idfn_series(model, tensor, stats, w);
        DetectorProfile profile = build_profile(scores, Statistic::mean, 0.05, tensor.dt());

        const DetectionOutcome offline = run_offline(scores, profile);
        const DetectionOutcome online = [&] {
            ModelBundle bundle{model, stats, w};
            return run_online(bundle, profile, tensor);
        }();

        CHECK(online.stop_index == offline.stop_index);
        REQUIRE(online.cusum.values.size() == offline.cusum.values.size());
        for (size_t i = 0; i < online.cusum.values.size(); ++i) {
            CHECK(online.cusum.values[i] == offline.cusum.values[i]);
            CHECK(online.density_at_current.values[i] == offline.density_at_current.values[i]);
        }
    }
}

TEST_CASE("an empty stream yields an empty outcome") {
    const DenseAutoencoder model({4, 2, 4}, 0.0, 1);
    const DetectorProfile profile = hand_profile(Statistic::mean, 0.0, 0.0, 1e-6);
    const DetectionOutcome outcome =
        run_online(model, NormStats::identity(2), profile, {}, 2);
    CHECK_FALSE(outcome.stop_index.has_value());
    CHECK(outcome.cusum.values.empty());
    CHECK(outcome.density_at_current.values.empty());
}

TEST_CASE("profiles round-trip through json") {
    TempDir dir("profile_rt");
    const auto path = dir.path() / "profile.json";
    const auto series = noisy_training_series(80, 4, 3, 0.1);
    ProfileOptions opts;
    opts.statistic = Statistic::wasserstein;
    opts.alpha = 0.1;
    const DetectorProfile profile =
        build_profile(std::span<const IdfnSeries>(&series, 1), opts);
    save_profile(profile, path);
    const DetectorProfile loaded = load_profile(path);
    CHECK(loaded.statistic == profile.statistic);
    CHECK(loaded.mu_train == profile.mu_train);
    CHECK(loaded.sigma2_train == profile.sigma2_train);
    CHECK(loaded.bandwidth == profile.bandwidth);
    CHECK(loaded.delta_thr == profile.delta_thr);
    CHECK(loaded.warmup_seconds == profile.warmup_seconds);
    CHECK(loaded.dt == profile.dt);
    CHECK(loaded.train_kde.centers() == profile.train_kde.centers());
}

TEST_CASE("statistic names round-trip and reject junk") {
    for (const auto s : {Statistic::mean, Statistic::variance, Statistic::wasserstein})
        CHECK(statistic_from_name(statistic_name(s)) == s);
    CHECK(statistic_from_name("var") == Statistic::variance);
    CHECK(statistic_from_name("wass") == Statistic::wasserstein);
    CHECK_THROWS_AS(statistic_from_name("median"), ValidationError);
}
