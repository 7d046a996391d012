#include <benchmark/benchmark.h>

#include "qcpd/aggregate.hpp"
#include "qcpd/autoencoder.hpp"
#include "qcpd/detect.hpp"
#include "qcpd/ode.hpp"
#include "qcpd/rng.hpp"
#include "qcpd/score.hpp"
#include "qcpd/synth.hpp"

namespace {

qcpd::DenseAutoencoder make_model(int d) {
    return qcpd::DenseAutoencoder({d, 128, 32, 128, d}, 0.1, 7);
}

void BM_ForwardPass(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const auto model = make_model(d);
    qcpd::Rng rng(1);
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal01();
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
}
BENCHMARK(BM_ForwardPass)->Arg(50)->Arg(150);

void BM_IdfnTick(benchmark::State& state) {
    const int P = static_cast<int>(state.range(0));
    const auto model = make_model(50);
    qcpd::Rng rng(2);
    Eigen::MatrixXd window(1, 50);
    for (auto _ : state) {
        double acc = 0.0;
        for (int p = 0; p < P; ++p) {
            for (int i = 0; i < 50; ++i) window(0, i) = rng.normal01();
            acc += qcpd::idfn_from_normalized_window(model, window);
        }
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(BM_IdfnTick)->Arg(10);

void BM_KdeDensity(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    qcpd::Rng rng(3);
    std::vector<double> centers(n);
    for (auto& c : centers) c = rng.normal01();
    const qcpd::Kde1d kde(centers, 0.2);
    for (auto _ : state) benchmark::DoNotOptimize(kde.pdf(0.3));
}
BENCHMARK(BM_KdeDensity)->Arg(512)->Arg(4096);

void BM_Wasserstein1(benchmark::State& state) {
    qcpd::Rng rng(4);
    std::vector<double> a(static_cast<size_t>(state.range(0))), b(a.size());
    for (auto& v : a) v = rng.normal01();
    for (auto& v : b) v = rng.normal01() + 0.5;
    const qcpd::Kde1d f(a, 0.2), g(b, 0.2);
    for (auto _ : state) benchmark::DoNotOptimize(qcpd::wasserstein1(f, g));
}
BENCHMARK(BM_Wasserstein1)->Arg(16)->Arg(512);

void BM_ThresholdStep(benchmark::State& state) {
    const int history = static_cast<int>(state.range(0));
    qcpd::DetectorProfile profile;
    profile.delta_thr = 1e-12;
    profile.dt = 0.1;
    for (auto _ : state) {
        state.PauseTiming();
        qcpd::DetectorState det;
        det.t = history;
        det.cusum = static_cast<double>(history);
        det.log_history.resize(history);
        for (int i = 0; i < history; ++i) det.log_history[i] = std::log1p(i + 1.0);
        qcpd::cusum_step(det, 1.0);
        state.ResumeTiming();
        benchmark::DoNotOptimize(qcpd::threshold_step(det, profile));
    }
}
BENCHMARK(BM_ThresholdStep)->Arg(1000);

void BM_ChenSecond(benchmark::State& state) {
    qcpd::ChenConfig cfg = qcpd::ChenConfig::paper(11);
    cfg.t_end_seconds = 1.0;
    cfg.t_change_seconds.reset();
    cfg.transient_discard_steps = 0;
    for (auto _ : state) benchmark::DoNotOptimize(qcpd::generate_chen(cfg));
}
BENCHMARK(BM_ChenSecond);

}  // namespace

BENCHMARK_MAIN();
