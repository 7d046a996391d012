#include "qcpd/synth.hpp"

#include <cmath>
#include <vector>

#include "qcpd/error.hpp"
#include "qcpd/ode.hpp"
#include "qcpd/rng.hpp"

namespace qcpd {

void ArConfig::validate() const {
    if (n_entities < 1) throw ValidationError("ArConfig: n_entities >= 1 required");
    if (length < 1) throw ValidationError("ArConfig: length >= 1 required");
    if (change_index && (*change_index <= 2 || *change_index > length))
        throw ValidationError("ArConfig: change index must satisfy 2 < t* <= T");
    if (noise_std_before < 0.0 || noise_std_after < 0.0)
        throw ValidationError("ArConfig: noise stds must be >= 0");
}

ArConfig ArConfig::paper_mean_shift(uint64_t seed) {
    ArConfig cfg;
    cfg.noise_mean_before = 0.0;
    cfg.noise_mean_after = 2.0;
    cfg.noise_std_before = 0.5;
    cfg.noise_std_after = 0.5;
    cfg.seed = seed;
    return cfg;
}

ArConfig ArConfig::paper_variance_shift(uint64_t seed) {
    ArConfig cfg;
    cfg.noise_mean_before = 0.0;
    cfg.noise_mean_after = 0.0;
    cfg.noise_std_before = 0.1;
    cfg.noise_std_after = 0.3;
    cfg.seed = seed;
    return cfg;
}

EntityTensor generate_ar(const ArConfig& cfg) {
    cfg.validate();
    const int T = cfg.length;
    const int change = cfg.change_index.value_or(T + 1);  // never reached when absent

    std::vector<Eigen::MatrixXd> per_entity;
    per_entity.reserve(cfg.n_entities);
    const Rng base(cfg.seed);
    for (int p = 1; p <= cfg.n_entities; ++p) {
        Rng rng = base.substream(static_cast<uint64_t>(p));
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, T);
        for (int t = 3; t <= T; ++t) {
            const bool after = t >= change;
            const double eps = rng.normal(after ? cfg.noise_mean_after : cfg.noise_mean_before,
                                          after ? cfg.noise_std_after : cfg.noise_std_before);
            y(0, t - 1) = cfg.phi1 * y(0, t - 2) + cfg.phi2 * y(0, t - 3) + eps;
        }
        per_entity.push_back(std::move(y));
    }

    std::optional<ChangePointAnnotation> annotation;
    if (cfg.change_index) annotation = ChangePointAnnotation{*cfg.change_index};
    return EntityTensor(std::move(per_entity), 1.0, annotation);
}

EntityTensor generate_ar_variance(const ArConfig& cfg) {
    if (cfg.noise_mean_before != 0.0 || cfg.noise_mean_after != 0.0)
        throw ValidationError("generate_ar_variance: noise means must be 0");
    return generate_ar(cfg);
}

void ChenConfig::validate() const {
    if (n_oscillators < 1) throw ValidationError("ChenConfig: n_oscillators >= 1 required");
    if (!(dt > 0.0)) throw ValidationError("ChenConfig: dt must be > 0");
    if (!(t_end_seconds > 0.0)) throw ValidationError("ChenConfig: t_end must be > 0");
    if (transient_discard_steps < 0)
        throw ValidationError("ChenConfig: transient_discard_steps must be >= 0");
    if (t_change_seconds) {
        if (!(*t_change_seconds > 0.0) || !(*t_change_seconds < t_end_seconds))
            throw ValidationError("ChenConfig: need 0 < t_change < t_end");
        if (!(transient_discard_steps * dt < *t_change_seconds))
            throw ValidationError("ChenConfig: tau*dt must be < t_change");
        const double steps = *t_change_seconds / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9)
            throw ValidationError("ChenConfig: t_change must be an integer multiple of dt");
    }
    const double n_raw = t_end_seconds / dt;
    if (std::abs(n_raw - std::round(n_raw)) > 1e-9)
        throw ValidationError("ChenConfig: t_end must be an integer multiple of dt");
    if (std::round(n_raw) - transient_discard_steps < 1)
        throw ValidationError("ChenConfig: no samples left after transient discard");
    if (!(rtol > 0.0) || !(atol > 0.0))
        throw ValidationError("ChenConfig: tolerances must be > 0");
}

ChenConfig ChenConfig::paper(uint64_t seed) {
    ChenConfig cfg;
    cfg.seed = seed;
    return cfg;
}

namespace {

OdeRhs chen_rhs(int P, double a, double b, double c, double eps1, double eps2, double lambda) {
    return [=](double, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
        double sum_x = 0.0;
        for (int p = 0; p < P; ++p) sum_x += y[3 * p];
        const double w = y[3 * P];
        for (int p = 0; p < P; ++p) {
            const double xp = y[3 * p], yp = y[3 * p + 1], zp = y[3 * p + 2];
            dydt[3 * p] = a * (yp - xp) + eps2 * w;
            dydt[3 * p + 1] = (c - a) * xp - xp * zp + c * yp;
            dydt[3 * p + 2] = xp * yp - b * zp;
        }
        dydt[3 * P] = -lambda * w + (eps1 / P) * sum_x;
    };
}

}  // namespace

EntityTensor generate_chen(const ChenConfig& cfg) {
    cfg.validate();
    const int P = cfg.n_oscillators;
    const int n_raw = static_cast<int>(std::round(cfg.t_end_seconds / cfg.dt));
    const int tau = cfg.transient_discard_steps;
    const int T = n_raw - tau;

    Eigen::VectorXd state(3 * P + 1);
    if (cfg.initial_states) {
        if (static_cast<int>(cfg.initial_states->size()) != P)
            throw ValidationError("generate_chen: initial_states size must equal n_oscillators");
        for (int p = 0; p < P; ++p)
            for (int k = 0; k < 3; ++k) state[3 * p + k] = (*cfg.initial_states)[p][k];
    } else {
        const Rng base(cfg.seed);
        for (int p = 0; p < P; ++p) {
            Rng rng = base.substream(static_cast<uint64_t>(p + 1));
            state[3 * p] = rng.uniform(-1.0, 1.0);
            state[3 * p + 1] = rng.uniform(-1.0, 1.0);
            state[3 * p + 2] = rng.uniform(-1.0, 1.0);
        }
    }
    state[3 * P] = 0.0;

    Dopri5Options opts;
    opts.rtol = cfg.rtol;
    opts.atol = cfg.atol;

    std::vector<Eigen::VectorXd> sampled;
    sampled.reserve(n_raw);

    const auto grid = [&](int lo, int hi) {  // sample times k*dt for k in [lo, hi)
        std::vector<double> ts;
        ts.reserve(hi - lo);
        for (int k = lo; k < hi; ++k) ts.push_back(k * cfg.dt);
        return ts;
    };

    if (cfg.t_change_seconds) {
        const int change_raw = static_cast<int>(std::round(*cfg.t_change_seconds / cfg.dt));
        const auto phase1 = grid(0, change_raw);
        state = integrate_dopri5(
            chen_rhs(P, cfg.a, cfg.b, cfg.c_phase1, cfg.eps1_phase1, cfg.eps2_phase1,
                     cfg.lambda_env),
            state, 0.0, *cfg.t_change_seconds, phase1, &sampled, opts);
        // Restart at the discontinuity so no adaptive step straddles it.
        const auto phase2 = grid(change_raw, n_raw);
        state = integrate_dopri5(
            chen_rhs(P, cfg.a, cfg.b, cfg.c_phase2, 0.0, 0.0, cfg.lambda_env), state,
            *cfg.t_change_seconds, cfg.t_end_seconds, phase2, &sampled, opts);
    } else {
        const auto all = grid(0, n_raw);
        state = integrate_dopri5(
            chen_rhs(P, cfg.a, cfg.b, cfg.c_phase1, cfg.eps1_phase1, cfg.eps2_phase1,
                     cfg.lambda_env),
            state, 0.0, cfg.t_end_seconds, all, &sampled, opts);
    }

    std::vector<Eigen::MatrixXd> per_entity(P, Eigen::MatrixXd(3, T));
    for (int i = 0; i < T; ++i) {
        const Eigen::VectorXd& s = sampled[tau + i];
        for (int p = 0; p < P; ++p) per_entity[p].col(i) = s.segment(3 * p, 3);
    }

    std::optional<ChangePointAnnotation> annotation;
    if (cfg.t_change_seconds) {
        const int t_star = static_cast<int>(std::round(*cfg.t_change_seconds / cfg.dt)) - tau;
        annotation = ChangePointAnnotation{t_star};
    }
    return EntityTensor(std::move(per_entity), cfg.dt, annotation);
}

}  // namespace qcpd
