#include "qcpd/preprocess.hpp"

#include <cmath>
#include <string>

#include "qcpd/error.hpp"

namespace qcpd {

NormStats NormStats::identity(int sensors) {
    NormStats s;
    s.mu = Eigen::VectorXd::Zero(sensors);
    s.sigma = Eigen::VectorXd::Ones(sensors);
    return s;
}

NormStats fit_norm_pooled(std::span<const EntityTensor> train) {
    if (train.empty()) throw ValidationError("fit_norm: no training data");
    const int F = train[0].sensors();
    for (const auto& t : train)
        if (t.sensors() != F) throw ValidationError("fit_norm: sensor count mismatch");

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(F);
    long count = 0;
    for (const auto& tensor : train)
        for (int p = 1; p <= tensor.entities(); ++p)
            for (int t = 1; t <= tensor.ticks(); ++t) {
                if (!tensor.active(t, p)) continue;
                sum += tensor.entity(p).col(t - 1);
                ++count;
            }
    if (count == 0) throw ValidationError("fit_norm: no active samples");
    const Eigen::VectorXd mu = sum / static_cast<double>(count);

    Eigen::VectorXd sq = Eigen::VectorXd::Zero(F);
    for (const auto& tensor : train)
        for (int p = 1; p <= tensor.entities(); ++p)
            for (int t = 1; t <= tensor.ticks(); ++t) {
                if (!tensor.active(t, p)) continue;
                const Eigen::VectorXd d = tensor.entity(p).col(t - 1) - mu;
                sq += d.cwiseProduct(d);
            }

    NormStats stats;
    stats.mu = mu;
    stats.sigma = (sq / static_cast<double>(count)).cwiseSqrt();
    for (int s = 0; s < F; ++s) {
        // Accumulated rounding can leave a constant channel with a nonzero
        // but negligible variance; treat those as constant too.
        const double floor = 1e-12 * std::max(1.0, std::abs(stats.mu[s]));
        if (stats.sigma[s] <= floor)
            throw ValidationError("fit_norm: constant channel, sensor " + std::to_string(s + 1) +
                                  " has zero variance");
    }
    return stats;
}

NormStats fit_norm(const EntityTensor& train) {
    return fit_norm_pooled(std::span<const EntityTensor>(&train, 1));
}

namespace {

EntityTensor transform(const EntityTensor& tensor, const NormStats& stats, bool forward) {
    if (stats.mu.size() != tensor.sensors() || stats.sigma.size() != tensor.sensors())
        throw ValidationError("apply_norm: sensor count mismatch");
    std::vector<Eigen::MatrixXd> per_entity;
    per_entity.reserve(tensor.entities());
    for (int p = 1; p <= tensor.entities(); ++p) {
        Eigen::MatrixXd m = tensor.entity(p);
        for (int s = 0; s < tensor.sensors(); ++s) {
            if (forward)
                m.row(s) = (m.row(s).array() - stats.mu[s]) / stats.sigma[s];
            else
                m.row(s) = m.row(s).array() * stats.sigma[s] + stats.mu[s];
        }
        per_entity.push_back(std::move(m));
    }
    std::optional<std::vector<std::vector<uint8_t>>> mask;
    if (tensor.has_mask()) mask = tensor.mask();
    return EntityTensor(std::move(per_entity), tensor.dt(), tensor.annotation(), std::move(mask));
}

}  // namespace

EntityTensor apply_norm(const EntityTensor& tensor, const NormStats& stats) {
    return transform(tensor, stats, true);
}

EntityTensor denormalize(const EntityTensor& tensor, const NormStats& stats) {
    return transform(tensor, stats, false);
}

Window make_window(const EntityTensor& tensor, int t, int p, int w) {
    if (t < 1 || t > tensor.ticks()) throw ValidationError("make_window: t out of range");
    if (p < 1 || p > tensor.entities()) throw ValidationError("make_window: entity out of range");
    if (w < 1) throw ValidationError("make_window: w >= 1 required");

    Window win;
    win.values.resize(tensor.sensors(), w);
    win.end_index = t;
    win.entity = p;
    const auto& m = tensor.entity(p);
    for (int j = 0; j < w; ++j) {
        const int src = t - w + 1 + j;             // 1-based source column
        const int clamped = std::max(src, 1) - 1;  // replication padding before t = 1
        win.values.col(j) = m.col(clamped);
    }
    return win;
}

Eigen::VectorXd flatten_window(const Window& window) {
    return Eigen::Map<const Eigen::VectorXd>(window.values.data(), window.values.size());
}

}  // namespace qcpd
