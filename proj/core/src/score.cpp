#include "qcpd/score.hpp"

#include "qcpd/error.hpp"

namespace qcpd {

double idfn_from_normalized_window(const DenseAutoencoder& model, const Eigen::MatrixXd& window) {
    const int F = static_cast<int>(window.rows());
    const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(window.data(), window.size());
    const Eigen::VectorXd recon = model.forward(flat);
    // Only the current (last) window column contributes.
    const Eigen::VectorXd diff = recon.tail(F) - flat.tail(F);
    return diff.squaredNorm() / static_cast<double>(F);
}

namespace {

Eigen::MatrixXd normalized_window(const EntityTensor& tensor, const NormStats& stats, int t,
                                  int p, int w) {
    Eigen::MatrixXd win = make_window(tensor, t, p, w).values;
    for (int s = 0; s < tensor.sensors(); ++s)
        win.row(s) = (win.row(s).array() - stats.mu[s]) / stats.sigma[s];
    return win;
}

}  // namespace

double idfn_at(const DenseAutoencoder& model, const EntityTensor& tensor, const NormStats& stats,
               int t, int p, int w) {
    if (stats.mu.size() != tensor.sensors())
        throw ValidationError("idfn_at: stats sensor count mismatch");
    if (model.input_size() != tensor.sensors() * w)
        throw ValidationError("idfn_at: model window length mismatch");
    return idfn_from_normalized_window(model, normalized_window(tensor, stats, t, p, w));
}

IdfnSeries idfn_series(const DenseAutoencoder& model, const EntityTensor& tensor,
                       const NormStats& stats, int w) {
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(tensor.ticks(), tensor.entities());
    for (int p = 1; p <= tensor.entities(); ++p)
        for (int t = 1; t <= tensor.ticks(); ++t)
            if (tensor.active(t, p)) scores(t - 1, p - 1) = idfn_at(model, tensor, stats, t, p, w);

    std::optional<std::vector<std::vector<uint8_t>>> mask;
    if (tensor.has_mask()) mask = tensor.mask();
    return IdfnSeries(std::move(scores), tensor.dt(), std::move(mask));
}

}  // namespace qcpd
