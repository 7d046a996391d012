#pragma once

#include "qcpd/autoencoder.hpp"
#include "qcpd/preprocess.hpp"
#include "qcpd/tensor.hpp"

namespace qcpd {

// Reconstruction error of a normalized F x w window, keeping only the last
// time-step column: (1/F) * sum_s (xhat_s - x_s)^2.
double idfn_from_normalized_window(const DenseAutoencoder& model, const Eigen::MatrixXd& window);

// IDfN score for entity p at time t. The window is replication-padded,
// normalized with the training stats, reconstructed, and scored on its last
// column only. Pass NormStats::identity(F) for pre-normalized data.
double idfn_at(const DenseAutoencoder& model, const EntityTensor& tensor, const NormStats& stats,
               int t, int p, int w);

// idfn_at over every (t, p). Entity masks propagate to the result; inactive
// cells hold zero and are excluded by mask-aware consumers. Identical to
// per-tick streaming evaluation.
IdfnSeries idfn_series(const DenseAutoencoder& model, const EntityTensor& tensor,
                       const NormStats& stats, int w);

}  // namespace qcpd
