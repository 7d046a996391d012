#pragma once

#include <span>

#include "qcpd/tensor.hpp"

namespace qcpd {

// Per-sensor z-score statistics fitted on training data.
struct NormStats {
    Eigen::VectorXd mu;     // [F]
    Eigen::VectorXd sigma;  // [F], all > 0

    static NormStats identity(int sensors);
};

// Population mean/std per sensor, pooled over all time steps and entities
// (masked-out samples excluded). A constant channel is an error: its z-score
// is undefined and the sensor must be dropped upstream.
NormStats fit_norm(const EntityTensor& train);

// Pooled fit over several training tensors with matching F.
NormStats fit_norm_pooled(std::span<const EntityTensor> train);

// x <- (x - mu_s) / sigma_s elementwise. Stats always come from training data.
EntityTensor apply_norm(const EntityTensor& tensor, const NormStats& stats);

// Inverse of apply_norm.
EntityTensor denormalize(const EntityTensor& tensor, const NormStats& stats);

// Window of length w ending at t for entity p, replication-padded before the
// first observation. 1-based t and p.
Window make_window(const EntityTensor& tensor, int t, int p, int w);

// Column-major flattening of an F x w window: time-step columns stacked in
// order, F values each. The autoencoder consumes and emits this layout.
Eigen::VectorXd flatten_window(const Window& window);

}  // namespace qcpd
