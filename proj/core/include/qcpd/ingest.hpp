#pragma once

#include "qcpd/tensor.hpp"

namespace qcpd {

// Savitzky-Golay smoothing: at each index, fit a least-squares polynomial of
// the given order over the surrounding window and take its value there.
// window_len must be odd, poly_order < window_len, T >= window_len. At the
// sequence edges the fit runs on the truncated one-sided neighborhood rather
// than padded data. Output length equals input length.
ScalarSeries savgol_smooth(const ScalarSeries& series, int window_len, int poly_order);

// Second derivative estimate: central stencil (y_{t+1} - 2 y_t + y_{t-1})/dt^2
// in the interior, second-order one-sided stencils at the endpoints.
// Requires T >= 3; output length equals input length.
ScalarSeries differentiate2(const ScalarSeries& series);

// Position trajectories (F = 3 channels) to acceleration: per entity and axis,
// smooth then differentiate twice. Preserves T, P, dt, annotation and mask.
EntityTensor positions_to_accel(const EntityTensor& tensor, int sg_window, int sg_order);

}  // namespace qcpd
