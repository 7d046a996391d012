#include "qcpd/ingest.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "qcpd/error.hpp"

namespace qcpd {

namespace {

// Least-squares polynomial value at x = 0 given samples (offsets, values).
double polyfit_at_zero(const Eigen::VectorXd& offsets, const Eigen::VectorXd& values,
                       int order) {
    Eigen::MatrixXd design(offsets.size(), order + 1);
    for (Eigen::Index i = 0; i < offsets.size(); ++i) {
        double pw = 1.0;
        for (int j = 0; j <= order; ++j) {
            design(i, j) = pw;
            pw *= offsets[i];
        }
    }
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(values);
    return coef[0];
}

}  // namespace

ScalarSeries savgol_smooth(const ScalarSeries& series, int window_len, int poly_order) {
    const int T = series.ticks();
    if (window_len < 1 || window_len % 2 == 0)
        throw ValidationError("savgol_smooth: window_len must be odd and >= 1");
    if (poly_order < 0 || poly_order >= window_len)
        throw ValidationError("savgol_smooth: poly_order must be < window_len");
    if (T < window_len)
        throw ValidationError("savgol_smooth: series shorter than window");

    const int half = (window_len - 1) / 2;
    ScalarSeries out;
    out.values.resize(T);
    out.dt = series.dt;
    out.kind = series.kind;

    for (int t = 0; t < T; ++t) {
        int lo = std::max(0, t - half);
        int hi = std::min(T - 1, t + half);
        // A truncated edge neighborhood can undershoot the fit order; widen
        // toward the interior until the fit is determined.
        while (hi - lo + 1 <= poly_order) {
            if (lo > 0) --lo;
            if (hi < T - 1) ++hi;
        }
        const int n = hi - lo + 1;
        Eigen::VectorXd offsets(n), values(n);
        for (int i = 0; i < n; ++i) {
            offsets[i] = static_cast<double>(lo + i - t);
            values[i] = series.values[lo + i];
        }
        out.values[t] = polyfit_at_zero(offsets, values, poly_order);
    }
    return out;
}

ScalarSeries differentiate2(const ScalarSeries& series) {
    const int T = series.ticks();
    if (T < 3) throw ValidationError("differentiate2: need T >= 3");
    const double inv_dt2 = 1.0 / (series.dt * series.dt);
    const auto& y = series.values;

    ScalarSeries out;
    out.values.resize(T);
    out.dt = series.dt;
    out.kind = series.kind;

    for (int t = 1; t + 1 < T; ++t)
        out.values[t] = (y[t + 1] - 2.0 * y[t] + y[t - 1]) * inv_dt2;
    if (T >= 4) {
        out.values[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) * inv_dt2;
        out.values[T - 1] =
            (2.0 * y[T - 1] - 5.0 * y[T - 2] + 4.0 * y[T - 3] - y[T - 4]) * inv_dt2;
    } else {
        out.values[0] = (y[2] - 2.0 * y[1] + y[0]) * inv_dt2;
        out.values[T - 1] = out.values[0];
    }
    return out;
}

EntityTensor positions_to_accel(const EntityTensor& tensor, int sg_window, int sg_order) {
    if (tensor.sensors() != 3)
        throw ValidationError("positions_to_accel: expected F = 3 position channels");

    std::vector<Eigen::MatrixXd> per_entity;
    per_entity.reserve(tensor.entities());
    for (int p = 1; p <= tensor.entities(); ++p) {
        Eigen::MatrixXd accel(3, tensor.ticks());
        for (int s = 0; s < 3; ++s) {
            ScalarSeries axis;
            axis.dt = tensor.dt();
            axis.values.assign(tensor.entity(p).row(s).begin(), tensor.entity(p).row(s).end());
            const ScalarSeries smoothed = savgol_smooth(axis, sg_window, sg_order);
            const ScalarSeries acc = differentiate2(smoothed);
            for (int t = 0; t < tensor.ticks(); ++t) accel(s, t) = acc.values[t];
        }
        per_entity.push_back(std::move(accel));
    }

    std::optional<std::vector<std::vector<uint8_t>>> mask;
    if (tensor.has_mask()) mask = tensor.mask();
    return EntityTensor(std::move(per_entity), tensor.dt(), tensor.annotation(), std::move(mask));
}

}  // namespace qcpd
