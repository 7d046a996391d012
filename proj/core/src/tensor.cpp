#include "qcpd/tensor.hpp"

#include <cmath>

#include "qcpd/error.hpp"

namespace qcpd {

EntityTensor::EntityTensor(std::vector<Eigen::MatrixXd> per_entity, double dt,
                           std::optional<ChangePointAnnotation> annotation,
                           std::optional<std::vector<std::vector<uint8_t>>> active_mask)
    : per_entity_(std::move(per_entity)),
      dt_(dt),
      annotation_(annotation),
      mask_(std::move(active_mask)) {
    if (per_entity_.empty()) throw ValidationError("EntityTensor: P >= 1 required");
    n_sensors_ = static_cast<int>(per_entity_[0].rows());
    n_ticks_ = static_cast<int>(per_entity_[0].cols());
    if (n_sensors_ < 1 || n_ticks_ < 1)
        throw ValidationError("EntityTensor: F >= 1 and T >= 1 required");
    if (!(dt_ > 0.0)) throw ValidationError("EntityTensor: dt must be > 0");
    for (const auto& m : per_entity_) {
        if (m.rows() != n_sensors_ || m.cols() != n_ticks_)
            throw ValidationError("EntityTensor: entities must share the same F x T shape");
        if (!m.allFinite()) throw ValidationError("EntityTensor: non-finite value");
    }
    if (annotation_) {
        const int t = annotation_->true_change_index;
        if (t < 1 || t > n_ticks_)
            throw ValidationError("EntityTensor: change index out of [1, T]");
    }
    if (mask_) {
        if (static_cast<int>(mask_->size()) != entities())
            throw ValidationError("EntityTensor: mask must have one row per entity");
        for (const auto& row : *mask_)
            if (static_cast<int>(row.size()) != n_ticks_)
                throw ValidationError("EntityTensor: mask row length must equal T");
    }
}

double EntityTensor::at(int sensor, int t, int entity) const {
    if (sensor < 1 || sensor > n_sensors_) throw ValidationError("sensor index out of range");
    if (t < 1 || t > n_ticks_) throw ValidationError("time index out of range");
    if (entity < 1 || entity > entities()) throw ValidationError("entity index out of range");
    return per_entity_[entity - 1](sensor - 1, t - 1);
}

const Eigen::MatrixXd& EntityTensor::entity(int p) const {
    if (p < 1 || p > entities()) throw ValidationError("entity index out of range");
    return per_entity_[p - 1];
}

bool EntityTensor::active(int t, int entity) const {
    if (t < 1 || t > n_ticks_) throw ValidationError("time index out of range");
    if (entity < 1 || entity > entities()) throw ValidationError("entity index out of range");
    if (!mask_) return true;
    return (*mask_)[entity - 1][t - 1] != 0;
}

Eigen::MatrixXd slice_time(const EntityTensor& tensor, int t) {
    if (t < 1 || t > tensor.ticks()) throw ValidationError("slice_time: index out of range");
    Eigen::MatrixXd out(tensor.sensors(), tensor.entities());
    for (int p = 1; p <= tensor.entities(); ++p)
        out.col(p - 1) = tensor.entity(p).col(t - 1);
    return out;
}

IdfnSeries::IdfnSeries(Eigen::MatrixXd scores, double dt,
                       std::optional<std::vector<std::vector<uint8_t>>> active_mask)
    : scores_(std::move(scores)), dt_(dt), mask_(std::move(active_mask)) {
    if (scores_.rows() < 1 || scores_.cols() < 1)
        throw ValidationError("IdfnSeries: T >= 1 and P >= 1 required");
    if (!(dt_ > 0.0)) throw ValidationError("IdfnSeries: dt must be > 0");
    if (!scores_.allFinite()) throw ValidationError("IdfnSeries: non-finite score");
    if ((scores_.array() < 0.0).any()) throw ValidationError("IdfnSeries: negative score");
    if (mask_) {
        if (static_cast<int>(mask_->size()) != entities())
            throw ValidationError("IdfnSeries: mask must have one row per entity");
        for (const auto& row : *mask_)
            if (static_cast<int>(row.size()) != ticks())
                throw ValidationError("IdfnSeries: mask row length must equal T");
    }
}

double IdfnSeries::at(int t, int entity) const {
    if (t < 1 || t > ticks()) throw ValidationError("time index out of range");
    if (entity < 1 || entity > entities()) throw ValidationError("entity index out of range");
    return scores_(t - 1, entity - 1);
}

bool IdfnSeries::active(int t, int entity) const {
    if (t < 1 || t > ticks()) throw ValidationError("time index out of range");
    if (entity < 1 || entity > entities()) throw ValidationError("entity index out of range");
    if (!mask_) return true;
    return (*mask_)[entity - 1][t - 1] != 0;
}

std::vector<double> IdfnSeries::active_row(int t) const {
    std::vector<double> row;
    row.reserve(entities());
    for (int p = 1; p <= entities(); ++p)
        if (active(t, p)) row.push_back(at(t, p));
    return row;
}

std::string series_kind_name(SeriesKind kind) {
    switch (kind) {
        case SeriesKind::swas_mean: return "swas_mean";
        case SeriesKind::swas_variance: return "swas_variance";
        case SeriesKind::deviation_mean: return "deviation_mean";
        case SeriesKind::deviation_variance: return "deviation_variance";
        case SeriesKind::deviation_wasserstein: return "deviation_wasserstein";
        case SeriesKind::cusum: return "cusum";
        case SeriesKind::density: return "density";
    }
    throw ValidationError("unknown series kind");
}

SeriesKind series_kind_from_name(const std::string& name) {
    if (name == "swas_mean") return SeriesKind::swas_mean;
    if (name == "swas_variance") return SeriesKind::swas_variance;
    if (name == "deviation_mean") return SeriesKind::deviation_mean;
    if (name == "deviation_variance") return SeriesKind::deviation_variance;
    if (name == "deviation_wasserstein") return SeriesKind::deviation_wasserstein;
    if (name == "cusum") return SeriesKind::cusum;
    if (name == "density") return SeriesKind::density;
    throw ValidationError("unknown series kind: " + name);
}

void ScalarSeries::validate() const {
    if (!(dt > 0.0)) throw ValidationError("ScalarSeries: dt must be > 0");
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("ScalarSeries: non-finite value");
}

void DetectionOutcome::validate() const {
    cusum.validate();
    density_at_current.validate();
    if (stop_index) {
        if (*stop_index <= warmup_samples || *stop_index > cusum.ticks())
            throw ValidationError("DetectionOutcome: stop index outside (warmup, T]");
    }
}

}  // namespace qcpd
