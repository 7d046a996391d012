#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qcpd {

// All public indices (time t, sensor s, entity p) are 1-based; internal
// storage is 0-based. Types in this header are immutable after construction
// and safe to share across threads.

// Sample index of the true change, absent for normal sequences.
struct ChangePointAnnotation {
    int true_change_index = 0;  // in [1, T]
};

class EntityTensor {
public:
    // One F x T matrix per entity, all the same shape.
    EntityTensor(std::vector<Eigen::MatrixXd> per_entity, double dt,
                 std::optional<ChangePointAnnotation> annotation = std::nullopt,
                 std::optional<std::vector<std::vector<uint8_t>>> active_mask = std::nullopt);

    int sensors() const { return n_sensors_; }   // F
    int ticks() const { return n_ticks_; }       // T
    int entities() const { return static_cast<int>(per_entity_.size()); }  // P
    double dt() const { return dt_; }

    const std::optional<ChangePointAnnotation>& annotation() const { return annotation_; }

    // x_{s,t,p}; 1-based everywhere.
    double at(int sensor, int t, int entity) const;

    // F x T block for one entity.
    const Eigen::MatrixXd& entity(int p) const;

    // True when entity p reports at tick t. Without a mask every entity is
    // always active.
    bool active(int t, int entity) const;
    bool has_mask() const { return mask_.has_value(); }
    const std::vector<std::vector<uint8_t>>& mask() const { return *mask_; }

private:
    std::vector<Eigen::MatrixXd> per_entity_;
    double dt_;
    std::optional<ChangePointAnnotation> annotation_;
    // mask_[p][t] with 0-based indices.
    std::optional<std::vector<std::vector<uint8_t>>> mask_;
    int n_sensors_ = 0;
    int n_ticks_ = 0;
};

// F x P cross-section at time t, by value.
Eigen::MatrixXd slice_time(const EntityTensor& tensor, int t);

// Overlapping window of length w ending at end_index, for one entity.
// Columns before t = 1 are replication-padded with the first observation.
struct Window {
    Eigen::MatrixXd values;  // F x w
    int end_index = 0;       // 1-based time of the last column
    int entity = 0;          // 1-based
};

// Per-entity, per-time reconstruction-error scores.
class IdfnSeries {
public:
    IdfnSeries(Eigen::MatrixXd scores, double dt,
               std::optional<std::vector<std::vector<uint8_t>>> active_mask = std::nullopt);

    int ticks() const { return static_cast<int>(scores_.rows()); }
    int entities() const { return static_cast<int>(scores_.cols()); }
    double dt() const { return dt_; }

    double at(int t, int entity) const;  // 1-based
    const Eigen::MatrixXd& scores() const { return scores_; }

    bool active(int t, int entity) const;
    bool has_mask() const { return mask_.has_value(); }

    // IDfN values of the active entities at tick t, in entity order.
    std::vector<double> active_row(int t) const;

private:
    Eigen::MatrixXd scores_;  // T x P
    double dt_;
    std::optional<std::vector<std::vector<uint8_t>>> mask_;  // [p][t], 0-based
};

enum class SeriesKind {
    swas_mean,
    swas_variance,
    deviation_mean,
    deviation_variance,
    deviation_wasserstein,
    cusum,
    density,
};

std::string series_kind_name(SeriesKind kind);
SeriesKind series_kind_from_name(const std::string& name);

// Scalar time series. Values must be finite; a zero-length series is only
// produced by detection over an empty stream.
struct ScalarSeries {
    std::vector<double> values;
    double dt = 1.0;
    SeriesKind kind = SeriesKind::cusum;

    int ticks() const { return static_cast<int>(values.size()); }
    void validate() const;
};

// Result of one online detection pass.
struct DetectionOutcome {
    std::optional<int> stop_index;    // t-hat, 1-based; absent when never fired
    ScalarSeries cusum;               // C_t
    ScalarSeries density_at_current;  // p-hat_{t-1}(C~_t); 0 where history was empty
    double threshold = 0.0;           // delta_thr
    int warmup_samples = 0;

    void validate() const;
};

}  // namespace qcpd
