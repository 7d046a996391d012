#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "qcpd/rng.hpp"
#include "qcpd/tensor.hpp"

namespace qcpd_test {

// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("qcpd_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline qcpd::EntityTensor random_tensor(int F, int T, int P, uint64_t seed,
                                        bool annotated = false) {
    qcpd::Rng rng(seed);
    std::vector<Eigen::MatrixXd> per_entity;
    for (int p = 0; p < P; ++p) {
        Eigen::MatrixXd m(F, T);
        for (int s = 0; s < F; ++s)
            for (int t = 0; t < T; ++t) m(s, t) = rng.normal(0.0, 3.0);
        per_entity.push_back(std::move(m));
    }
    std::optional<qcpd::ChangePointAnnotation> ann;
    if (annotated) ann = qcpd::ChangePointAnnotation{T / 2 + 1};
    return qcpd::EntityTensor(std::move(per_entity), 0.5, ann);
}

inline bool tensors_identical(const qcpd::EntityTensor& a, const qcpd::EntityTensor& b) {
    if (a.sensors() != b.sensors() || a.ticks() != b.ticks() || a.entities() != b.entities())
        return false;
    if (a.dt() != b.dt()) return false;
    if (a.annotation().has_value() != b.annotation().has_value()) return false;
    if (a.annotation() &&
        a.annotation()->true_change_index != b.annotation()->true_change_index)
        return false;
    for (int p = 1; p <= a.entities(); ++p)
        if (a.entity(p) != b.entity(p)) return false;
    for (int p = 1; p <= a.entities(); ++p)
        for (int t = 1; t <= a.ticks(); ++t)
            if (a.active(t, p) != b.active(t, p)) return false;
    return true;
}

}  // namespace qcpd_test
