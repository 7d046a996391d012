#include <doctest.h>

#include "qcpd/error.hpp"
#include "qcpd/tensor.hpp"
#include "qcpd/tensor_io.hpp"
#include "test_util.hpp"

using namespace qcpd;
using qcpd_test::random_tensor;
using qcpd_test::TempDir;

namespace {

EntityTensor counting_tensor() {
    // x_{1,t,p} = t for F=1, T=3, P=2.
    std::vector<Eigen::MatrixXd> per_entity;
    for (int p = 0; p < 2; ++p) {
        Eigen::MatrixXd m(1, 3);
        m << 1, 2, 3;
        per_entity.push_back(m);
    }
    return EntityTensor(std::move(per_entity), 1.0);
}

}  // namespace

TEST_CASE("slice_time returns the cross-section at t") {
    const auto tensor = counting_tensor();
    const Eigen::MatrixXd slice = slice_time(tensor, 2);
    REQUIRE(slice.rows() == 1);
    REQUIRE(slice.cols() == 2);
    CHECK(slice(0, 0) == 2.0);
    CHECK(slice(0, 1) == 2.0);
}

TEST_CASE("slice_time rejects out-of-range indices") {
    const auto tensor = counting_tensor();
    CHECK_THROWS_AS(slice_time(tensor, 0), ValidationError);
    CHECK_THROWS_AS(slice_time(tensor, 4), ValidationError);
}

TEST_CASE("slice_time picks exactly the values at t on a 2x2x2 tensor") {
    // Distinct values 1..8: entity 1 holds [[1,2],[3,4]], entity 2 [[5,6],[7,8]]
    // with columns indexed by time.
    std::vector<Eigen::MatrixXd> per_entity(2, Eigen::MatrixXd(2, 2));
    per_entity[0] << 1, 2, 3, 4;
    per_entity[1] << 5, 6, 7, 8;
    const EntityTensor tensor(std::move(per_entity), 1.0);

    const Eigen::MatrixXd at1 = slice_time(tensor, 1);
    CHECK(at1(0, 0) == 1.0);  // s=1, p=1
    CHECK(at1(1, 0) == 3.0);  // s=2, p=1
    CHECK(at1(0, 1) == 5.0);  // s=1, p=2
    CHECK(at1(1, 1) == 7.0);  // s=2, p=2
}

TEST_CASE("slice_time over all t reconstructs the tensor") {
    const auto tensor = random_tensor(3, 7, 4, 99);
    for (int t = 1; t <= tensor.ticks(); ++t) {
        const Eigen::MatrixXd slice = slice_time(tensor, t);
        for (int s = 1; s <= tensor.sensors(); ++s)
            for (int p = 1; p <= tensor.entities(); ++p)
                CHECK(slice(s - 1, p - 1) == tensor.at(s, t, p));
    }
}

TEST_CASE("tensor invariants are enforced") {
    CHECK_THROWS_AS(EntityTensor({}, 1.0), ValidationError);
    CHECK_THROWS_AS(EntityTensor({Eigen::MatrixXd::Zero(1, 3)}, 0.0), ValidationError);
    CHECK_THROWS_AS(EntityTensor({Eigen::MatrixXd::Zero(1, 3)}, -1.0), ValidationError);

    std::vector<Eigen::MatrixXd> bad{Eigen::MatrixXd::Zero(1, 3)};
    bad[0](0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(EntityTensor(std::move(bad), 1.0), ValidationError);

    CHECK_THROWS_AS(EntityTensor({Eigen::MatrixXd::Zero(1, 3)}, 1.0,
                                 ChangePointAnnotation{4}),
                    ValidationError);
    CHECK_THROWS_AS(EntityTensor({Eigen::MatrixXd::Zero(1, 3)}, 1.0,
                                 ChangePointAnnotation{0}),
                    ValidationError);

    // Mismatched per-entity shapes.
    CHECK_THROWS_AS(
        EntityTensor({Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Zero(1, 4)}, 1.0),
        ValidationError);
}

TEST_CASE("serialize then deserialize is bit-identical") {
    TempDir dir("tensor_rt");
    // Values spanning many magnitudes, including negatives and tiny/huge.
    auto tensor = random_tensor(2, 9, 3, 7, /*annotated=*/true);
    {
        std::vector<Eigen::MatrixXd> per_entity;
        for (int p = 1; p <= tensor.entities(); ++p) per_entity.push_back(tensor.entity(p));
        per_entity[0](0, 0) = 1e-300;
        per_entity[1](1, 2) = -9.87654321e299;
        per_entity[2](0, 8) = 0.1 + 0.2;  // not exactly representable sum
        tensor = EntityTensor(std::move(per_entity), tensor.dt(), tensor.annotation());
    }
    save_tensor(tensor, dir.path());
    const EntityTensor loaded = load_tensor(dir.path());
    CHECK(qcpd_test::tensors_identical(tensor, loaded));
}

TEST_CASE("round trip preserves the entity mask") {
    std::vector<Eigen::MatrixXd> per_entity(2, Eigen::MatrixXd::Ones(1, 4));
    std::vector<std::vector<uint8_t>> mask{{1, 1, 0, 1}, {0, 1, 1, 1}};
    const EntityTensor tensor(std::move(per_entity), 2.0, std::nullopt, mask);

    TempDir dir("tensor_mask");
    save_tensor(tensor, dir.path());
    const EntityTensor loaded = load_tensor(dir.path());
    REQUIRE(loaded.has_mask());
    for (int p = 1; p <= 2; ++p)
        for (int t = 1; t <= 4; ++t) CHECK(loaded.active(t, p) == tensor.active(t, p));
    // Masked-out cells are not serialized; active values must round-trip.
    CHECK(loaded.at(1, 1, 1) == 1.0);
}

TEST_CASE("scalar series validation") {
    ScalarSeries s;
    s.values = {1.0, 2.0};
    s.dt = 0.1;
    CHECK_NOTHROW(s.validate());
    s.values.push_back(std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("detection outcome stop index must lie past the warmup") {
    DetectionOutcome outcome;
    outcome.cusum.values = {0.1, 0.2, 0.3};
    outcome.cusum.dt = 1.0;
    outcome.density_at_current = outcome.cusum;
    outcome.warmup_samples = 2;
    outcome.stop_index = 3;
    CHECK_NOTHROW(outcome.validate());
    outcome.stop_index = 2;  // inside warmup
    CHECK_THROWS_AS(outcome.validate(), ValidationError);
}

TEST_CASE("series kind names round-trip") {
    for (const auto kind :
         {SeriesKind::swas_mean, SeriesKind::swas_variance, SeriesKind::deviation_mean,
          SeriesKind::deviation_variance, SeriesKind::deviation_wasserstein, SeriesKind::cusum,
          SeriesKind::density})
        CHECK(series_kind_from_name(series_kind_name(kind)) == kind);
    CHECK_THROWS_AS(series_kind_from_name("nope"), ValidationError);
}
