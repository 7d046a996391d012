#include <doctest.h>

#include "qcpd/error.hpp"
#include "qcpd/score.hpp"
#include "test_util.hpp"

using namespace qcpd;

namespace {

DenseAutoencoder identity_model(int d) {
    // Single linear layer with identity weights: exact reconstruction for
    // any input, positive or negative.
    std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Identity(d, d)};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(d)};
    return DenseAutoencoder({d, d}, 0.0, std::move(w), std::move(b));
}

DenseAutoencoder zero_output_model(int d) {
    std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Zero(d, d)};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(d)};
    return DenseAutoencoder({d, d}, 0.0, std::move(w), std::move(b));
}

}  // namespace

TEST_CASE("identity reconstruction scores zero everywhere") {
    const auto tensor = qcpd_test::random_tensor(2, 12, 3, 5);
    const int w = 4;
    const auto model = identity_model(2 * w);
    const IdfnSeries series = idfn_series(model, tensor, NormStats::identity(2), w);
    for (int t = 1; t <= 12; ++t)
        for (int p = 1; p <= 3; ++p) CHECK(series.at(t, p) == 0.0);
}

TEST_CASE("zero-output model scores the mean square of the last column") {
    const auto tensor = qcpd_test::random_tensor(3, 10, 2, 6);
    const int w = 5;
    const auto model = zero_output_model(3 * w);
    for (int t = 1; t <= 10; ++t)
        for (int p = 1; p <= 2; ++p) {
            double expected = 0.0;
            for (int s = 1; s <= 3; ++s)
                expected += tensor.at(s, t, p) * tensor.at(s, t, p);
            expected /= 3.0;
            CHECK(idfn_at(model, tensor, NormStats::identity(3), t, p, w) ==
                  doctest::Approx(expected).epsilon(1e-14));
        }
}

TEST_CASE("two-sensor hand example gives exactly one") {
    // x = (1, -1) on the last column, reconstruction zero: (1 + 1)/2 = 1.
    Eigen::MatrixXd data(2, 1);
    data << 1.0, -1.0;
    const EntityTensor tensor({data}, 1.0);
    const auto model = zero_output_model(2);
    CHECK(idfn_at(model, tensor, NormStats::identity(2), 1, 1, 1) == 1.0);
}

TEST_CASE("scores are non-negative and zero only for exact reconstruction") {
    const auto tensor = qcpd_test::random_tensor(2, 8, 2, 9);
    const DenseAutoencoder model({6, 4, 6}, 0.0, 3);
    const IdfnSeries series = idfn_series(model, tensor, NormStats::identity(2), 3);
    for (int t = 1; t <= 8; ++t)
        for (int p = 1; p <= 2; ++p) CHECK(series.at(t, p) >= 0.0);
}

TEST_CASE("streaming equals batch evaluation exactly") {
    const auto tensor = qcpd_test::random_tensor(2, 15, 3, 44);
    const DenseAutoencoder model({8, 5, 8}, 0.0, 21);
    const NormStats stats = [&] {
        NormStats s = NormStats::identity(2);
        s.mu << 0.3, -0.1;
        s.sigma << 1.7, 0.6;
        return s;
    }();
    const int w = 4;
    const IdfnSeries batch = idfn_series(model, tensor, stats, w);
    // Stream tick by tick through idfn_at: same arithmetic, same doubles.
    for (int t = 1; t <= 15; ++t)
        for (int p = 1; p <= 3; ++p)
            CHECK(idfn_at(model, tensor, stats, t, p, w) == batch.at(t, p));
}

TEST_CASE("permuting entities permutes the score columns") {
    const auto tensor = qcpd_test::random_tensor(1, 10, 4, 31);
    const DenseAutoencoder model({3, 2, 3}, 0.0, 8);
    const IdfnSeries base = idfn_series(model, tensor, NormStats::identity(1), 3);

    std::vector<Eigen::MatrixXd> permuted{tensor.entity(3), tensor.entity(1), tensor.entity(4),
                                          tensor.entity(2)};
    const EntityTensor shuffled(std::move(permuted), tensor.dt());
    const IdfnSeries perm = idfn_series(model, shuffled, NormStats::identity(1), 3);
    const int source[] = {3, 1, 4, 2};
    for (int p = 0; p < 4; ++p)
        for (int t = 1; t <= 10; ++t) CHECK(perm.at(t, p + 1) == base.at(t, source[p]));
}

TEST_CASE("masked cells are excluded from rows") {
    std::vector<Eigen::MatrixXd> per_entity(2, Eigen::MatrixXd::Ones(1, 3));
    std::vector<std::vector<uint8_t>> mask{{1, 0, 1}, {1, 1, 1}};
    const EntityTensor tensor(std::move(per_entity), 1.0, std::nullopt, mask);
    const auto model = zero_output_model(2);
    const IdfnSeries series = idfn_series(model, tensor, NormStats::identity(1), 2);
    CHECK(series.active_row(2).size() == 1);
    CHECK(series.active_row(1).size() == 2);
}

TEST_CASE("model and window length must match") {
    const auto tensor = qcpd_test::random_tensor(2, 6, 1, 2);
    const auto model = zero_output_model(4);
    CHECK_THROWS_AS(idfn_at(model, tensor, NormStats::identity(2), 1, 1, 3), ValidationError);
    CHECK_THROWS_AS(idfn_at(model, tensor, NormStats::identity(2), 7, 1, 2), ValidationError);
}
