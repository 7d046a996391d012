#include <doctest.h>

#include <cmath>
#include <fstream>

#include "qcpd/error.hpp"
#include "qcpd/ingest.hpp"
#include "qcpd/rng.hpp"
#include "qcpd/tensor_io.hpp"
#include "test_util.hpp"

using namespace qcpd;
using qcpd_test::TempDir;

namespace {

ScalarSeries series_of(std::vector<double> values, double dt = 1.0) {
    ScalarSeries s;
    s.values = std::move(values);
    s.dt = dt;
    return s;
}

}  // namespace

TEST_CASE("savgol reproduces polynomials up to its order") {
    std::vector<double> values;
    for (int t = 0; t < 21; ++t) values.push_back(1.5 - 0.7 * t + 0.25 * t * t);
    const ScalarSeries out = savgol_smooth(series_of(values), 5, 2);
    for (int t = 0; t < 21; ++t)
        CHECK(out.values[t] == doctest::Approx(values[t]).epsilon(1e-10));
}

TEST_CASE("savgol preserves constants") {
    const ScalarSeries out = savgol_smooth(series_of({2, 2, 2, 2, 2}), 5, 2);
    for (double v : out.values) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("savgol impulse response center weight is 17/35") {
    const ScalarSeries out = savgol_smooth(series_of({0, 0, 1, 0, 0}), 5, 2);
    CHECK(out.values[2] == doctest::Approx(17.0 / 35.0).epsilon(1e-12));
}

TEST_CASE("savgol is linear") {
    Rng rng(31);
    std::vector<double> x(40), y(40);
    for (auto& v : x) v = rng.normal01();
    for (auto& v : y) v = rng.normal01();
    const double a = 1.7, b = -0.4;

    std::vector<double> combo(40);
    for (int i = 0; i < 40; ++i) combo[i] = a * x[i] + b * y[i];

    const auto sx = savgol_smooth(series_of(x), 9, 2);
    const auto sy = savgol_smooth(series_of(y), 9, 2);
    const auto sc = savgol_smooth(series_of(combo), 9, 2);
    for (int i = 0; i < 40; ++i)
        CHECK(sc.values[i] == doctest::Approx(a * sx.values[i] + b * sy.values[i]).epsilon(1e-10));
}

TEST_CASE("savgol preconditions") {
    CHECK_THROWS_AS(savgol_smooth(series_of({1, 2, 3, 4}), 4, 2), ValidationError);  // even
    CHECK_THROWS_AS(savgol_smooth(series_of({1, 2, 3}), 5, 2), ValidationError);     // short
    CHECK_THROWS_AS(savgol_smooth(series_of({1, 2, 3, 4, 5}), 5, 5), ValidationError);
}

TEST_CASE("differentiate2 is exact for quadratics") {
    std::vector<double> values;
    const double dt = 0.5;
    for (int t = 0; t < 12; ++t) values.push_back(static_cast<double>(t) * t * dt * dt);
    const ScalarSeries out = differentiate2(series_of(values, dt));
    for (int t = 0; t < 12; ++t)  // one-sided endpoint stencils are exact too
        CHECK(out.values[t] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("differentiate2 of a constant is zero") {
    const ScalarSeries out = differentiate2(series_of({3, 3, 3, 3, 3}));
    for (double v : out.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("differentiate2 hand stencil") {
    const ScalarSeries out = differentiate2(series_of({0, 1, 4, 9, 16}));
    CHECK(out.values[1] == doctest::Approx(2.0));
    CHECK(out.values[2] == doctest::Approx(2.0));
    CHECK(out.values[3] == doctest::Approx(2.0));
}

TEST_CASE("differentiate2 of affine series vanishes in the interior") {
    Rng rng(5);
    const double a = rng.normal01(), b = rng.normal01();
    std::vector<double> values;
    for (int t = 0; t < 20; ++t) values.push_back(a + b * t);
    const ScalarSeries out = differentiate2(series_of(values, 0.25));
    for (int t = 1; t < 19; ++t) CHECK(std::abs(out.values[t]) < 1e-10);
}

TEST_CASE("differentiate2 needs three samples") {
    CHECK_THROWS_AS(differentiate2(series_of({1, 2})), ValidationError);
}

TEST_CASE("positions_to_accel preserves shape and annotation") {
    auto tensor = qcpd_test::random_tensor(3, 30, 4, 17, /*annotated=*/true);
    const EntityTensor accel = positions_to_accel(tensor, 9, 2);
    CHECK(accel.sensors() == 3);
    CHECK(accel.ticks() == tensor.ticks());
    CHECK(accel.entities() == tensor.entities());
    CHECK(accel.dt() == tensor.dt());
    REQUIRE(accel.annotation().has_value());
    CHECK(accel.annotation()->true_change_index == tensor.annotation()->true_change_index);
}

TEST_CASE("positions_to_accel requires three channels") {
    const auto tensor = qcpd_test::random_tensor(2, 30, 2, 3);
    CHECK_THROWS_AS(positions_to_accel(tensor, 9, 2), ValidationError);
}

TEST_CASE("load_tensor names the missing sidecar") {
    TempDir dir("ingest_missing");
    CHECK_THROWS_WITH_AS(load_tensor(dir.path()), doctest::Contains("meta.json"),
                         ValidationError);
}

TEST_CASE("load_tensor rejects malformed headers") {
    TempDir dir("ingest_header");
    {
        std::ofstream meta(dir.path() / "meta.json");
        meta << R"({"dt": 1.0, "F": 1, "T": 2, "P": 1, "change_index": null})";
        std::ofstream csv(dir.path() / "data.csv");
        csv << "entity,tick,s1\n1,1,0.5\n1,2,0.25\n";
    }
    CHECK_THROWS_WITH_AS(load_tensor(dir.path()), doctest::Contains("malformed header"),
                         ValidationError);
}

TEST_CASE("load_tensor rejects non-rectangular data without a mask") {
    TempDir dir("ingest_rect");
    {
        std::ofstream meta(dir.path() / "meta.json");
        meta << R"({"dt": 1.0, "F": 1, "T": 2, "P": 2, "change_index": null})";
        std::ofstream csv(dir.path() / "data.csv");
        csv << "entity,time,s1\n1,1,0.5\n1,2,0.25\n2,1,0.125\n";
    }
    CHECK_THROWS_WITH_AS(load_tensor(dir.path()), doctest::Contains("non-rectangular"),
                         ValidationError);
}

TEST_CASE("load_tensor rejects non-finite values") {
    TempDir dir("ingest_nan");
    {
        std::ofstream meta(dir.path() / "meta.json");
        meta << R"({"dt": 1.0, "F": 1, "T": 2, "P": 1, "change_index": null})";
        std::ofstream csv(dir.path() / "data.csv");
        csv << "entity,time,s1\n1,1,nan\n1,2,0.25\n";
    }
    CHECK_THROWS_WITH_AS(load_tensor(dir.path()), doctest::Contains("non-finite"),
                         ValidationError);
}

TEST_CASE("generated tensors round-trip through the dataset format") {
    TempDir dir("ingest_rt");
    const auto tensor = qcpd_test::random_tensor(3, 12, 2, 9, /*annotated=*/true);
    save_tensor(tensor, dir.path());
    CHECK(qcpd_test::tensors_identical(tensor, load_tensor(dir.path())));
}
