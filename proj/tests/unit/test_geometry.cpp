#include <doctest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "modsr/error.hpp"
#include "modsr/geometry.hpp"

using namespace modsr;

namespace {

Homography random_homography(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix3d h;
    h << 0.8 + 0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 0.8 + 0.1 * u(rng), 0.1 * u(rng),
        0.05 * u(rng), 0.05 * u(rng), 1.0;
    return Homography(h);
}

}  // namespace

TEST_CASE("distort_radius examples") {
    CHECK(distort_radius(0.5, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(distort_radius(1.0, 0.1) == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(distort_radius(2.0, -0.05) == doctest::Approx(1.6).epsilon(1e-15));
    CHECK_THROWS_AS(distort_radius(10.0, -0.5), DomainError);
}

TEST_CASE("undistort_radius examples hit each discriminant branch") {
    const auto zero = undistort_radius_detailed(0.7, 0.0);
    CHECK(zero.r_u == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(zero.branch == CardanoCase::ZeroDiscriminant);

    const auto pos = undistort_radius_detailed(1.1, 0.1);
    CHECK(std::abs(pos.r_u - 1.0) < 1e-12);
    CHECK(pos.branch == CardanoCase::PositiveDiscriminant);
    CHECK(std::abs(pos.r_u - oracle::bisect_undistort(1.1, 0.1)) < 1e-12);

    const auto neg = undistort_radius_detailed(1.6, -0.05);
    CHECK(std::abs(neg.r_u - 2.0) < 1e-12);
    CHECK(neg.branch == CardanoCase::NegativeDiscriminant);
    CHECK(std::abs(neg.r_u - oracle::bisect_undistort(1.6, -0.05)) < 1e-12);
}

TEST_CASE("undistort_radius rejects radii beyond the fold-over point") {
    const double kappa = -0.1;
    const double r_max = monotone_radius_limit(kappa);
    const double d_max = r_max + kappa * r_max * r_max * r_max;
    CHECK_THROWS_AS(undistort_radius(d_max * 1.01, kappa), DomainError);
    CHECK_NOTHROW(undistort_radius(d_max * 0.99, kappa));
}

TEST_CASE("undistort_radius continuity at kappa = 0") {
    for (double kappa : {1e-6, -1e-6})
        for (double r_d : {0.1, 1.0, 2.0}) CHECK(std::abs(undistort_radius(r_d, kappa) - r_d) < 1e-4);
}

TEST_CASE("undistort_radius agrees with bisection over the kappa grid") {
    int checked = 0;
    for (int k = -30; k <= 30; ++k) {
        const double kappa = 0.01 * k;
        const double limit = kappa < 0.0 ? 0.999 * monotone_radius_limit(kappa) : 3.0;
        for (int j = 1; j <= 40; ++j) {
            const double r_u = limit * j / 40.0;
            const double r_d = r_u + kappa * r_u * r_u * r_u;
            const double got = undistort_radius(r_d, kappa);
            CHECK(std::abs(distort_radius(got, kappa) - r_d) < 1e-9);
            CHECK(std::abs(got - oracle::bisect_undistort(r_d, kappa)) < 1e-9);
            ++checked;
        }
    }
    CHECK(checked == 61 * 40);
}

TEST_CASE("monotone window") {
    CHECK(std::isinf(monotone_radius_limit(0.1)));
    CHECK(monotone_radius_limit(-1.0 / 3.0) == doctest::Approx(1.0));
    CHECK(in_monotone_window(0.99, -1.0 / 3.0));
    CHECK_FALSE(in_monotone_window(1.01, -1.0 / 3.0));
}

TEST_CASE("distort_point and undistort_point examples") {
    auto near = [](PlanePoint a, double x, double y) { return std::abs(a.x - x) < 1e-12 && std::abs(a.y - y) < 1e-12; };
    CHECK(near(distort_point({0.0, 0.0}, 0.3), 0.0, 0.0));
    CHECK(near(distort_point({1.0, 1.0}, 0.1), 1.2, 1.2));
    CHECK(near(distort_point({0.6, 0.8}, 0.0), 0.6, 0.8));
    CHECK(near(undistort_point({0.0, 0.0}, 0.2), 0.0, 0.0));
    CHECK(near(undistort_point({1.2, 1.2}, 0.1), 1.0, 1.0));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> k(-0.3, 0.3);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double kappa = k(rng);
        PlanePoint p{u(rng), u(rng)};
        const double r = std::hypot(p.x, p.y);
        const double limit = 0.95 * monotone_radius_limit(kappa);
        if (r > limit) p = {p.x * limit / r, p.y * limit / r};
        const PlanePoint q = undistort_point(distort_point(p, kappa), kappa);
        worst = std::max(worst, std::hypot(q.x - p.x, q.y - p.y));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("homography canonical form") {
    Eigen::Matrix3d m;
    m << 2.0, 0.0, 1.0, 0.0, 3.0, -1.0, 0.1, 0.2, 4.0;
    const Homography h(m);
    CHECK(h.matrix().norm() == doctest::Approx(std::sqrt(3.0)));
    CHECK(h(2, 2) > 0.0);
    const Homography neg(-5.0 * m);
    CHECK((neg.matrix() - h.matrix()).norm() < 1e-14);
    CHECK((h.inverse().matrix() * h.matrix() / (h.inverse().matrix() * h.matrix())(2, 2) -
           Eigen::Matrix3d::Identity())
              .norm() < 1e-12);
    CHECK_THROWS_AS(Homography(Eigen::Matrix3d::Zero()), NumericalError);
    Eigen::Matrix3d rank2;
    rank2 << 1, 2, 3, 2, 4, 6, 0, 0, 1;
    CHECK_THROWS_AS(Homography{rank2}, NumericalError);
}

TEST_CASE("homogeneous point dehomogenization") {
    const PlanePoint p = HomogeneousPoint2(2.0, 4.0, 2.0).dehomogenize();
    CHECK(p.x == 1.0);
    CHECK(p.y == 2.0);
    CHECK_FALSE(HomogeneousPoint2(1.0, 1.0, 1e-13).dehomogenizable());
    CHECK_THROWS_AS(HomogeneousPoint2(1.0, 1.0, 0.0).dehomogenize(), NumericalError);
}

TEST_CASE("camera model validation") {
    CHECK_THROWS_AS(CameraModel(0.0, 1.0, 0.0, 0.0, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(CameraModel(1.0, -1.0, 0.0, 0.0, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(CameraModel(1.0, 1.0, 0.0, 0.0, 0.0, 0.6), ConfigError);
    const CameraModel cam(480.0, 470.0, 320.0, 256.0, 1.5, 0.1);
    const PixelPoint u = cam.to_pixel({0.1, -0.2});
    const PlanePoint back = cam.to_plane(u);
    CHECK(back.x == doctest::Approx(0.1));
    CHECK(back.y == doctest::Approx(-0.2));
    const CameraModel half = cam.scaled(2.0);
    CHECK(half.fx() == doctest::Approx(240.0));
    CHECK(half.cx() == doctest::Approx(160.0));
    CHECK(half.kappa() == 0.1);
}

TEST_CASE("forward_map and inverse_map examples") {
    const CameraModel id = CameraModel::identity();
    PixelPoint u = forward_map({0.3, 0.4}, Homography::identity(), id);
    CHECK(u.u == doctest::Approx(0.3));
    CHECK(u.v == doctest::Approx(0.4));
    ModulePoint y = inverse_map({0.3, 0.4}, Homography::identity(), id);
    CHECK(y.y1 == doctest::Approx(0.3));
    CHECK(y.y2 == doctest::Approx(0.4));

    const Homography h2(Eigen::Vector3d(2.0, 2.0, 1.0).asDiagonal().toDenseMatrix());
    u = forward_map({0.5, 0.5}, h2, id.with_kappa(0.1));
    CHECK(u.u == doctest::Approx(1.2));
    CHECK(u.v == doctest::Approx(1.2));
    y = inverse_map(u, h2, id.with_kappa(0.1));
    CHECK(y.y1 == doctest::Approx(0.5));
    CHECK(y.y2 == doctest::Approx(0.5));

    const CameraModel k(100.0, 100.0, 256.0, 256.0, 0.0, 0.0);
    u = forward_map({0.0, 0.0}, Homography::identity(), k);
    CHECK(u.u == doctest::Approx(256.0));
    CHECK(u.v == doctest::Approx(256.0));
    y = inverse_map(u, Homography::identity(), k);
    CHECK(std::abs(y.y1) < 1e-12);
    CHECK(std::abs(y.y2) < 1e-12);
}

TEST_CASE("forward_map singular configuration") {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(2, 0) = 1.0;
    m(2, 2) = 0.0;
    m(0, 2) = 1.0;
    const Homography h(m);
    CHECK_THROWS_AS(forward_map({0.0, 0.0}, h, CameraModel::identity()), NumericalError);
}

TEST_CASE("map roundtrip for random configurations") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const Homography h = random_homography(rng);
        const CameraModel cam(400.0 + 100.0 * u(rng), 400.0 + 100.0 * u(rng), 320.0 + 10.0 * u(rng),
                              256.0 + 10.0 * u(rng), 0.5 * u(rng), 0.05);
        const ModulePoint y{0.5 * u(rng), 0.5 * u(rng)};
        const PixelPoint px = forward_map(y, h, cam);
        const PixelPoint again = forward_map(inverse_map(px, h, cam), h, cam);
        worst = std::max(worst, std::hypot(again.u - px.u, again.v - px.v));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("forward_map is invariant to homography scale") {
    std::mt19937_64 rng(5);
    const Homography h = random_homography(rng);
    const CameraModel cam(480.0, 480.0, 320.0, 256.0, 0.0, -0.1);
    for (double s : {-3.0, 0.01, 7.5}) {
        const PixelPoint a = forward_map({0.2, -0.1}, h, cam);
        const PixelPoint b = forward_map({0.2, -0.1}, Homography(s * h.matrix()), cam);
        CHECK(std::abs(a.u - b.u) < 1e-10);
        CHECK(std::abs(a.v - b.v) < 1e-10);
    }
}
