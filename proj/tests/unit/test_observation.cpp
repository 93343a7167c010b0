#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "modsr/error.hpp"
#include "modsr/observation.hpp"

using namespace modsr;

namespace {

// Frame-aligned module rect: LR pixel centers (integers) land on HR pixel
// centers when the camera and homography are identities.
HrGridSpec aligned_grid(int lr_w, int lr_h, int s) {
    return HrGridSpec(lr_w * s, lr_h * s, ModuleRect{-0.5, -0.5, lr_w - 0.5, lr_h - 0.5}, s);
}

ImageGrid random_image(int w, int h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageGrid img(w, h);
    for (std::size_t k = 0; k < img.size(); ++k) img[k] = u(rng);
    return img;
}

double dot(const ImageGrid& a, const ImageGrid& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

struct Setup {
    Homography h;
    CameraModel cam;
    HrGridSpec grid;
    int lr_w, lr_h;
};

std::vector<Setup> setups() {
    Eigen::Matrix3d m;
    m << 0.9, 0.05, 0.3, -0.04, 1.1, -0.2, 0.01, -0.015, 1.0;
    return {
        {Homography::identity(), CameraModel::identity(), aligned_grid(8, 8, 1), 8, 8},
        {Homography(m), CameraModel(1.0, 1.0, 0.0, 0.0, 0.0, 0.0), aligned_grid(4, 4, 2), 4, 4},
        {Homography(m), CameraModel(4.0, 4.2, 3.5, 3.4, 0.1, -0.05),
         HrGridSpec(8, 8, ModuleRect{-1.0, -1.0, 1.0, 1.0}, 2), 8, 8},
    };
}

}  // namespace

TEST_CASE("HrGridSpec enforces uniform spacing") {
    CHECK_NOTHROW(HrGridSpec(10, 6, ModuleRect{0, 0, 10, 6}, 1));
    CHECK_THROWS_AS(HrGridSpec(10, 10, ModuleRect{0, 0, 10, 6}, 1), ConfigError);
    CHECK_THROWS_AS(HrGridSpec(10, 6, ModuleRect{0, 0, 10, 6}, 0), ConfigError);
    const HrGridSpec g = HrGridSpec::from_density(ModuleRect{0, 0, 10, 6}, 30.0, 3);
    CHECK(g.width() == 900);
    CHECK(g.height() == 540);
    const ModulePoint p = g.to_module(0.0, 0.0);
    const Eigen::Vector2d back = g.to_grid(p);
    CHECK(back.x() == doctest::Approx(0.0));
    CHECK(back.y() == doctest::Approx(0.0));
    const HrGridSpec c = g.coarsened(4);
    CHECK(c.width() == 225);
    CHECK(c.height() == 135);
    CHECK(c.spacing() == doctest::Approx(4.0 * g.spacing()));
}

TEST_CASE("identity motion field is zero") {
    const HrGridSpec grid = aligned_grid(16, 12, 1);
    const MotionField f = build_motion_field(0, Homography::identity(), CameraModel::identity(), grid, 16, 12);
    for (std::size_t i = 0; i < f.vectors.size(); ++i) {
        CHECK(f.valid[i] == 1);
        CHECK(f.vectors[i].norm() < 1e-12);
    }
    const HrGridSpec grid3 = aligned_grid(16, 12, 3);
    const MotionField f3 = build_motion_field(0, Homography::identity(), CameraModel::identity(), grid3, 16, 12);
    for (std::size_t i = 0; i < f3.vectors.size(); ++i) CHECK(f3.vectors[i].norm() < 1e-12);
}

TEST_CASE("translation gives a constant field") {
    const HrGridSpec grid(24, 24, ModuleRect{-2.5, -2.5, 21.5, 21.5}, 1);
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = 0.5;
    const MotionField f = build_motion_field(0, Homography(m), CameraModel::identity(), grid, 16, 12);
    for (std::size_t i = 0; i < f.vectors.size(); ++i) {
        REQUIRE(f.valid[i] == 1);
        // Grid origin sits 2 HR px before the frame origin; the shift removes 0.5 of that.
        CHECK(f.vectors[i].x() == doctest::Approx(1.5));
        CHECK(f.vectors[i].y() == doctest::Approx(2.0));
    }
}

TEST_CASE("pixels beyond the distortion fold-over are masked") {
    const CameraModel cam(100.0, 100.0, 320.0, 256.0, 0.0, -0.2);
    const HrGridSpec grid(100, 100, ModuleRect{-10, -10, 10, 10}, 1);
    const MotionField f = build_motion_field(0, Homography::identity(), cam, grid, 640, 512);
    CHECK(f.valid[0] == 0);
    CHECK(f.valid[256 * 640 + 320] == 1);
}

TEST_CASE("system matrix row invariants") {
    const HrGridSpec grid = aligned_grid(8, 6, 3);
    Eigen::Matrix3d m;
    m << 1.0, 0.02, 0.3, -0.01, 1.0, 0.2, 0.0, 0.0, 1.0;
    const MotionField f = build_motion_field(0, Homography(m), CameraModel::identity(), grid, 8, 6);
    const double sigma = 1.2;
    const SystemMatrix w = build_system_matrix(f, sigma, grid);
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    for (std::size_t r = 0; r < w.rows(); ++r) {
        if (!w.row_valid(r)) {
            CHECK(w.row_begin(r) == w.row_end(r));
            continue;
        }
        double sum = 0.0;
        for (std::size_t k = w.row_begin(r); k < w.row_end(r); ++k) {
            CHECK(w.weight(k) >= 0.0);
            sum += w.weight(k);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(w.row_end(r) - w.row_begin(r) <= static_cast<std::size_t>((2 * half + 1) * (2 * half + 1)));
    }
    CHECK_THROWS_AS(build_system_matrix(f, 0.0, grid), ConfigError);
}

TEST_CASE("narrow PSF approaches the identity") {
    const HrGridSpec grid = aligned_grid(8, 8, 1);
    const MotionField f = build_motion_field(0, Homography::identity(), CameraModel::identity(), grid, 8, 8);
    const SystemMatrix w = build_system_matrix(f, 1e-3, grid);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double best = 0.0;
        std::uint32_t col = 0;
        for (std::size_t k = w.row_begin(r); k < w.row_end(r); ++k)
            if (w.weight(k) > best) {
                best = w.weight(k);
                col = w.col(k);
            }
        CHECK(best > 0.999);
        CHECK(col == r);
    }
    std::mt19937_64 rng(2);
    const ImageGrid img = random_image(8, 8, rng);
    const ImageGrid g = apply_forward(w, img);
    for (std::size_t k = 0; k < img.size(); ++k) CHECK(g[k] == doctest::Approx(img[k]));
}

TEST_CASE("constant image maps to the same constant") {
    for (const auto& s : setups()) {
        const MotionField f = build_motion_field(0, s.h, s.cam, s.grid, s.lr_w, s.lr_h);
        const SystemMatrix w = build_system_matrix(f, 1.2, s.grid);
        const ImageGrid g = apply_forward(w, s.grid.make_image(0.37));
        for (std::size_t k = 0; k < g.size(); ++k)
            if (g.valid(k)) CHECK(std::abs(g[k] - 0.37) < 1e-9);
        const ImageGrid ones = apply_forward(w, s.grid.make_image(1.0));
        for (std::size_t k = 0; k < ones.size(); ++k)
            if (ones.valid(k)) CHECK(std::abs(ones[k] - 1.0) < 1e-9);
    }
}

TEST_CASE("forward and adjoint match the dense oracle") {
    std::mt19937_64 rng(17);
    for (const auto& s : setups()) {
        for (double sigma : {0.6, 1.2}) {
            std::vector<bool> valid;
            const Eigen::MatrixXd d = oracle::dense_system_matrix(s.h, s.cam, s.grid, s.lr_w, s.lr_h, sigma, valid);
            const MotionField f = build_motion_field(0, s.h, s.cam, s.grid, s.lr_w, s.lr_h);
            const SystemMatrix w = build_system_matrix(f, sigma, s.grid);
            const ImageGrid x = random_image(s.grid.width(), s.grid.height(), rng);
            const ImageGrid y = apply_forward(w, x);
            const Eigen::VectorXd dx = d * Eigen::Map<const Eigen::VectorXd>(x.data().data(), x.size());
            for (std::size_t r = 0; r < y.size(); ++r) {
                CHECK(y.valid(r) == valid[r]);
                if (valid[r]) CHECK(std::abs(y[r] - dx[r]) < 1e-12);
            }
            const ImageGrid g = random_image(s.lr_w, s.lr_h, rng);
            const ImageGrid at = apply_adjoint(w, g);
            Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.data().data(), g.size());
            for (std::size_t r = 0; r < valid.size(); ++r)
                if (!valid[r]) gv[r] = 0.0;
            const Eigen::VectorXd dt = d.transpose() * gv;
            for (std::size_t k = 0; k < at.size(); ++k) CHECK(std::abs(at[k] - dt[k]) < 1e-12);
        }
    }
}

TEST_CASE("adjoint identity on random pairs") {
    std::mt19937_64 rng(23);
    for (const auto& s : setups()) {
        const MotionField f = build_motion_field(0, s.h, s.cam, s.grid, s.lr_w, s.lr_h);
        const SystemMatrix w = build_system_matrix(f, 1.0, s.grid);
        for (int t = 0; t < 100; ++t) {
            const ImageGrid x = random_image(s.grid.width(), s.grid.height(), rng);
            ImageGrid g = random_image(s.lr_w, s.lr_h, rng);
            const ImageGrid wx = apply_forward(w, x);
            double lhs = 0.0;
            for (std::size_t r = 0; r < g.size(); ++r)
                if (wx.valid(r)) lhs += wx[r] * g[r];
            const double rhs = dot(x, apply_adjoint(w, g));
            CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), 1.0));
        }
    }
}

TEST_CASE("masked LR pixels do not contribute to the adjoint") {
    const HrGridSpec grid = aligned_grid(4, 4, 2);
    const MotionField f = build_motion_field(0, Homography::identity(), CameraModel::identity(), grid, 4, 4);
    const SystemMatrix w = build_system_matrix(f, 0.8, grid);
    ImageGrid g(4, 4, 1.0);
    std::vector<std::uint8_t> mask(16, 0);
    g.set_mask(mask);
    const ImageGrid at = apply_adjoint(w, g);
    for (std::size_t k = 0; k < at.size(); ++k) CHECK(at[k] == 0.0);
}

TEST_CASE("stencil centroid follows inverse_map") {
    const HrGridSpec grid(60, 60, ModuleRect{-1.0, -1.0, 1.0, 1.0}, 3);
    Eigen::Matrix3d m;
    m << 0.95, 0.03, 0.05, -0.02, 1.02, -0.04, 0.02, 0.01, 1.0;
    const CameraModel cam(10.0, 10.0, 10.0, 10.0, 0.0, 0.05);
    const MotionField f = build_motion_field(0, Homography(m), cam, grid, 20, 20);
    const SystemMatrix w = build_system_matrix(f, 1.2, grid);
    int checked = 0;
    for (int r = 0; r < 20; ++r)
        for (int c = 0; c < 20; ++c) {
            const std::size_t row = static_cast<std::size_t>(r) * 20 + c;
            if (!w.row_valid(row)) continue;
            const Eigen::Vector2d want = grid.to_grid(inverse_map({double(c), double(r)}, Homography(m), cam));
            // Interior rows only: truncation at the grid border biases the centroid.
            if (want.x() < 4 || want.y() < 4 || want.x() > 55 || want.y() > 55) continue;
            Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
            for (std::size_t k = w.row_begin(row); k < w.row_end(row); ++k)
                centroid += w.weight(k) * Eigen::Vector2d(w.col(k) % 60, w.col(k) / 60);
            CHECK((centroid - want).norm() < 0.05);
            ++checked;
        }
    CHECK(checked > 50);
}

TEST_CASE("dimension mismatch is rejected") {
    const HrGridSpec grid = aligned_grid(4, 4, 2);
    const MotionField f = build_motion_field(0, Homography::identity(), CameraModel::identity(), grid, 4, 4);
    const SystemMatrix w = build_system_matrix(f, 0.8, grid);
    CHECK_THROWS_AS(apply_forward(w, ImageGrid(5, 8)), DataError);
    CHECK_THROWS_AS(apply_adjoint(w, ImageGrid(3, 4)), DataError);
}
