#include <doctest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "modsr/error.hpp"
#include "modsr/reconstruction.hpp"

using namespace modsr;

namespace {

struct Problem {
    HrGridSpec grid;
    std::vector<ImageGrid> frames;
    std::vector<SystemMatrix> matrices;
};

// 16x16 HR unknowns observed by 8x8 LR frames under small sub-pixel shifts.
Problem small_problem(int n_frames, std::uint64_t seed) {
    Problem p{HrGridSpec(16, 16, ModuleRect{-0.5, -0.5, 7.5, 7.5}, 2), {}, {}};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n_frames; ++i) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        m(0, 2) = 0.4 * (u(rng) - 0.5);
        m(1, 2) = 0.4 * (u(rng) - 0.5);
        m(0, 1) = 0.02 * (u(rng) - 0.5);
        const MotionField f = build_motion_field(i, Homography(m), CameraModel::identity(), p.grid, 8, 8);
        p.matrices.push_back(build_system_matrix(f, 0.8, p.grid));
        ImageGrid g(8, 8);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = u(rng);
        p.frames.push_back(g);
    }
    return p;
}

ImageGrid random_hr(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageGrid f(16, 16);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = u(rng);
    return f;
}

}  // namespace

TEST_CASE("BTV shifts") {
    BtvParams p;
    p.window = 2;
    const auto s = btv_shifts(p);
    CHECK(s.size() == 24);
    CHECK(s.front().dx == -2);
    CHECK(s.front().dy == -2);
    CHECK(s.front().weight == doctest::Approx(std::pow(0.7, 4)));
    for (const auto& sh : s) CHECK((sh.dx != 0 || sh.dy != 0));
}

TEST_CASE("BTV value on simple images") {
    BtvParams p;
    p.window = 1;
    const ImageGrid flat(6, 6, 0.3);
    CHECK(btv_value_grad(flat, p).value == doctest::Approx(0.0));
    ImageGrid step(6, 6, 0.0);
    for (int y = 0; y < 6; ++y)
        for (int x = 3; x < 6; ++x) step.at(x, y) = 1.0;
    CHECK(btv_value_grad(step, p).value > 0.0);
}

TEST_CASE("BTV gradient matches finite differences") {
    const ImageGrid f = random_hr(3);
    BtvParams p;
    p.epsilon = 0.05;
    const ValueGrad vg = btv_value_grad(f, p);
    const double err = oracle::fd_gradient_error(f, vg.gradient, [&](const ImageGrid& x) { return btv_value_grad(x, p).value; });
    CHECK(err < 1e-4);

    BtvWeights weights(btv_shifts(p).size(), std::vector<double>(f.size(), 0.5));
    weights[3][17] = 2.0;
    const ValueGrad wg = btv_value_grad(f, p, &weights);
    const double werr =
        oracle::fd_gradient_error(f, wg.gradient, [&](const ImageGrid& x) { return btv_value_grad(x, p, &weights).value; });
    CHECK(werr < 1e-4);
}

TEST_CASE("data gradient matches finite differences") {
    const Problem prob = small_problem(3, 5);
    const ImageGrid f = random_hr(6);
    const ValueGrad vg = data_value_grad(f, prob.frames, prob.matrices);
    const double err = oracle::fd_gradient_error(
        f, vg.gradient, [&](const ImageGrid& x) { return data_value_grad(x, prob.frames, prob.matrices).value; });
    CHECK(err < 1e-4);

    DataWeights w(3, std::vector<double>(64, 1.0));
    w[1][10] = 0.25;
    w[2][40] = 0.0;
    const ValueGrad wg = data_value_grad(f, prob.frames, prob.matrices, &w);
    const double werr = oracle::fd_gradient_error(
        f, wg.gradient, [&](const ImageGrid& x) { return data_value_grad(x, prob.frames, prob.matrices, &w).value; });
    CHECK(werr < 1e-4);
}

TEST_CASE("data term rejects mismatched inputs") {
    const Problem prob = small_problem(2, 1);
    CHECK_THROWS_AS(data_value_grad(ImageGrid(15, 16), prob.frames, prob.matrices), DataError);
    std::vector<ImageGrid> one(prob.frames.begin(), prob.frames.begin() + 1);
    CHECK_THROWS_AS(data_value_grad(random_hr(1), one, prob.matrices), DataError);
}

TEST_CASE("Huber weights in closed form") {
    // Median 0, MAD 2, scale 1.4826 * 2; only the +-10 residuals exceed c * scale.
    const std::vector<double> r = {-2.0, -1.0, 0.0, 1.0, 2.0, 10.0, -10.0};
    const auto w = update_robust_weights(r);
    const double cs = 1.345 * 1.4826 * 2.0;
    for (int k = 0; k < 5; ++k) CHECK(w[k] == 1.0);
    CHECK(w[5] == doctest::Approx(cs / 10.0));
    CHECK(w[6] == doctest::Approx(cs / 10.0));
    const std::vector<double> same(5, 0.3);
    for (double v : update_robust_weights(same)) CHECK(v == 1.0);
    CHECK_THROWS_AS(update_robust_weights(std::vector<double>{}), DataError);
}

TEST_CASE("parameter validation") {
    BtvParams p;
    p.alpha = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.lambda = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    SolverOptions o;
    o.max_cg = 0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("objective trace is monotone within each pass") {
    const Problem prob = small_problem(3, 8);
    BtvParams p;
    p.lambda = 0.05;
    SolverOptions o;
    o.max_outer = 3;
    o.robust_data_weights = true;
    o.grad_tol = 1e-8;
    const auto rep = solve_map(prob.frames, prob.matrices, p, o, ImageGrid(16, 16, 0.5));
    CHECK(rep.outer_passes == 3);
    REQUIRE(rep.pass_starts.size() == 3);
    for (std::size_t pass = 0; pass < rep.pass_starts.size(); ++pass) {
        const std::size_t end = pass + 1 < rep.pass_starts.size() ? rep.pass_starts[pass + 1] : rep.objective_trace.size();
        for (std::size_t k = rep.pass_starts[pass] + 1; k < end; ++k)
            CHECK(rep.objective_trace[k] <= rep.objective_trace[k - 1]);
    }
    CHECK(rep.iterations > 0);
}

TEST_CASE("unregularized single-frame identity recovers the frame") {
    const HrGridSpec grid(8, 8, ModuleRect{-0.5, -0.5, 7.5, 7.5}, 1);
    const MotionField field = build_motion_field(0, Homography::identity(), CameraModel::identity(), grid, 8, 8);
    const SystemMatrix w = build_system_matrix(field, 0.1, grid);
    ImageGrid g(8, 8);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = u(rng);
    BtvParams p;
    p.lambda = 0.0;
    SolverOptions o;
    o.grad_tol = 1e-12;
    const auto rep = solve_map({g}, {w}, p, o, ImageGrid(8, 8, 0.5));
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(std::abs(rep.f_hat[k] - g[k]) < 1e-6);
    CHECK(rep.uncovered_pixels == 0);
}

TEST_CASE("unobserved HR pixels are masked") {
    const HrGridSpec grid(12, 8, ModuleRect{-0.5, -0.5, 11.5, 7.5}, 1);
    const MotionField field = build_motion_field(0, Homography::identity(), CameraModel::identity(), grid, 8, 8);
    const SystemMatrix w = build_system_matrix(field, 0.4, grid);
    BtvParams p;
    SolverOptions o;
    const auto rep = solve_map({ImageGrid(8, 8, 0.5)}, {w}, p, o, ImageGrid(12, 8, 0.5));
    CHECK(rep.uncovered_pixels > 0);
    CHECK_FALSE(rep.f_hat.valid(11, 4));
    CHECK(rep.f_hat.valid(2, 4));
}

TEST_CASE("bicubic upsampling") {
    ImageGrid g(6, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) g.at(x, y) = 0.1 * x + 0.05 * y;
    const ImageGrid up = bicubic_upsample(g, 3);
    CHECK(up.width() == 18);
    CHECK(up.height() == 15);
    // Interior pixels reproduce the ramp at their LR coordinates.
    for (int y = 6; y < 9; ++y)
        for (int x = 6; x < 12; ++x) {
            const double sx = (x + 0.5) / 3.0 - 0.5;
            const double sy = (y + 0.5) / 3.0 - 0.5;
            CHECK(up.at(x, y) == doctest::Approx(0.1 * sx + 0.05 * sy));
        }
    CHECK(up.at(4, 4) == doctest::Approx(g.at(1, 1)));
    const ImageGrid c = bicubic_upsample(ImageGrid(4, 4, 0.3), 4);
    for (std::size_t k = 0; k < c.size(); ++k) CHECK(c[k] == doctest::Approx(0.3));
    CHECK_THROWS_AS(bicubic_upsample(g, 0), ConfigError);
}

TEST_CASE("bicubic rectification with identity geometry") {
    ImageGrid g(6, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) g.at(x, y) = 0.1 * x + 0.05 * y;
    const HrGridSpec grid(6, 5, ModuleRect{-0.5, -0.5, 5.5, 4.5}, 1);
    const ImageGrid r = bicubic_rectify(g, Homography::identity(), CameraModel::identity(), grid);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(r[k] == doctest::Approx(g[k]));
}
