#pragma once

#include <optional>
#include <vector>

#include "modsr/geometry.hpp"
#include "modsr/image.hpp"
#include "modsr/observation.hpp"

namespace modsr {

/// Bilateral total variation prior with Charbonnier smoothing.
struct BtvParams {
    int window = 2;         // P, largest shift in pixels
    double alpha = 0.7;     // spatial decay per unit L1 shift
    double lambda = 1e-4;   // regularization weight
    double epsilon = 1e-3;  // Charbonnier smoothing, intensity units

    void validate() const;
};

struct SolverOptions {
    int max_outer = 1;         // IRLS passes
    int max_cg = 200;          // nonlinear CG iterations per pass
    double grad_tol = 1e-4;    // relative gradient norm
    bool robust_data_weights = false;

    void validate() const;
};

/// Per-shift, per-pixel weights for the BTV terms. Index [shift][pixel], shifts
/// enumerated by `btv_shifts`.
using BtvWeights = std::vector<std::vector<double>>;
/// Per-frame, per-LR-pixel data weights.
using DataWeights = std::vector<std::vector<double>>;

struct Shift {
    int dx = 0;
    int dy = 0;
    double weight = 0.0;  // alpha^(|dx|+|dy|)
};

/// All (dx, dy) in [-P, P]^2 except (0, 0), row-major from (-P, -P).
std::vector<Shift> btv_shifts(const BtvParams& p);

struct ValueGrad {
    double value = 0.0;
    ImageGrid gradient;
};

/// R(f) = sum over shifts of alpha^(|l|+|m|) sum_k w_k phi(f_k - f_{k+(l,m)}),
/// phi(t) = sqrt(t^2 + eps^2) - eps, replicate boundaries.
ValueGrad btv_value_grad(const ImageGrid& f, const BtvParams& p, const BtvWeights* weights = nullptr);

/// sum_i |sqrt(w_i) (g_i - W_i f)|^2 over valid LR pixels, and its gradient.
ValueGrad data_value_grad(const ImageGrid& f, const std::vector<ImageGrid>& frames,
                          const std::vector<SystemMatrix>& matrices, const DataWeights* weights = nullptr);

/// Huber weights min(1, c s / |r|) with c = 1.345 and s = 1.4826 MAD(r).
/// All ones when the MAD is zero; throws DataError on empty input.
std::vector<double> update_robust_weights(std::span<const double> residuals);

struct ReconstructionReport {
    ImageGrid f_hat;
    std::vector<double> objective_trace;  // accepted iterates, all passes
    std::vector<std::size_t> pass_starts; // index into objective_trace where each IRLS pass begins
    int iterations = 0;
    int outer_passes = 0;
    double wall_time = 0.0;               // seconds
    std::size_t uncovered_pixels = 0;     // HR pixels no valid observation touches
    double final_relative_gradient = 0.0;
};

/// MAP estimate argmin_f sum_i |g_i - W_i f|^2 + lambda R(f) by nonlinear CG
/// with backtracking line search, inside an optional IRLS loop on data weights.
ReconstructionReport solve_map(const std::vector<ImageGrid>& frames, const std::vector<SystemMatrix>& matrices,
                               const BtvParams& p, const SolverOptions& opts, const ImageGrid& init);

/// Catmull-Rom upsampling by integer factor s with pixel-center alignment.
ImageGrid bicubic_upsample(const ImageGrid& g, int s);

/// Bicubic interpolation of one LR frame onto the HR module grid through the
/// camera map (single-frame baseline in rectified coordinates).
ImageGrid bicubic_rectify(const ImageGrid& frame, const Homography& h, const CameraModel& cam, const HrGridSpec& grid);

}  // namespace modsr
