#pragma once

#include <vector>

#include "modsr/geometry.hpp"
#include "modsr/image.hpp"
#include "modsr/observation.hpp"

namespace modsr {

struct Correspondence {
    ModulePoint module;
    PixelPoint pixel;
};

struct CorrespondenceSet {
    int frame_index = 0;
    std::vector<Correspondence> pairs;
};

enum class RefineStatus { NotRun, Converged, MaxIterations, NoImprovement, Diverged };

const char* to_string(RefineStatus status);

/// Per-frame homographies plus the shared camera. Vectors are parallel and
/// ordered like the frame list they were estimated from.
struct RegistrationResult {
    std::vector<int> frame_indices;
    std::vector<Homography> homographies;
    CameraModel camera;
    std::vector<double> residuals;         // RMS photometric residual, intensity units
    std::vector<double> reprojection_rms;  // RMS reprojection error vs correspondences, LR px
    std::vector<RefineStatus> status;

    std::size_t size() const { return homographies.size(); }
    /// Position of `frame_index` in the vectors, or -1.
    int position_of(int frame_index) const;
};

struct RegistrationOptions {
    int levels = 3;
    int alternations = 2;          // template/refinement rounds per level
    int template_magnification = 2;
    double pyramid_sigma = 1.0;
    int max_iterations = 50;
    double relative_tolerance = 1e-8;
    double jacobian_step = 1e-6;
    bool huber = false;
    double huber_delta = 0.05;     // intensity units
    bool refine_kappa = true;
    bool fix_kappa_zero = false;   // homography-only ablation: kappa pinned to 0 everywhere
    bool strict = false;           // throw on divergence instead of keeping the input parameters
};

/// Linear homography (module -> pixel) with Hartley normalization.
Homography estimate_homography_dlt(const std::vector<Correspondence>& pairs);

struct ZhangResult {
    CameraModel camera;  // kappa = 0
    std::vector<Homography> homographies;  // poses on the normalized plane, i.e. K^-1 * H_pixel
};

/// Closed-form intrinsics from >= 3 plane views.
ZhangResult zhang_initialize(const std::vector<CorrespondenceSet>& sets);

/// Square-pixel camera with a known principal point: the focal length is fit
/// in closed form from any number of views. Unobservable (fronto-parallel)
/// views fall back to f = 2 max(cx, cy).
ZhangResult focal_initialize(const std::vector<CorrespondenceSet>& sets, double cx, double cy);

/// Nonlinear least-squares refinement of the per-frame poses together with the
/// principal point, fy, skew and kappa on the reprojection error (fx is held
/// fixed: it is not separable from kappa and the pose scale).
RegistrationResult refine_reprojection(const std::vector<CorrespondenceSet>& sets, const ZhangResult& init,
                                       const RegistrationOptions& opts = {});

/// RMS reprojection error of each set under `reg` (matched by frame index).
std::vector<double> reprojection_rms(const std::vector<CorrespondenceSet>& sets, const RegistrationResult& reg);

/// Per-frame RMS pixel distance between two registrations over a regular
/// sampling of `rect` (nx x ny points).
std::vector<double> registration_error(const RegistrationResult& estimate, const RegistrationResult& truth,
                                       const ModuleRect& rect, int nx = 41, int ny = 25);

/// Mean of all frames warped onto `grid`; pixels seen by no frame are masked.
/// Throws DataError if more than half the pixels are masked.
ImageGrid build_template(const std::vector<ImageGrid>& frames, const RegistrationResult& reg, const HrGridSpec& grid);

/// Photometric Levenberg-Marquardt refinement of each H_i against `templ`,
/// followed by a joint pass over kappa (unless disabled).
RegistrationResult refine_photometric(const std::vector<ImageGrid>& frames, const RegistrationResult& initial,
                                      const ImageGrid& templ, const HrGridSpec& grid,
                                      const RegistrationOptions& opts = {});

/// Photometric RMS residual of each frame against `templ`.
std::vector<double> photometric_rms(const std::vector<ImageGrid>& frames, const RegistrationResult& reg,
                                    const ImageGrid& templ, const HrGridSpec& grid);

/// Gaussian pyramid, level 0 = input.
std::vector<ImageGrid> build_pyramid(const ImageGrid& frame, int levels, double sigma);

/// Correspondence-based initialization followed by coarse-to-fine photometric
/// refinement. `grid` is the reconstruction grid; the registration template
/// uses the same module rect at `opts.template_magnification`.
RegistrationResult multiscale_register(const std::vector<ImageGrid>& frames, const std::vector<CorrespondenceSet>& sets,
                                       const HrGridSpec& grid, const RegistrationOptions& opts = {});

}  // namespace modsr
