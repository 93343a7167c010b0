#pragma once

#include <cstdint>
#include <vector>

#include "modsr/image.hpp"
#include "modsr/observation.hpp"
#include "modsr/registration.hpp"

namespace modsr {

/// Layout and appearance of a synthetic solar module on the HR grid.
struct SceneSpec {
    HrGridSpec hr;
    int cell_rows = 6;
    int cell_cols = 10;
    int busbar_count = 2;  // vertical busbars per cell
    int crack_count = 3;
    double texture_amplitude = 0.5;
    std::uint64_t seed = 1;

    double cell_level = 0.8;
    double gap_level = 0.15;
    double busbar_level = 0.4;
    double crack_level = 0.15;
    double gap_width = 0.08;     // module units
    double busbar_width = 0.03;  // module units
    double crack_step = 0.12;    // polyline segment length, module units
    int crack_segments = 8;

    void validate() const;
};

struct Scene {
    ImageGrid image;
    std::vector<std::uint8_t> crack_mask;              // 1 on crack pixels
    std::vector<std::vector<ModulePoint>> cracks;      // polyline vertices
};

struct NoiseParams {
    double gaussian_sigma = 0.0;
    double impulse_fraction = 0.0;

    void validate() const;
};

struct PoseJitter {
    double translation = 0.2;  // +- module units on each axis
    double rotation_deg = 2.0; // +- in-plane rotation
    double tilt = 0.05;        // max foreshortening 1 - cos(tilt angle), per axis
};

struct AcquisitionSpec {
    int n_frames = 20;
    int lr_width = 640;
    int lr_height = 512;
    CameraModel camera{480.0, 480.0, 320.0, 256.0, 0.0, 0.0};
    double distance = 16.0;  // camera to module center, module units
    PoseJitter jitter;
    double psf_sigma = 0.0;  // HR px; <= 0 selects 0.4 * magnification
    NoiseParams noise;
    double background = 0.05;
    int margin = 8;           // module must stay this many LR px inside the frame
    std::uint64_t seed = 7;

    void validate() const;
};

struct Sequence {
    std::vector<ImageGrid> frames;
    RegistrationResult truth;
    std::vector<CorrespondenceSet> correspondences;  // exact
};

Scene generate_scene(const SceneSpec& spec);

/// Renders `acq.n_frames` LR observations of `f` through the same system
/// matrices the reconstruction uses, then adds Gaussian and impulse noise.
/// Correspondences are the cell corners of `scene`.
Sequence generate_sequence(const ImageGrid& f, const SceneSpec& scene, const AcquisitionSpec& acq);

/// Adds isotropic Gaussian noise to the pixel coordinates only.
std::vector<CorrespondenceSet> perturb_correspondences(const std::vector<CorrespondenceSet>& sets, double sigma_px,
                                                       std::uint64_t seed);

/// Cell-corner module points of a scene layout.
std::vector<ModulePoint> cell_corners(const SceneSpec& scene);

/// 8-connected components of a binary mask.
int count_components(const std::vector<std::uint8_t>& mask, int width, int height);

}  // namespace modsr
