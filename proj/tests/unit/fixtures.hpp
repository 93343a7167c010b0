#pragma once

#include "modsr/synth.hpp"

namespace fixtures {

// A 4x3-cell module seen at 12 LR px per module unit in 80x64 frames.
inline modsr::SceneSpec small_scene(int s = 2, std::uint64_t seed = 1) {
    modsr::SceneSpec spec;
    spec.hr = modsr::HrGridSpec::from_density(modsr::ModuleRect{0.0, 0.0, 4.0, 3.0}, 12.0, s);
    spec.cell_rows = 3;
    spec.cell_cols = 4;
    spec.crack_count = 3;
    spec.seed = seed;
    return spec;
}

inline modsr::AcquisitionSpec small_acquisition(int n_frames = 4, std::uint64_t seed = 7) {
    modsr::AcquisitionSpec acq;
    acq.n_frames = n_frames;
    acq.lr_width = 80;
    acq.lr_height = 64;
    acq.camera = modsr::CameraModel(192.0, 192.0, 40.0, 32.0, 0.0, 0.0);
    acq.margin = 4;
    acq.seed = seed;
    return acq;
}

}  // namespace fixtures
