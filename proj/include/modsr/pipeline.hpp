#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "modsr/config.hpp"
#include "modsr/metrics.hpp"
#include "modsr/reconstruction.hpp"
#include "modsr/registration.hpp"

namespace modsr {

/// Output file names inside the output directory.
namespace files {
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kCrackMask = "crack_mask.pgm";
inline constexpr const char* kTruthRegistration = "truth_registration.txt";
inline constexpr const char* kRegistrationReport = "registration_report.json";
inline constexpr const char* kReconstruction = "reconstruction.pgm";
inline constexpr const char* kReconstructionMask = "reconstruction_mask.pgm";
inline constexpr const char* kReconstructionReport = "reconstruction_report.json";
inline constexpr const char* kBicubic = "bicubic.pgm";
inline constexpr const char* kBicubicMask = "bicubic_mask.pgm";
inline constexpr const char* kBaselineReport = "baseline_report.json";
inline constexpr const char* kMetricsText = "metrics.txt";
inline constexpr const char* kMetricsJson = "metrics.json";
}  // namespace files

struct FrameSet {
    std::vector<int> indices;  // ascending
    std::vector<ImageGrid> frames;
};

/// Frames matching `pattern`, ordered by the index parsed from each file name.
FrameSet load_frames(const std::string& pattern);

/// Correspondence sets reordered to match `indices`; throws DataError when a frame has none.
std::vector<CorrespondenceSet> match_correspondences(const std::vector<CorrespondenceSet>& sets,
                                                     const std::vector<int>& indices);

/// System matrices for each frame in `indices` under `reg`.
std::vector<SystemMatrix> build_system_matrices(const RegistrationResult& reg, const std::vector<int>& indices,
                                                const std::vector<ImageGrid>& frames, const HrGridSpec& grid,
                                                double psf_sigma);

/// MAP reconstruction initialized with the mean of the warped frames.
ReconstructionReport reconstruct(const std::vector<ImageGrid>& frames, const std::vector<int>& indices,
                                 const RegistrationResult& reg, const HrGridSpec& grid, double psf_sigma,
                                 const BtvParams& btv, const SolverOptions& solver);

struct Baseline {
    ImageGrid image;
    int frame_index = -1;
    double psnr = 0.0;  // vs truth when available
};

/// Bicubic rectification of the best single frame: highest PSNR against
/// `truth` (cropped by `crop`) when given, otherwise the widest coverage.
Baseline best_single_frame(const std::vector<ImageGrid>& frames, const std::vector<int>& indices,
                           const RegistrationResult& reg, const HrGridSpec& grid, const ImageGrid* truth, int crop);

/// PSNR/SSIM of each method against `truth` on the region valid in all images.
MetricsReport evaluate_images(const ImageGrid& truth, const std::vector<std::pair<std::string, ImageGrid>>& methods,
                              int crop);

void cmd_synth(const PipelineConfig& pc, bool force, std::ostream& log);
RegistrationResult cmd_register(const PipelineConfig& pc, bool force, std::ostream& log);
ReconstructionReport cmd_reconstruct(const PipelineConfig& pc, bool force, std::ostream& log);
MetricsReport cmd_evaluate(const PipelineConfig& pc, bool force, std::ostream& log);
/// synth (if enabled), register, reconstruct, baseline, evaluate. A failing
/// stage aborts the run; the error message names the stage.
MetricsReport cmd_pipeline(const PipelineConfig& pc, bool force, std::ostream& log);

}  // namespace modsr
