#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modsr/image.hpp"

namespace modsr {

inline constexpr double kPsnrCap = 99.0;

/// PSNR in dB (dynamic range 1) over pixels valid in both images, ignoring a
/// border of `crop` pixels. Identical images report kPsnrCap.
double psnr(const ImageGrid& a, const ImageGrid& b, int crop = 0);

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, over windows that lie entirely in the cropped, mutually valid region.
double ssim(const ImageGrid& a, const ImageGrid& b, int crop = 0);

/// Fraction of crack pixels (mask != 0) that have a detected pixel, a valid
/// pixel of `f` below `threshold`, within `radius` pixels (Chebyshev distance).
double crack_recall(const ImageGrid& f, const std::vector<std::uint8_t>& crack_mask, double threshold, int radius = 1);

struct MetricsRow {
    std::string method;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricsReport {
    int border_crop = 0;
    std::vector<MetricsRow> rows;

    std::string to_table() const;
    std::string to_json() const;
};

}  // namespace modsr
