#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace modsr {

/// Grayscale image with intensities nominally in [0,1].
///
/// Pixel (x, y) has its center at continuous coordinate (x, y). An optional
/// per-pixel validity mask marks samples that carry no data (empty mask means
/// every pixel is valid). `spacing` and `origin` describe where the grid sits
/// in an external frame (module units for HR grids, 1/0 for LR frames): the
/// center of pixel (x, y) is at origin + spacing * (x, y).
class ImageGrid {
public:
    ImageGrid() = default;
    ImageGrid(int width, int height, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    double& at(int x, int y) { return pixels_[index(x, y)]; }
    double at(int x, int y) const { return pixels_[index(x, y)]; }
    double& operator[](std::size_t i) { return pixels_[i]; }
    double operator[](std::size_t i) const { return pixels_[i]; }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    std::span<double> pixels() { return pixels_; }
    std::span<const double> pixels() const { return pixels_; }
    std::vector<double>& data() { return pixels_; }
    const std::vector<double>& data() const { return pixels_; }

    bool has_mask() const { return !valid_.empty(); }
    bool valid(std::size_t i) const { return valid_.empty() || valid_[i] != 0; }
    bool valid(int x, int y) const { return valid(index(x, y)); }
    /// Allocates an all-valid mask if none exists yet.
    void set_valid(std::size_t i, bool v);
    const std::vector<std::uint8_t>& mask() const { return valid_; }
    void set_mask(std::vector<std::uint8_t> mask);
    void clear_mask() { valid_.clear(); }
    std::size_t valid_count() const;

    double spacing = 1.0;
    double origin_x = 0.0;
    double origin_y = 0.0;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
    std::vector<std::uint8_t> valid_;
};

/// Bilinear sample at continuous (x, y). Returns nullopt outside
/// [0, w-1] x [0, h-1] or when any contributing pixel is masked.
std::optional<double> sample_bilinear(const ImageGrid& img, double x, double y);

/// Bilinear sample with coordinates clamped to the image (replicate border).
double sample_bilinear_clamped(const ImageGrid& img, double x, double y);

/// Catmull-Rom cubic convolution kernel (a = -0.5).
double catmull_rom(double t);

/// Bicubic (Catmull-Rom) sample with replicate boundary handling. Returns
/// nullopt if (x, y) is outside [-0.5, w-0.5] x [-0.5, h-0.5].
std::optional<double> sample_bicubic(const ImageGrid& img, double x, double y);

/// Separable Gaussian blur with replicate boundaries (kernel radius ceil(3 sigma)).
ImageGrid gaussian_blur(const ImageGrid& img, double sigma);

/// Keeps every second pixel in both directions (pixel 2j of the input becomes j).
ImageGrid decimate2(const ImageGrid& img);

}  // namespace modsr
