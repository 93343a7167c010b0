#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "modsr/geometry.hpp"
#include "modsr/image.hpp"

namespace modsr {

struct ModuleRect {
    double y1_min = 0.0;
    double y2_min = 0.0;
    double y1_max = 1.0;
    double y2_max = 1.0;

    double width() const { return y1_max - y1_min; }
    double height() const { return y2_max - y2_min; }
    bool contains(const ModulePoint& p) const {
        return p.y1 >= y1_min && p.y1 <= y1_max && p.y2 >= y2_min && p.y2 <= y2_max;
    }
};

/// Uniform pixel grid on the module plane. HR pixel (x, y) covers
/// [y1_min + x d, y1_min + (x+1) d] x [y2_min + y d, ...] with d = spacing().
class HrGridSpec {
public:
    HrGridSpec() = default;
    /// Throws ConfigError if the spacing is not uniform in both directions.
    HrGridSpec(int width, int height, ModuleRect rect, int magnification);

    /// Grid with `pixels_per_unit * magnification` pixels per module unit.
    static HrGridSpec from_density(ModuleRect rect, double pixels_per_unit, int magnification);

    int width() const { return width_; }
    int height() const { return height_; }
    const ModuleRect& rect() const { return rect_; }
    int magnification() const { return magnification_; }
    double spacing() const { return rect_.width() / width_; }

    /// Continuous HR pixel coordinate of a module point (pixel centers at integers).
    Eigen::Vector2d to_grid(const ModulePoint& p) const;
    ModulePoint to_module(double x, double y) const;
    bool contains_grid(double x, double y) const {
        return x >= -0.5 && y >= -0.5 && x <= width_ - 0.5 && y <= height_ - 0.5;
    }

    /// Same rect, `factor` times fewer pixels per side (factor must divide evenly
    /// enough that spacing stays uniform; dimensions are rounded).
    HrGridSpec coarsened(int factor) const;
    /// Same rect at a different magnification, keeping the per-unit density of magnification 1.
    HrGridSpec with_magnification(int magnification) const;

    /// Blank image with this grid's geometry metadata.
    ImageGrid make_image(double fill = 0.0) const;

private:
    int width_ = 1;
    int height_ = 1;
    ModuleRect rect_;
    int magnification_ = 1;
};

/// Per-LR-pixel displacement into the HR grid: the HR position of LR pixel
/// (c, r) is s (c + 0.5) - 0.5 + v (and likewise for rows).
struct MotionField {
    int frame_index = 0;
    int lr_width = 0;
    int lr_height = 0;
    int magnification = 1;
    std::vector<Eigen::Vector2d> vectors;
    std::vector<std::uint8_t> valid;

    Eigen::Vector2d scaled_position(int c, int r) const {
        return {magnification * (c + 0.5) - 0.5, magnification * (r + 0.5) - 0.5};
    }
    Eigen::Vector2d hr_position(int c, int r) const {
        return scaled_position(c, r) + vectors[static_cast<std::size_t>(r) * lr_width + c];
    }
};

/// Sparse row-major (CSR) operator from HR pixels to LR pixels.
class SystemMatrix {
public:
    SystemMatrix() = default;
    SystemMatrix(int lr_width, int lr_height, int hr_width, int hr_height);

    std::size_t rows() const { return row_valid_.size(); }
    std::size_t cols() const { return static_cast<std::size_t>(hr_width_) * hr_height_; }
    std::size_t nonzeros() const { return weights_.size(); }
    int lr_width() const { return lr_width_; }
    int lr_height() const { return lr_height_; }
    int hr_width() const { return hr_width_; }
    int hr_height() const { return hr_height_; }

    bool row_valid(std::size_t r) const { return row_valid_[r] != 0; }
    std::size_t row_begin(std::size_t r) const { return row_ptr_[r]; }
    std::size_t row_end(std::size_t r) const { return row_ptr_[r + 1]; }
    std::uint32_t col(std::size_t k) const { return cols_[k]; }
    double weight(std::size_t k) const { return weights_[k]; }

    /// Rows must be appended in order.
    void append_row(const std::vector<std::pair<std::uint32_t, double>>& entries, bool valid);

    /// y = W x over valid rows; invalid rows yield 0.
    void multiply(std::span<const double> x, std::span<double> y) const;
    /// x += W^T (w .* y) over valid rows (w may be empty for unit weights).
    void multiply_transpose_add(std::span<const double> y, std::span<const double> w, std::span<double> x) const;

private:
    int lr_width_ = 0;
    int lr_height_ = 0;
    int hr_width_ = 0;
    int hr_height_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::uint32_t> cols_;
    std::vector<double> weights_;
    std::vector<std::uint8_t> row_valid_;
};

/// Default PSF width in HR pixels for magnification s.
inline double default_psf_sigma(int magnification) { return 0.4 * magnification; }

MotionField build_motion_field(int frame_index, const Homography& h, const CameraModel& cam, const HrGridSpec& hr,
                               int lr_width, int lr_height);

SystemMatrix build_system_matrix(const MotionField& field, double psf_sigma, const HrGridSpec& hr);

/// Noiseless part of g = W f. Invalid rows are masked in the result.
ImageGrid apply_forward(const SystemMatrix& w, const ImageGrid& f);
/// W^T g. Masked LR pixels and invalid rows contribute zero.
ImageGrid apply_adjoint(const SystemMatrix& w, const ImageGrid& g);

}  // namespace modsr
