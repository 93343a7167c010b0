#include "modsr/observation.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>

#include "modsr/error.hpp"

namespace modsr {

HrGridSpec::HrGridSpec(int width, int height, ModuleRect rect, int magnification)
    : width_(width), height_(height), rect_(rect), magnification_(magnification) {
    if (width <= 0 || height <= 0) throw ConfigError("HR grid dimensions must be positive");
    if (!(rect.width() > 0.0) || !(rect.height() > 0.0)) throw ConfigError("module rect must have positive extent");
    if (magnification < 1) throw ConfigError("magnification must be >= 1");
    const double dx = rect.width() / width;
    const double dy = rect.height() / height;
    if (std::abs(dx - dy) > 1e-9 * dx)
        throw ConfigError("HR grid spacing is not uniform: " + std::to_string(dx) + " vs " + std::to_string(dy));
}

HrGridSpec HrGridSpec::from_density(ModuleRect rect, double pixels_per_unit, int magnification) {
    if (!(pixels_per_unit > 0.0)) throw ConfigError("pixels per unit must be positive");
    const double density = pixels_per_unit * magnification;
    const int w = static_cast<int>(std::lround(rect.width() * density));
    const int h = static_cast<int>(std::lround(rect.height() * density));
    return HrGridSpec(w, h, rect, magnification);
}

Eigen::Vector2d HrGridSpec::to_grid(const ModulePoint& p) const {
    const double d = spacing();
    return {(p.y1 - rect_.y1_min) / d - 0.5, (p.y2 - rect_.y2_min) / d - 0.5};
}

ModulePoint HrGridSpec::to_module(double x, double y) const {
    const double d = spacing();
    return {rect_.y1_min + (x + 0.5) * d, rect_.y2_min + (y + 0.5) * d};
}

HrGridSpec HrGridSpec::coarsened(int factor) const {
    if (factor < 1) throw ConfigError("coarsening factor must be >= 1");
    if (factor == 1) return *this;
    const int w = (width_ + factor - 1) / factor;
    const int h = (height_ + factor - 1) / factor;
    const double d = spacing() * factor;
    ModuleRect r = rect_;
    r.y1_max = r.y1_min + w * d;
    r.y2_max = r.y2_min + h * d;
    return HrGridSpec(w, h, r, magnification_);
}

HrGridSpec HrGridSpec::with_magnification(int magnification) const {
    const double base_density = width_ / (rect_.width() * magnification_);
    return from_density(rect_, base_density, magnification);
}

ImageGrid HrGridSpec::make_image(double fill) const {
    ImageGrid img(width_, height_, fill);
    img.spacing = spacing();
    const ModulePoint o = to_module(0.0, 0.0);
    img.origin_x = o.y1;
    img.origin_y = o.y2;
    return img;
}

SystemMatrix::SystemMatrix(int lr_width, int lr_height, int hr_width, int hr_height)
    : lr_width_(lr_width), lr_height_(lr_height), hr_width_(hr_width), hr_height_(hr_height) {
    row_valid_.reserve(static_cast<std::size_t>(lr_width) * lr_height);
    row_ptr_.reserve(static_cast<std::size_t>(lr_width) * lr_height + 1);
}

void SystemMatrix::append_row(const std::vector<std::pair<std::uint32_t, double>>& entries, bool valid) {
    if (row_valid_.size() >= static_cast<std::size_t>(lr_width_) * lr_height_)
        throw DataError("SystemMatrix: too many rows");
    if (valid) {
        for (const auto& [c, w] : entries) {
            cols_.push_back(c);
            weights_.push_back(w);
        }
    }
    row_ptr_.push_back(cols_.size());
    row_valid_.push_back(valid ? 1 : 0);
}

void SystemMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = rows();
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += weights_[k] * x[cols_[k]];
        y[r] = acc;
    }
}

void SystemMatrix::multiply_transpose_add(std::span<const double> y, std::span<const double> w,
                                          std::span<double> x) const {
    const std::size_t n = rows();
    for (std::size_t r = 0; r < n; ++r) {
        if (!row_valid_[r]) continue;
        const double v = w.empty() ? y[r] : w[r] * y[r];
        if (v == 0.0) continue;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) x[cols_[k]] += weights_[k] * v;
    }
}

MotionField build_motion_field(int frame_index, const Homography& h, const CameraModel& cam, const HrGridSpec& hr,
                               int lr_width, int lr_height) {
    MotionField field;
    field.frame_index = frame_index;
    field.lr_width = lr_width;
    field.lr_height = lr_height;
    field.magnification = hr.magnification();
    const std::size_t n = static_cast<std::size_t>(lr_width) * lr_height;
    field.vectors.assign(n, Eigen::Vector2d::Zero());
    field.valid.assign(n, 0);

    const Eigen::Matrix3d h_inv = h.matrix().inverse();
    for (int r = 0; r < lr_height; ++r) {
        for (int c = 0; c < lr_width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * lr_width + c;
            ModulePoint y;
            try {
                const PlanePoint plane = undistort_point(cam.to_plane({double(c), double(r)}), cam.kappa());
                y = plane_to_module(plane, h_inv);
            } catch (const NumericalError&) {
                continue;
            }
            if (!hr.rect().contains(y)) continue;
            const Eigen::Vector2d pos = hr.to_grid(y);
            if (!pos.allFinite()) continue;
            field.vectors[i] = pos - field.scaled_position(c, r);
            field.valid[i] = 1;
        }
    }
    return field;
}

SystemMatrix build_system_matrix(const MotionField& field, double psf_sigma, const HrGridSpec& hr) {
    if (!(psf_sigma > 0.0)) throw ConfigError("psf_sigma must be positive");
    const int hw = hr.width();
    const int hh = hr.height();
    SystemMatrix w(field.lr_width, field.lr_height, hw, hh);
    const double radius = 3.0 * psf_sigma;
    const int half = static_cast<int>(std::ceil(radius));
    const double inv_two_sigma2 = 1.0 / (2.0 * psf_sigma * psf_sigma);

    std::vector<std::pair<std::uint32_t, double>> entries;
    entries.reserve(static_cast<std::size_t>(2 * half + 1) * (2 * half + 1));
    for (int r = 0; r < field.lr_height; ++r) {
        for (int c = 0; c < field.lr_width; ++c) {
            entries.clear();
            const std::size_t i = static_cast<std::size_t>(r) * field.lr_width + c;
            if (!field.valid[i]) {
                w.append_row(entries, false);
                continue;
            }
            const Eigen::Vector2d pos = field.hr_position(c, r);
            const int x0 = static_cast<int>(std::lround(pos.x()));
            const int y0 = static_cast<int>(std::lround(pos.y()));
            double sum = 0.0;
            for (int y = y0 - half; y <= y0 + half; ++y) {
                if (y < 0 || y >= hh) continue;
                for (int x = x0 - half; x <= x0 + half; ++x) {
                    if (x < 0 || x >= hw) continue;
                    const double dx = x - pos.x();
                    const double dy = y - pos.y();
                    const double d2 = dx * dx + dy * dy;
                    if (d2 > radius * radius) continue;
                    const double g = std::exp(-d2 * inv_two_sigma2);
                    if (g == 0.0) continue;
                    entries.emplace_back(static_cast<std::uint32_t>(y * hw + x), g);
                    sum += g;
                }
            }
            if (!(sum > 0.0)) {
                // Stencil narrower than the grid spacing: all weight on the nearest pixel.
                entries.clear();
                const int xn = std::clamp(x0, 0, hw - 1);
                const int yn = std::clamp(y0, 0, hh - 1);
                entries.emplace_back(static_cast<std::uint32_t>(yn * hw + xn), 1.0);
                sum = 1.0;
            }
            for (auto& e : entries) e.second /= sum;
            w.append_row(entries, true);
        }
    }
    return w;
}

ImageGrid apply_forward(const SystemMatrix& w, const ImageGrid& f) {
    if (f.width() != w.hr_width() || f.height() != w.hr_height())
        throw DataError("apply_forward: HR image is " + std::to_string(f.width()) + "x" + std::to_string(f.height()) +
                        ", operator expects " + std::to_string(w.hr_width()) + "x" + std::to_string(w.hr_height()));
    ImageGrid g(w.lr_width(), w.lr_height());
    w.multiply(f.pixels(), g.pixels());
    std::vector<std::uint8_t> mask(g.size());
    for (std::size_t r = 0; r < g.size(); ++r) mask[r] = w.row_valid(r) ? 1 : 0;
    g.set_mask(std::move(mask));
    return g;
}

ImageGrid apply_adjoint(const SystemMatrix& w, const ImageGrid& g) {
    if (g.width() != w.lr_width() || g.height() != w.lr_height())
        throw DataError("apply_adjoint: LR image is " + std::to_string(g.width()) + "x" + std::to_string(g.height()) +
                        ", operator expects " + std::to_string(w.lr_width()) + "x" + std::to_string(w.lr_height()));
    ImageGrid f(w.hr_width(), w.hr_height());
    if (g.has_mask()) {
        std::vector<double> masked(g.data());
        for (std::size_t r = 0; r < masked.size(); ++r)
            if (!g.valid(r)) masked[r] = 0.0;
        w.multiply_transpose_add(masked, {}, f.pixels());
    } else {
        w.multiply_transpose_add(g.pixels(), {}, f.pixels());
    }
    return f;
}

}  // namespace modsr
