#include "modsr/image.hpp"

#include <algorithm>
#include <cmath>

#include "modsr/error.hpp"

namespace modsr {

ImageGrid::ImageGrid(int width, int height, double fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DataError("ImageGrid: negative dimensions");
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

void ImageGrid::set_valid(std::size_t i, bool v) {
    if (valid_.empty()) valid_.assign(pixels_.size(), 1);
    valid_[i] = v ? 1 : 0;
}

void ImageGrid::set_mask(std::vector<std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != pixels_.size())
        throw DataError("ImageGrid: mask size does not match image");
    valid_ = std::move(mask);
}

std::size_t ImageGrid::valid_count() const {
    if (valid_.empty()) return pixels_.size();
    return static_cast<std::size_t>(std::count_if(valid_.begin(), valid_.end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

std::optional<double> sample_bilinear(const ImageGrid& img, double x, double y) {
    const int w = img.width();
    const int h = img.height();
    if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return std::nullopt;
    int x0 = static_cast<int>(x);
    int y0 = static_cast<int>(y);
    // Points on the last row/column use the previous cell with weight 1 on the edge.
    if (x0 >= w - 1) x0 = std::max(w - 2, 0);
    if (y0 >= h - 1) y0 = std::max(h - 2, 0);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    if (img.has_mask()) {
        if (!img.valid(x0, y0) || !img.valid(x1, y0) || !img.valid(x0, y1) || !img.valid(x1, y1))
            return std::nullopt;
    }
    const double top = (1.0 - ax) * img.at(x0, y0) + ax * img.at(x1, y0);
    const double bottom = (1.0 - ax) * img.at(x0, y1) + ax * img.at(x1, y1);
    return (1.0 - ay) * top + ay * bottom;
}

double sample_bilinear_clamped(const ImageGrid& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    const int x0 = std::min(static_cast<int>(x), std::max(img.width() - 2, 0));
    const int y0 = std::min(static_cast<int>(y), std::max(img.height() - 2, 0));
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    const double top = (1.0 - ax) * img.at(x0, y0) + ax * img.at(x1, y0);
    const double bottom = (1.0 - ax) * img.at(x0, y1) + ax * img.at(x1, y1);
    return (1.0 - ay) * top + ay * bottom;
}

double catmull_rom(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

std::optional<double> sample_bicubic(const ImageGrid& img, double x, double y) {
    const int w = img.width();
    const int h = img.height();
    if (!(x >= -0.5 && y >= -0.5 && x <= w - 0.5 && y <= h - 0.5)) return std::nullopt;
    const int xf = static_cast<int>(std::floor(x));
    const int yf = static_cast<int>(std::floor(y));
    double wx[4];
    double wy[4];
    for (int k = 0; k < 4; ++k) {
        wx[k] = catmull_rom(x - (xf - 1 + k));
        wy[k] = catmull_rom(y - (yf - 1 + k));
    }
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        const int yy = std::clamp(yf - 1 + j, 0, h - 1);
        double row = 0.0;
        for (int i = 0; i < 4; ++i) {
            const int xx = std::clamp(xf - 1 + i, 0, w - 1);
            row += wx[i] * img.at(xx, yy);
        }
        acc += wy[j] * row;
    }
    return acc;
}

ImageGrid gaussian_blur(const ImageGrid& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        sum += kernel[k + radius];
    }
    for (double& k : kernel) k /= sum;

    const int w = img.width();
    const int h = img.height();
    ImageGrid tmp(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * img.at(std::clamp(x + k, 0, w - 1), y);
            tmp.at(x, y) = acc;
        }
    }
    ImageGrid out = img;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp.at(x, std::clamp(y + k, 0, h - 1));
            out.at(x, y) = acc;
        }
    }
    return out;
}

ImageGrid decimate2(const ImageGrid& img) {
    const int w = (img.width() + 1) / 2;
    const int h = (img.height() + 1) / 2;
    ImageGrid out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = img.at(2 * x, 2 * y);
    if (img.has_mask()) {
        std::vector<std::uint8_t> mask(out.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) mask[out.index(x, y)] = img.valid(2 * x, 2 * y) ? 1 : 0;
        out.set_mask(std::move(mask));
    }
    out.spacing = img.spacing * 2.0;
    out.origin_x = img.origin_x;
    out.origin_y = img.origin_y;
    return out;
}

}  // namespace modsr
