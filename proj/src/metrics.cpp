#include "modsr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "modsr/error.hpp"

namespace modsr {

namespace {

void check_shapes(const ImageGrid& a, const ImageGrid& b, int crop) {
    if (a.width() != b.width() || a.height() != b.height())
        throw DataError("metrics: image sizes differ (" + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                        " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
    if (crop < 0 || 2 * crop >= a.width() || 2 * crop >= a.height()) throw DataError("metrics: border crop too large");
}

}  // namespace

double psnr(const ImageGrid& a, const ImageGrid& b, int crop) {
    check_shapes(a, b, crop);
    double se = 0.0;
    std::size_t n = 0;
    for (int y = crop; y < a.height() - crop; ++y)
        for (int x = crop; x < a.width() - crop; ++x) {
            if (!a.valid(x, y) || !b.valid(x, y)) continue;
            const double d = a.at(x, y) - b.at(x, y);
            se += d * d;
            ++n;
        }
    if (n == 0) throw DataError("psnr: no mutually valid pixels");
    const double mse = se / static_cast<double>(n);
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageGrid& a, const ImageGrid& b, int crop) {
    check_shapes(a, b, crop);
    constexpr int kRadius = 5;
    constexpr double kSigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    double kernel[2 * kRadius + 1];
    double ksum = 0.0;
    for (int k = -kRadius; k <= kRadius; ++k) {
        kernel[k + kRadius] = std::exp(-0.5 * k * k / (kSigma * kSigma));
        ksum += kernel[k + kRadius];
    }
    for (double& k : kernel) k /= ksum;

    const int x0 = crop;
    const int y0 = crop;
    const int w = a.width() - 2 * crop;
    const int h = a.height() - 2 * crop;
    if (w < 2 * kRadius + 1 || h < 2 * kRadius + 1) throw DataError("ssim: region smaller than the window");

    // Separable filtering of a, b, a^2, b^2, ab over the cropped region.
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> src[5];
    for (auto& s : src) s.resize(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            const double va = a.at(x0 + x, y0 + y);
            const double vb = b.at(x0 + x, y0 + y);
            src[0][k] = va;
            src[1][k] = vb;
            src[2][k] = va * va;
            src[3][k] = vb * vb;
            src[4][k] = va * vb;
        }
    // 2-D prefix count of invalid pixels for the window validity test.
    std::vector<int> bad((w + 1) * static_cast<std::size_t>(h + 1), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int v = (a.valid(x0 + x, y0 + y) && b.valid(x0 + x, y0 + y)) ? 0 : 1;
            bad[(y + 1) * static_cast<std::size_t>(w + 1) + x + 1] = v + bad[y * static_cast<std::size_t>(w + 1) + x + 1] +
                                                                     bad[(y + 1) * static_cast<std::size_t>(w + 1) + x] -
                                                                     bad[y * static_cast<std::size_t>(w + 1) + x];
        }

    std::vector<double> tmp(n);
    std::vector<double> filt[5];
    for (int c = 0; c < 5; ++c) {
        filt[c].assign(n, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = kRadius; x < w - kRadius; ++x) {
                double acc = 0.0;
                for (int k = -kRadius; k <= kRadius; ++k) acc += kernel[k + kRadius] * src[c][y * static_cast<std::size_t>(w) + x + k];
                tmp[y * static_cast<std::size_t>(w) + x] = acc;
            }
        for (int y = kRadius; y < h - kRadius; ++y)
            for (int x = kRadius; x < w - kRadius; ++x) {
                double acc = 0.0;
                for (int k = -kRadius; k <= kRadius; ++k) acc += kernel[k + kRadius] * tmp[(y + k) * static_cast<std::size_t>(w) + x];
                filt[c][y * static_cast<std::size_t>(w) + x] = acc;
            }
    }
    double total = 0.0;
    std::size_t count = 0;
    const std::size_t stride = w + 1;
    for (int y = kRadius; y < h - kRadius; ++y)
        for (int x = kRadius; x < w - kRadius; ++x) {
            const int xa = x - kRadius, xb = x + kRadius + 1, ya = y - kRadius, yb = y + kRadius + 1;
            const int nbad = bad[yb * stride + xb] - bad[ya * stride + xb] - bad[yb * stride + xa] + bad[ya * stride + xa];
            if (nbad) continue;
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            const double ma = filt[0][k];
            const double mb = filt[1][k];
            const double va = filt[2][k] - ma * ma;
            const double vb = filt[3][k] - mb * mb;
            const double cov = filt[4][k] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    if (count == 0) throw DataError("ssim: no fully valid window");
    return total / static_cast<double>(count);
}

double crack_recall(const ImageGrid& f, const std::vector<std::uint8_t>& crack_mask, double threshold, int radius) {
    if (crack_mask.size() != f.size()) throw DataError("crack_recall: mask does not match the image");
    if (radius < 0) throw ConfigError("crack_recall: radius must be nonnegative");
    std::size_t total = 0, hit = 0;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) {
            if (!crack_mask[f.index(x, y)]) continue;
            ++total;
            bool found = false;
            for (int dy = -radius; dy <= radius && !found; ++dy)
                for (int dx = -radius; dx <= radius && !found; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= f.width() || yy >= f.height()) continue;
                    found = f.valid(xx, yy) && f.at(xx, yy) < threshold;
                }
            if (found) ++hit;
        }
    if (total == 0) throw DataError("crack_recall: mask has no crack pixels");
    return static_cast<double>(hit) / static_cast<double>(total);
}

std::string MetricsReport::to_table() const {
    std::string out = "method              psnr_db    ssim\n";
    char line[128];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-18s %8.3f  %6.4f\n", r.method.c_str(), r.psnr, r.ssim);
        out += line;
    }
    std::snprintf(line, sizeof line, "(border crop %d px)\n", border_crop);
    out += line;
    return out;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["border_crop"] = border_crop;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) j["rows"].push_back({{"method", r.method}, {"psnr", r.psnr}, {"ssim", r.ssim}});
    return j.dump(2);
}

}  // namespace modsr
