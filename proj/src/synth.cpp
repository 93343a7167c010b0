#include "modsr/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "modsr/error.hpp"

namespace modsr {

void SceneSpec::validate() const {
    if (cell_rows < 1 || cell_cols < 1) throw ConfigError("scene needs at least one cell");
    if (busbar_count < 0 || crack_count < 0) throw ConfigError("busbar and crack counts must be nonnegative");
    if (crack_count > cell_rows * cell_cols) throw ConfigError("at most one crack per cell");
    if (!(texture_amplitude >= 0.0 && texture_amplitude <= 1.0)) throw ConfigError("texture_amplitude must lie in [0, 1]");
    if (!(gap_width > 0.0)) throw ConfigError("gap width must be positive");
}

void NoiseParams::validate() const {
    if (!(gaussian_sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
    if (!(impulse_fraction >= 0.0 && impulse_fraction < 1.0)) throw ConfigError("impulse fraction must lie in [0, 1)");
}

void AcquisitionSpec::validate() const {
    if (n_frames < 1) throw ConfigError("n_frames must be >= 1");
    if (lr_width < 1 || lr_height < 1) throw ConfigError("LR frame size must be positive");
    if (!(distance > 0.0)) throw ConfigError("camera distance must be positive");
    if (!(jitter.tilt >= 0.0 && jitter.tilt < 1.0)) throw ConfigError("tilt foreshortening must lie in [0, 1)");
    noise.validate();
}

namespace {

struct CellGeometry {
    double cell_w;
    double cell_h;
    double y1_min;
    double y2_min;
};

CellGeometry cell_geometry(const SceneSpec& spec) {
    const ModuleRect& r = spec.hr.rect();
    return {r.width() / spec.cell_cols, r.height() / spec.cell_rows, r.y1_min, r.y2_min};
}

// Bresenham segment in HR pixel coordinates.
void draw_segment(int x0, int y0, int x1, int y1, int w, int h, std::vector<std::uint8_t>& mask) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (x0 >= 0 && y0 >= 0 && x0 < w && y0 < h) mask[static_cast<std::size_t>(y0) * w + x0] = 1;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

std::vector<ModulePoint> cell_corners(const SceneSpec& scene) {
    const CellGeometry g = cell_geometry(scene);
    std::vector<ModulePoint> pts;
    for (int r = 0; r <= scene.cell_rows; ++r)
        for (int c = 0; c <= scene.cell_cols; ++c) pts.push_back({g.y1_min + c * g.cell_w, g.y2_min + r * g.cell_h});
    return pts;
}

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const HrGridSpec& hr = spec.hr;
    const CellGeometry g = cell_geometry(spec);
    Scene scene;
    scene.image = hr.make_image(spec.cell_level);
    scene.crack_mask.assign(scene.image.size(), 0);

    struct Wave {
        double a, f1, f2, phase;
    };
    std::vector<Wave> waves(4);
    double amp_sum = 0.0;
    for (auto& w : waves) {
        w = {0.5 + uni(rng), 0.1 + 0.5 * uni(rng), 0.1 + 0.5 * uni(rng), 2.0 * std::numbers::pi * uni(rng)};
        if (uni(rng) < 0.5) w.f2 = -w.f2;
        amp_sum += w.a;
    }

    const double half_gap = 0.5 * spec.gap_width;
    const double half_bar = 0.5 * spec.busbar_width;
    for (int y = 0; y < hr.height(); ++y) {
        for (int x = 0; x < hr.width(); ++x) {
            const ModulePoint p = hr.to_module(x, y);
            const double u = (p.y1 - g.y1_min) / g.cell_w;
            const double v = (p.y2 - g.y2_min) / g.cell_h;
            const double fu = (u - std::floor(u)) * g.cell_w;  // position inside the cell
            const double fv = (v - std::floor(v)) * g.cell_h;
            double value = spec.cell_level;
            const bool in_gap = fu < half_gap || fu > g.cell_w - half_gap || fv < half_gap || fv > g.cell_h - half_gap;
            if (in_gap) {
                value = spec.gap_level;
            } else {
                bool on_bar = false;
                for (int b = 0; b < spec.busbar_count; ++b) {
                    const double pos = g.cell_w * (b + 1.0) / (spec.busbar_count + 1.0);
                    if (std::abs(fu - pos) <= half_bar) on_bar = true;
                }
                if (on_bar) {
                    value = spec.busbar_level;
                } else if (spec.texture_amplitude > 0.0) {
                    double t = 0.0;
                    for (const auto& w : waves)
                        t += w.a * std::sin(2.0 * std::numbers::pi * (w.f1 * p.y1 + w.f2 * p.y2) + w.phase);
                    value += spec.texture_amplitude * 0.1 * t / amp_sum;
                }
            }
            scene.image.at(x, y) = std::clamp(value, 0.0, 1.0);
        }
    }

    // Cracks: random-walk polylines, one per distinct cell, kept off the gaps.
    std::vector<int> cells(spec.cell_rows * spec.cell_cols);
    for (std::size_t k = 0; k < cells.size(); ++k) cells[k] = static_cast<int>(k);
    std::shuffle(cells.begin(), cells.end(), rng);
    const double margin = half_gap + 0.1 * std::min(g.cell_w, g.cell_h);
    for (int c = 0; c < spec.crack_count; ++c) {
        const int cell = cells[c];
        const double x0 = g.y1_min + (cell % spec.cell_cols) * g.cell_w;
        const double y0 = g.y2_min + (cell / spec.cell_cols) * g.cell_h;
        auto inside = [&](double a, double b) {
            return a >= x0 + margin && a <= x0 + g.cell_w - margin && b >= y0 + margin && b <= y0 + g.cell_h - margin;
        };
        std::vector<ModulePoint> line;
        ModulePoint cur{x0 + margin + (g.cell_w - 2 * margin) * uni(rng), y0 + margin + (g.cell_h - 2 * margin) * uni(rng)};
        line.push_back(cur);
        double theta = 2.0 * std::numbers::pi * uni(rng);
        for (int s = 0; s < spec.crack_segments; ++s) {
            bool placed = false;
            for (int attempt = 0; attempt < 8 && !placed; ++attempt) {
                const double t = theta + 0.4 * gauss(rng) + (attempt > 0 ? std::numbers::pi * uni(rng) : 0.0);
                const ModulePoint next{cur.y1 + spec.crack_step * std::cos(t), cur.y2 + spec.crack_step * std::sin(t)};
                if (inside(next.y1, next.y2)) {
                    theta = t;
                    cur = next;
                    line.push_back(cur);
                    placed = true;
                }
            }
            if (!placed) break;
        }
        for (std::size_t k = 0; k + 1 < line.size(); ++k) {
            const Eigen::Vector2d a = hr.to_grid(line[k]);
            const Eigen::Vector2d b = hr.to_grid(line[k + 1]);
            draw_segment(static_cast<int>(std::lround(a.x())), static_cast<int>(std::lround(a.y())),
                         static_cast<int>(std::lround(b.x())), static_cast<int>(std::lround(b.y())), hr.width(),
                         hr.height(), scene.crack_mask);
        }
        if (line.size() == 1) {
            const Eigen::Vector2d a = hr.to_grid(line[0]);
            draw_segment(static_cast<int>(std::lround(a.x())), static_cast<int>(std::lround(a.y())),
                         static_cast<int>(std::lround(a.x())), static_cast<int>(std::lround(a.y())), hr.width(),
                         hr.height(), scene.crack_mask);
        }
        scene.cracks.push_back(std::move(line));
    }
    for (std::size_t k = 0; k < scene.crack_mask.size(); ++k)
        if (scene.crack_mask[k]) scene.image[k] = spec.crack_level;
    return scene;
}

namespace {

Homography sample_pose(const AcquisitionSpec& acq, const ModuleRect& rect, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const double deg = std::numbers::pi / 180.0;
    const double tilt_max = std::acos(1.0 - acq.jitter.tilt);
    const double rz = sym(rng) * acq.jitter.rotation_deg * deg;
    const double rx = sym(rng) * tilt_max;
    const double ry = sym(rng) * tilt_max;
    const Eigen::Matrix3d rot = (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
                                 Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()) *
                                 Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()))
                                    .toRotationMatrix();
    const Eigen::Vector3d t(sym(rng) * acq.jitter.translation, sym(rng) * acq.jitter.translation,
                            acq.distance + sym(rng) * acq.jitter.translation);
    const Eigen::Vector2d c(0.5 * (rect.y1_min + rect.y1_max), 0.5 * (rect.y2_min + rect.y2_max));
    Eigen::Matrix3d h;
    h.col(0) = rot.col(0);
    h.col(1) = rot.col(1);
    h.col(2) = t - c.x() * rot.col(0) - c.y() * rot.col(1);
    return Homography(h);
}

bool pose_visible(const Homography& h, const CameraModel& cam, const ModuleRect& rect, const AcquisitionSpec& acq) {
    constexpr int kSamples = 40;
    for (int side = 0; side < 4; ++side) {
        for (int k = 0; k <= kSamples; ++k) {
            const double t = static_cast<double>(k) / kSamples;
            ModulePoint y;
            switch (side) {
                case 0: y = {rect.y1_min + t * rect.width(), rect.y2_min}; break;
                case 1: y = {rect.y1_min + t * rect.width(), rect.y2_max}; break;
                case 2: y = {rect.y1_min, rect.y2_min + t * rect.height()}; break;
                default: y = {rect.y1_max, rect.y2_min + t * rect.height()}; break;
            }
            const Eigen::Vector3d p = h.apply({y.y1, y.y2, 1.0});
            if (!(p.z() > kHomogeneousEps)) return false;
            const double r = std::hypot(p.x() / p.z(), p.y() / p.z());
            if (!in_monotone_window(r, cam.kappa())) return false;
            const PixelPoint u = forward_map(y, h, cam);
            if (u.u < acq.margin || u.v < acq.margin || u.u > acq.lr_width - 1 - acq.margin ||
                u.v > acq.lr_height - 1 - acq.margin)
                return false;
        }
    }
    return true;
}

}  // namespace

Sequence generate_sequence(const ImageGrid& f, const SceneSpec& scene, const AcquisitionSpec& acq) {
    acq.validate();
    const HrGridSpec& hr = scene.hr;
    if (f.width() != hr.width() || f.height() != hr.height())
        throw DataError("generate_sequence: HR image does not match the scene grid");
    const double psf = acq.psf_sigma > 0.0 ? acq.psf_sigma : default_psf_sigma(hr.magnification());
    std::mt19937_64 rng(acq.seed);

    Sequence seq;
    seq.truth.camera = acq.camera;
    // Poses are drawn sequentially so the sequence only depends on the seed.
    for (int i = 0; i < acq.n_frames; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            const Homography h = sample_pose(acq, hr.rect(), rng);
            if (pose_visible(h, acq.camera, hr.rect(), acq)) {
                seq.truth.homographies.push_back(h);
                ok = true;
            }
        }
        if (!ok) throw ConfigError("generate_sequence: no visible pose after 100 attempts for frame " + std::to_string(i));
        seq.truth.frame_indices.push_back(i);
    }
    seq.truth.residuals.assign(acq.n_frames, 0.0);
    seq.truth.reprojection_rms.assign(acq.n_frames, 0.0);
    seq.truth.status.assign(acq.n_frames, RefineStatus::NotRun);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const auto corners = cell_corners(scene);
    for (int i = 0; i < acq.n_frames; ++i) {
        const Homography& h = seq.truth.homographies[i];
        const MotionField field = build_motion_field(i, h, acq.camera, hr, acq.lr_width, acq.lr_height);
        const SystemMatrix w = build_system_matrix(field, psf, hr);
        ImageGrid g = apply_forward(w, f);
        for (std::size_t k = 0; k < g.size(); ++k) {
            double v = g.valid(k) ? g[k] : acq.background;
            if (acq.noise.gaussian_sigma > 0.0) v += acq.noise.gaussian_sigma * gauss(rng);
            if (acq.noise.impulse_fraction > 0.0 && uni(rng) < acq.noise.impulse_fraction) v = uni(rng) < 0.5 ? 0.0 : 1.0;
            g[k] = std::clamp(v, 0.0, 1.0);
        }
        g.clear_mask();
        seq.frames.push_back(std::move(g));

        CorrespondenceSet set;
        set.frame_index = i;
        for (const auto& y : corners) set.pairs.push_back({y, forward_map(y, h, acq.camera)});
        seq.correspondences.push_back(std::move(set));
    }
    return seq;
}

std::vector<CorrespondenceSet> perturb_correspondences(const std::vector<CorrespondenceSet>& sets, double sigma_px,
                                                       std::uint64_t seed) {
    if (!(sigma_px >= 0.0)) throw ConfigError("perturb_correspondences: sigma must be nonnegative");
    std::vector<CorrespondenceSet> out = sets;
    if (sigma_px == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma_px);
    for (auto& set : out)
        for (auto& c : set.pairs) {
            c.pixel.u += gauss(rng);
            c.pixel.v += gauss(rng);
        }
    return out;
}

int count_components(const std::vector<std::uint8_t>& mask, int width, int height) {
    std::vector<int> label(mask.size(), 0);
    int n = 0;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || label[start]) continue;
        ++n;
        label[start] = n;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t k = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(k % width);
            const int y = static_cast<int>(k / width);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx;
                    const int yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= width || yy >= height) continue;
                    const std::size_t kk = static_cast<std::size_t>(yy) * width + xx;
                    if (mask[kk] && !label[kk]) {
                        label[kk] = n;
                        stack.push_back(kk);
                    }
                }
        }
    }
    return n;
}

}  // namespace modsr
