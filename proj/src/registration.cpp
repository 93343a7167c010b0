#include "modsr/registration.hpp"

#include <Eigen/LU>
#include <cmath>
#include <string>

#include "lm.hpp"
#include "modsr/error.hpp"

namespace modsr {

const char* to_string(RefineStatus status) {
    switch (status) {
        case RefineStatus::NotRun: return "not_run";
        case RefineStatus::Converged: return "converged";
        case RefineStatus::MaxIterations: return "max_iterations";
        case RefineStatus::NoImprovement: return "no_improvement";
        case RefineStatus::Diverged: return "diverged";
    }
    return "unknown";
}

int RegistrationResult::position_of(int frame_index) const {
    for (std::size_t i = 0; i < frame_indices.size(); ++i)
        if (frame_indices[i] == frame_index) return static_cast<int>(i);
    return -1;
}

ImageGrid build_template(const std::vector<ImageGrid>& frames, const RegistrationResult& reg, const HrGridSpec& grid) {
    if (frames.size() != reg.size()) throw DataError("build_template: frame count does not match registration");
    ImageGrid sum = grid.make_image(0.0);
    std::vector<int> count(sum.size(), 0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Homography& h = reg.homographies[i];
        for (int y = 0; y < grid.height(); ++y) {
            for (int x = 0; x < grid.width(); ++x) {
                PixelPoint u;
                try {
                    u = forward_map(grid.to_module(x, y), h, reg.camera);
                } catch (const NumericalError&) {
                    continue;
                }
                const auto v = sample_bilinear(frames[i], u.u, u.v);
                if (!v) continue;
                const std::size_t k = sum.index(x, y);
                sum[k] += *v;
                ++count[k];
            }
        }
    }
    std::vector<std::uint8_t> mask(sum.size(), 0);
    std::size_t invalid = 0;
    for (std::size_t k = 0; k < sum.size(); ++k) {
        if (count[k] > 0) {
            sum[k] /= count[k];
            mask[k] = 1;
        } else {
            ++invalid;
        }
    }
    if (2 * invalid > sum.size())
        throw DataError("build_template: empty overlap (" + std::to_string(invalid) + " of " +
                        std::to_string(sum.size()) + " template pixels unobserved)");
    sum.set_mask(std::move(mask));
    return sum;
}

namespace {

// Template with masked pixels replaced by the mean of the valid ones, so
// clamped bilinear lookups near the support boundary stay bounded.
ImageGrid filled_template(const ImageGrid& templ) {
    if (!templ.has_mask()) return templ;
    double mean = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < templ.size(); ++k)
        if (templ.valid(k)) {
            mean += templ[k];
            ++n;
        }
    mean = n ? mean / n : 0.0;
    ImageGrid out = templ;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (!templ.valid(k)) out[k] = mean;
    return out;
}

struct FrameSamples {
    std::vector<double> values;           // g at the selected LR pixels
    std::vector<PlanePoint> distorted;    // K^-1 u
    std::vector<PlanePoint> undistorted;  // for the current kappa
};

double huberize(double r, const RegistrationOptions& opts) {
    if (!opts.huber) return r;
    const double a = std::abs(r);
    if (a <= opts.huber_delta) return r;
    return std::copysign(std::sqrt(2.0 * opts.huber_delta * a - opts.huber_delta * opts.huber_delta), r);
}

// LR pixels whose pre-image under (h, cam) lies on valid template support,
// one template pixel away from its border.
FrameSamples select_samples(const ImageGrid& frame, const Homography& h, const CameraModel& cam,
                            const ImageGrid& templ, const HrGridSpec& grid) {
    FrameSamples s;
    const Eigen::Matrix3d h_inv = h.matrix().inverse();
    for (int r = 0; r < frame.height(); ++r) {
        for (int c = 0; c < frame.width(); ++c) {
            if (!frame.valid(c, r)) continue;
            const PlanePoint d = cam.to_plane({double(c), double(r)});
            PlanePoint p;
            ModulePoint y;
            try {
                p = undistort_point(d, cam.kappa());
                y = plane_to_module(p, h_inv);
            } catch (const NumericalError&) {
                continue;
            }
            const Eigen::Vector2d g = grid.to_grid(y);
            if (!(g.x() >= 1.0 && g.y() >= 1.0 && g.x() <= grid.width() - 2.0 && g.y() <= grid.height() - 2.0))
                continue;
            const int x0 = static_cast<int>(g.x());
            const int y0 = static_cast<int>(g.y());
            if (!templ.valid(x0, y0) || !templ.valid(x0 + 1, y0) || !templ.valid(x0, y0 + 1) ||
                !templ.valid(x0 + 1, y0 + 1))
                continue;
            s.values.push_back(frame.at(c, r));
            s.distorted.push_back(d);
            s.undistorted.push_back(p);
        }
    }
    return s;
}

void frame_residuals(const FrameSamples& s, const Eigen::Matrix3d& h_inv, const ImageGrid& templ,
                     const HrGridSpec& grid, const RegistrationOptions& opts, double* out) {
    const double d = grid.spacing();
    const ModuleRect& rect = grid.rect();
    for (std::size_t k = 0; k < s.values.size(); ++k) {
        const PlanePoint& p = s.undistorted[k];
        const Eigen::Vector3d m = h_inv * Eigen::Vector3d(p.x, p.y, 1.0);
        double r = 1.0;
        if (std::abs(m.z()) > kHomogeneousEps) {
            const double gx = (m.x() / m.z() - rect.y1_min) / d - 0.5;
            const double gy = (m.y() / m.z() - rect.y2_min) / d - 0.5;
            r = s.values[k] - sample_bilinear_clamped(templ, gx, gy);
        }
        out[k] = huberize(r, opts);
    }
}

Eigen::Matrix3d grid_normalization(const HrGridSpec& grid) {
    const ModuleRect& r = grid.rect();
    const double s = 2.0 / std::max(r.width(), r.height());
    Eigen::Matrix3d t;
    t << s, 0.0, -s * 0.5 * (r.y1_min + r.y1_max), 0.0, s, -s * 0.5 * (r.y2_min + r.y2_max), 0.0, 0.0, 1.0;
    return t;
}

double rms(const Eigen::VectorXd& r) { return r.size() ? std::sqrt(r.squaredNorm() / r.size()) : 0.0; }

}  // namespace

RegistrationResult refine_photometric(const std::vector<ImageGrid>& frames, const RegistrationResult& initial,
                                      const ImageGrid& templ, const HrGridSpec& grid,
                                      const RegistrationOptions& opts) {
    if (frames.size() != initial.size()) throw DataError("refine_photometric: frame count does not match registration");
    if (templ.width() != grid.width() || templ.height() != grid.height())
        throw DataError("refine_photometric: template does not match its grid");
    const ImageGrid lookup = filled_template(templ);
    const Eigen::Matrix3d t = grid_normalization(grid);
    const Eigen::Matrix3d t_inv = t.inverse();

    detail::LmOptions lm;
    lm.max_iterations = opts.max_iterations;
    lm.relative_tolerance = opts.relative_tolerance;
    lm.jacobian_step = opts.jacobian_step;

    RegistrationResult out = initial;
    if (opts.fix_kappa_zero) out.camera = out.camera.with_kappa(0.0);
    out.status.assign(frames.size(), RefineStatus::NotRun);
    out.residuals.assign(frames.size(), 0.0);

    std::vector<FrameSamples> samples(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        samples[i] = select_samples(frames[i], out.homographies[i], out.camera, templ, grid);
        const FrameSamples& s = samples[i];
        const auto rows = static_cast<Eigen::Index>(s.values.size());
        if (rows < 8) {
            out.status[i] = RefineStatus::NoImprovement;
            continue;
        }
        const Eigen::Matrix3d h0 = out.homographies[i].matrix();
        auto params_to_hinv = [&](const Eigen::VectorXd& d) {
            Eigen::Matrix3d m;
            m << 1.0 + d[0], d[1], d[2], d[3], 1.0 + d[4], d[5], d[6], d[7], 1.0;
            return Eigen::Matrix3d((h0 * t_inv * m * t).inverse());
        };
        auto residuals = [&](const Eigen::VectorXd& d, Eigen::VectorXd& r) {
            frame_residuals(s, params_to_hinv(d), lookup, grid, opts, r.data());
        };
        auto jacobian = [&](const Eigen::VectorXd& d, const Eigen::VectorXd&) {
            return detail::numeric_jacobian(d, rows, residuals, opts.jacobian_step);
        };
        Eigen::VectorXd d = Eigen::VectorXd::Zero(8);
        const detail::LmReport report = detail::levenberg_marquardt(d, rows, residuals, jacobian, lm);
        out.status[i] = report.status;
        if (report.status == RefineStatus::Diverged && opts.strict)
            throw NumericalError("photometric refinement diverged for frame " + std::to_string(initial.frame_indices[i]));
        if (report.final_cost < report.initial_cost) {
            Eigen::Matrix3d m;
            m << 1.0 + d[0], d[1], d[2], d[3], 1.0 + d[4], d[5], d[6], d[7], 1.0;
            out.homographies[i] = Homography(h0 * t_inv * m * t);
        }
    }

    if (opts.refine_kappa && !opts.fix_kappa_zero) {
        Eigen::Index rows = 0;
        std::vector<Eigen::Matrix3d> h_inv(frames.size());
        std::vector<Eigen::Index> offset(frames.size() + 1, 0);
        for (std::size_t i = 0; i < frames.size(); ++i) {
            h_inv[i] = out.homographies[i].matrix().inverse();
            offset[i + 1] = offset[i] + static_cast<Eigen::Index>(samples[i].values.size());
        }
        rows = offset.back();
        if (rows > 0) {
            std::vector<FrameSamples> work = samples;
            auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
                const double kappa = x[0];
                for (std::size_t i = 0; i < frames.size(); ++i) {
                    FrameSamples& s = work[i];
                    for (std::size_t k = 0; k < s.distorted.size(); ++k) {
                        try {
                            s.undistorted[k] = undistort_point(s.distorted[k], kappa);
                        } catch (const NumericalError&) {
                            s.undistorted[k] = s.distorted[k];
                        }
                    }
                    frame_residuals(s, h_inv[i], lookup, grid, opts, r.data() + offset[i]);
                }
            };
            auto jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
                return detail::numeric_jacobian(x, rows, residuals, opts.jacobian_step);
            };
            Eigen::VectorXd x(1);
            x[0] = out.camera.kappa();
            const detail::LmReport report = detail::levenberg_marquardt(x, rows, residuals, jacobian, lm);
            if (report.final_cost < report.initial_cost && x[0] >= kKappaMin && x[0] <= kKappaMax)
                out.camera = out.camera.with_kappa(x[0]);
        }
    }

    out.residuals = photometric_rms(frames, out, templ, grid);
    return out;
}

std::vector<double> photometric_rms(const std::vector<ImageGrid>& frames, const RegistrationResult& reg,
                                    const ImageGrid& templ, const HrGridSpec& grid) {
    const ImageGrid lookup = filled_template(templ);
    RegistrationOptions plain;
    std::vector<double> out(frames.size(), 0.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const FrameSamples s = select_samples(frames[i], reg.homographies[i], reg.camera, templ, grid);
        Eigen::VectorXd r(static_cast<Eigen::Index>(s.values.size()));
        frame_residuals(s, reg.homographies[i].matrix().inverse(), lookup, grid, plain, r.data());
        out[i] = rms(r);
    }
    return out;
}

std::vector<ImageGrid> build_pyramid(const ImageGrid& frame, int levels, double sigma) {
    if (levels < 1) throw ConfigError("pyramid needs at least one level");
    std::vector<ImageGrid> pyr;
    pyr.reserve(levels);
    pyr.push_back(frame);
    for (int l = 1; l < levels; ++l) pyr.push_back(decimate2(gaussian_blur(pyr.back(), sigma)));
    return pyr;
}

namespace {

// The photometric objective against a template rebuilt from the frames is
// blind to a module-plane homography G shared by all poses, and nearly blind
// to kappa when every frame sees the module in the same part of the image.
// Both are fixed here from the correspondences: minimize the reprojection
// error of H_i G under kappa, with all relative poses held.
void anchor_gauge(RegistrationResult& reg, const std::vector<CorrespondenceSet>& sets, const RegistrationOptions& opts) {
    struct Obs {
        int pos;
        ModulePoint y;
        PixelPoint u;
    };
    std::vector<Obs> obs;
    std::vector<Eigen::Vector2d> module_pts;
    for (const auto& set : sets) {
        const int pos = reg.position_of(set.frame_index);
        if (pos < 0) continue;
        for (const auto& c : set.pairs) {
            obs.push_back({pos, c.module, c.pixel});
            module_pts.emplace_back(c.module.y1, c.module.y2);
        }
    }
    if (obs.size() < 8) return;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : module_pts) mean += p;
    mean /= static_cast<double>(module_pts.size());
    double spread = 0.0;
    for (const auto& p : module_pts) spread += (p - mean).norm();
    spread /= static_cast<double>(module_pts.size());
    if (!(spread > 0.0)) return;
    Eigen::Matrix3d t;
    t << 1.0 / spread, 0.0, -mean.x() / spread, 0.0, 1.0 / spread, -mean.y() / spread, 0.0, 0.0, 1.0;
    const Eigen::Matrix3d t_inv = t.inverse();
    const bool with_kappa = opts.refine_kappa && !opts.fix_kappa_zero;

    auto gauge = [&](const Eigen::VectorXd& x) {
        Eigen::Matrix3d m;
        m << 1.0 + x[0], x[1], x[2], x[3], 1.0 + x[4], x[5], x[6], x[7], 1.0;
        return Eigen::Matrix3d(t_inv * m * t);
    };
    const auto rows = static_cast<Eigen::Index>(2 * obs.size());
    auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const Eigen::Matrix3d g = gauge(x);
        const double kappa = with_kappa ? x[8] : reg.camera.kappa();
        for (std::size_t k = 0; k < obs.size(); ++k) {
            const Obs& o = obs[k];
            const Eigen::Vector3d q = reg.homographies[o.pos].matrix() * g * Eigen::Vector3d(o.y.y1, o.y.y2, 1.0);
            double du = 1e3, dv = 1e3;
            if (std::abs(q.z()) > kHomogeneousEps) {
                try {
                    const PlanePoint d = distort_point({q.x() / q.z(), q.y() / q.z()}, kappa);
                    const PixelPoint u = reg.camera.to_pixel(d);
                    du = u.u - o.u.u;
                    dv = u.v - o.u.v;
                } catch (const NumericalError&) {
                }
            }
            r[2 * k] = du;
            r[2 * k + 1] = dv;
        }
    };
    auto jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        return detail::numeric_jacobian(x, rows, residuals, opts.jacobian_step);
    };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(with_kappa ? 9 : 8);
    if (with_kappa) x[8] = reg.camera.kappa();
    detail::LmOptions lm;
    lm.max_iterations = 100;
    lm.relative_tolerance = 1e-12;
    lm.jacobian_step = opts.jacobian_step;
    const detail::LmReport report = detail::levenberg_marquardt(x, rows, residuals, jacobian, lm);
    if (!(report.final_cost < report.initial_cost)) return;
    if (with_kappa && !(x[8] >= kKappaMin && x[8] <= kKappaMax)) return;
    const Eigen::Matrix3d g = gauge(x);
    try {
        for (auto& h : reg.homographies) h = Homography(h.matrix() * g);
    } catch (const NumericalError&) {
        return;
    }
    if (with_kappa) reg.camera = reg.camera.with_kappa(x[8]);
}

}  // namespace

RegistrationResult multiscale_register(const std::vector<ImageGrid>& frames, const std::vector<CorrespondenceSet>& sets,
                                       const HrGridSpec& grid, const RegistrationOptions& opts) {
    if (opts.levels < 1) throw ConfigError("multiscale_register: levels must be >= 1");
    if (opts.alternations < 1) throw ConfigError("multiscale_register: alternations must be >= 1");
    if (frames.size() != sets.size()) throw DataError("multiscale_register: frames and correspondence sets differ in count");
    if (frames.empty()) throw DataError("multiscale_register: no frames");

    const int coarsest = opts.levels - 1;
    std::vector<std::vector<ImageGrid>> pyramids;
    pyramids.reserve(frames.size());
    for (const auto& f : frames) pyramids.push_back(build_pyramid(f, opts.levels, opts.pyramid_sigma));

    // Correspondence initialization on the coarsest level.
    const double coarse_scale = std::ldexp(1.0, coarsest);
    std::vector<CorrespondenceSet> scaled = sets;
    for (auto& set : scaled)
        for (auto& c : set.pairs) c.pixel = {c.pixel.u / coarse_scale, c.pixel.v / coarse_scale};
    // Fewer than three views cannot fix the intrinsics; assume square pixels
    // with the principal point at the frame center.
    const ZhangResult zhang =
        scaled.size() >= 3
            ? zhang_initialize(scaled)
            : focal_initialize(scaled, 0.5 * frames.front().width() / coarse_scale,
                               0.5 * frames.front().height() / coarse_scale);
    RegistrationResult reg = refine_reprojection(scaled, zhang, opts);
    CameraModel cam0 = reg.camera.scaled(1.0 / coarse_scale);

    const HrGridSpec template_grid = grid.with_magnification(opts.template_magnification);
    for (int level = coarsest; level >= 0; --level) {
        const double factor = std::ldexp(1.0, level);
        const HrGridSpec level_grid = template_grid.coarsened(1 << level);
        std::vector<ImageGrid> level_frames;
        level_frames.reserve(frames.size());
        for (const auto& p : pyramids) level_frames.push_back(p[level]);
        reg.camera = cam0.scaled(factor);
        for (int t = 0; t < opts.alternations; ++t) {
            const ImageGrid templ = build_template(level_frames, reg, level_grid);
            reg = refine_photometric(level_frames, reg, templ, level_grid, opts);
        }
        cam0 = reg.camera.scaled(1.0 / factor);
        reg.camera = cam0;
        anchor_gauge(reg, sets, opts);
        cam0 = reg.camera;
    }
    reg.camera = cam0;
    reg.reprojection_rms = reprojection_rms(sets, reg);
    return reg;
}

}  // namespace modsr
