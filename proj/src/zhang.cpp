// Correspondence-based initialization: DLT homographies, closed-form
// intrinsics from plane views, and reprojection-error refinement.

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "lm.hpp"
#include "modsr/error.hpp"
#include "modsr/registration.hpp"

namespace modsr {

namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d hartley_normalization(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    double dist = 0.0;
    for (const auto& p : pts) dist += (p - mean).norm();
    dist /= static_cast<double>(pts.size());
    if (!(dist > 0.0)) throw NumericalError("degenerate configuration: all points coincide");
    const double s = std::sqrt(2.0) / dist;
    Eigen::Matrix3d t;
    t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
    return t;
}

Eigen::Matrix<double, 6, 1> zhang_v(const Eigen::Matrix3d& h, int i, int j) {
    Eigen::Matrix<double, 6, 1> v;
    v << h(0, i) * h(0, j), h(0, i) * h(1, j) + h(1, i) * h(0, j), h(1, i) * h(1, j),
        h(2, i) * h(0, j) + h(0, i) * h(2, j), h(2, i) * h(1, j) + h(1, i) * h(2, j), h(2, i) * h(2, j);
    return v;
}

}  // namespace

Homography estimate_homography_dlt(const std::vector<Correspondence>& pairs) {
    if (pairs.size() < 4) throw NumericalError("DLT needs at least 4 correspondences, got " + std::to_string(pairs.size()));
    std::vector<Eigen::Vector2d> src;
    std::vector<Eigen::Vector2d> dst;
    src.reserve(pairs.size());
    dst.reserve(pairs.size());
    for (const auto& c : pairs) {
        src.emplace_back(c.module.y1, c.module.y2);
        dst.emplace_back(c.pixel.u, c.pixel.v);
    }
    const Eigen::Matrix3d ts = hartley_normalization(src);
    const Eigen::Matrix3d td = hartley_normalization(dst);

    Eigen::MatrixXd a(2 * pairs.size(), 9);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const Eigen::Vector3d x = ts * src[k].homogeneous();
        const Eigen::Vector3d u = td * dst[k].homogeneous();
        const auto r = static_cast<Eigen::Index>(2 * k);
        a.row(r) << 0.0, 0.0, 0.0, -x.x(), -x.y(), -1.0, u.y() * x.x(), u.y() * x.y(), u.y();
        a.row(r + 1) << x.x(), x.y(), 1.0, 0.0, 0.0, 0.0, -u.x() * x.x(), -u.x() * x.y(), -u.x();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // A well-posed problem has a one-dimensional null space.
    if (sv.size() < 9 || sv[7] <= 1e-10 * sv[0])
        throw NumericalError("degenerate configuration: DLT system is rank deficient");
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
    return Homography(td.inverse() * hn * ts);
}

ZhangResult zhang_initialize(const std::vector<CorrespondenceSet>& sets) {
    if (sets.size() < 3)
        throw NumericalError("insufficient views for intrinsic calibration: " + std::to_string(sets.size()) + " < 3");

    std::vector<Homography> pixel_h;
    pixel_h.reserve(sets.size());
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const auto& set : sets) {
        try {
            pixel_h.push_back(estimate_homography_dlt(set.pairs));
        } catch (const NumericalError& e) {
            throw NumericalError("frame " + std::to_string(set.frame_index) + ": " + e.what());
        }
        for (const auto& c : set.pairs) {
            umin = std::min(umin, c.pixel.u);
            umax = std::max(umax, c.pixel.u);
            vmin = std::min(vmin, c.pixel.v);
            vmax = std::max(vmax, c.pixel.v);
        }
    }
    // Work in a pixel frame centered on the observed points with unit-order
    // coordinates so the entries of B have comparable magnitude.
    const double scale = std::max(umax - umin, vmax - vmin);
    const double cu = 0.5 * (umin + umax);
    const double cv = 0.5 * (vmin + vmax);
    Eigen::Matrix3d n;
    n << 1.0 / scale, 0.0, -cu / scale, 0.0, 1.0 / scale, -cv / scale, 0.0, 0.0, 1.0;

    Eigen::MatrixXd v(2 * sets.size(), 6);
    for (std::size_t i = 0; i < pixel_h.size(); ++i) {
        Eigen::Matrix3d h = n * pixel_h[i].matrix();
        h /= h.norm();
        v.row(2 * i) = zhang_v(h, 0, 1).transpose();
        v.row(2 * i + 1) = (zhang_v(h, 0, 0) - zhang_v(h, 1, 1)).transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv[4] > 0.0) || sv[0] / sv[4] > 1e12)
        throw NumericalError("intrinsic calibration is ill-conditioned (condition number > 1e12)");
    Eigen::Matrix<double, 6, 1> b = svd.matrixV().col(5);
    // B is positive definite up to sign.
    if (b[0] < 0.0) b = -b;
    const double b11 = b[0], b12 = b[1], b22 = b[2], b13 = b[3], b23 = b[4], b33 = b[5];

    const double den = b11 * b22 - b12 * b12;
    if (!(den > 0.0) || !(b11 > 0.0)) throw NumericalError("intrinsic calibration: image of the absolute conic is not positive definite");
    const double v0 = (b12 * b13 - b11 * b23) / den;
    const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    if (!(lambda / b11 > 0.0)) throw NumericalError("intrinsic calibration: negative focal length estimate");
    const double alpha = std::sqrt(lambda / b11);
    const double beta = std::sqrt(lambda * b11 / den);
    const double gamma = -b12 * alpha * alpha * beta / lambda;
    const double u0 = gamma * v0 / beta - b13 * alpha * alpha / lambda;

    Eigen::Matrix3d kn;
    kn << alpha, gamma, u0, 0.0, beta, v0, 0.0, 0.0, 1.0;
    const Eigen::Matrix3d k = n.inverse() * kn;

    ZhangResult result;
    result.camera = CameraModel(k(0, 0), k(1, 1), k(0, 2), k(1, 2), k(0, 1), 0.0);
    const Eigen::Matrix3d k_inv = k.inverse();
    for (const auto& h : pixel_h) result.homographies.emplace_back(k_inv * h.matrix());
    return result;
}

ZhangResult focal_initialize(const std::vector<CorrespondenceSet>& sets, double cx, double cy) {
    if (sets.empty()) throw NumericalError("no views for calibration");
    std::vector<Homography> pixel_h;
    for (const auto& set : sets) {
        try {
            pixel_h.push_back(estimate_homography_dlt(set.pairs));
        } catch (const NumericalError& e) {
            throw NumericalError("frame " + std::to_string(set.frame_index) + ": " + e.what());
        }
    }
    // With K = [f 0 cx; 0 f cy; 0 0 1], the orthonormality constraints on
    // T H (T moves the principal point to the origin) are linear in a = 1/f^2.
    Eigen::Matrix3d t;
    t << 1.0, 0.0, -cx, 0.0, 1.0, -cy, 0.0, 0.0, 1.0;
    double num = 0.0, den = 0.0, scale = 0.0;
    for (const auto& h0 : pixel_h) {
        Eigen::Matrix3d h = t * h0.matrix();
        scale = std::max(scale, std::abs(h(0, 0)) + std::abs(h(1, 1)));
        const double c[2] = {h(0, 0) * h(0, 1) + h(1, 0) * h(1, 1),
                             h(0, 0) * h(0, 0) + h(1, 0) * h(1, 0) - h(0, 1) * h(0, 1) - h(1, 1) * h(1, 1)};
        const double d[2] = {h(2, 0) * h(2, 1), h(2, 0) * h(2, 0) - h(2, 1) * h(2, 1)};
        for (int k = 0; k < 2; ++k) {
            num -= c[k] * d[k];
            den += c[k] * c[k];
        }
    }
    double f = 2.0 * std::max(cx, cy);
    if (den > 0.0 && num > 0.0) {
        const double candidate = std::sqrt(den / num);
        if (std::isfinite(candidate) && candidate > 0.0) f = candidate;
    }
    ZhangResult result;
    result.camera = CameraModel(f, f, cx, cy, 0.0, 0.0);
    const Eigen::Matrix3d k_inv = result.camera.K().inverse();
    for (const auto& h : pixel_h) result.homographies.emplace_back(k_inv * h.matrix());
    return result;
}

namespace {

// Local 8-parameter update H = H0 * T^-1 (I + D) T with D(2,2) = 0, where T
// normalizes module coordinates to unit scale.
Eigen::Matrix3d module_normalization(const std::vector<Correspondence>& pairs) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(pairs.size());
    for (const auto& c : pairs) pts.emplace_back(c.module.y1, c.module.y2);
    return hartley_normalization(pts);
}

Eigen::Matrix3d local_update(const Eigen::Matrix3d& h0, const Eigen::Matrix3d& t, const Eigen::Matrix3d& t_inv,
                             const double* d) {
    Eigen::Matrix3d m;
    m << 1.0 + d[0], d[1], d[2], d[3], 1.0 + d[4], d[5], d[6], d[7], 1.0;
    return h0 * t_inv * m * t;
}

}  // namespace

RegistrationResult refine_reprojection(const std::vector<CorrespondenceSet>& sets, const ZhangResult& init,
                                       const RegistrationOptions& opts) {
    if (sets.size() != init.homographies.size())
        throw DataError("refine_reprojection: correspondence sets and homographies differ in count");
    const std::size_t n_frames = sets.size();
    constexpr int kShared = 5;  // cx, cy, fy, skew, kappa
    const Eigen::Index n_params = kShared + 8 * static_cast<Eigen::Index>(n_frames);

    std::vector<Eigen::Matrix3d> t(n_frames), t_inv(n_frames);
    std::vector<Eigen::Index> row_offset(n_frames + 1, 0);
    for (std::size_t i = 0; i < n_frames; ++i) {
        t[i] = module_normalization(sets[i].pairs);
        t_inv[i] = t[i].inverse();
        row_offset[i + 1] = row_offset[i] + 2 * static_cast<Eigen::Index>(sets[i].pairs.size());
    }
    const Eigen::Index rows = row_offset[n_frames];
    const CameraModel& cam0 = init.camera;

    auto make_camera = [&](const Eigen::VectorXd& x) {
        const double kappa = opts.fix_kappa_zero ? 0.0 : std::clamp(x[4], kKappaMin, kKappaMax);
        return CameraModel(cam0.fx(), std::max(x[2], 1e-6), x[0], x[1], x[3], kappa);
    };
    auto frame_residuals = [&](const Eigen::VectorXd& x, const CameraModel& cam, std::size_t i, Eigen::VectorXd& r) {
        const Eigen::Matrix3d h =
            local_update(init.homographies[i].matrix(), t[i], t_inv[i], x.data() + kShared + 8 * i);
        Eigen::Index row = row_offset[i];
        for (const auto& c : sets[i].pairs) {
            const Eigen::Vector3d p = h * Eigen::Vector3d(c.module.y1, c.module.y2, 1.0);
            double du = 1e3, dv = 1e3;
            if (std::abs(p.z()) > kHomogeneousEps) {
                const PlanePoint plane{p.x() / p.z(), p.y() / p.z()};
                const double r2 = plane.x * plane.x + plane.y * plane.y;
                const double ratio = 1.0 + cam.kappa() * r2;
                const PixelPoint u = cam.to_pixel({ratio * plane.x, ratio * plane.y});
                du = u.u - c.pixel.u;
                dv = u.v - c.pixel.v;
            }
            r[row++] = du;
            r[row++] = dv;
        }
    };
    auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const CameraModel cam = make_camera(x);
        for (std::size_t i = 0; i < n_frames; ++i) frame_residuals(x, cam, i, r);
    };
    // Pose parameters of frame i only touch that frame's rows.
    auto jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows, n_params);
        Eigen::VectorXd xp = x;
        Eigen::VectorXd rp(rows), rm(rows);
        for (Eigen::Index j = 0; j < kShared; ++j) {
            const double h = opts.jacobian_step * std::max(1.0, std::abs(x[j]));
            xp[j] = x[j] + h;
            residuals(xp, rp);
            xp[j] = x[j] - h;
            residuals(xp, rm);
            xp[j] = x[j];
            jac.col(j) = (rp - rm) / (2.0 * h);
        }
        const CameraModel cam = make_camera(x);
        for (std::size_t i = 0; i < n_frames; ++i) {
            const Eigen::Index r0 = row_offset[i];
            const Eigen::Index nr = row_offset[i + 1] - r0;
            for (int k = 0; k < 8; ++k) {
                const Eigen::Index j = kShared + 8 * static_cast<Eigen::Index>(i) + k;
                const double h = opts.jacobian_step * std::max(1.0, std::abs(x[j]));
                xp[j] = x[j] + h;
                frame_residuals(xp, cam, i, rp);
                xp[j] = x[j] - h;
                frame_residuals(xp, cam, i, rm);
                xp[j] = x[j];
                jac.block(r0, j, nr, 1) = (rp.segment(r0, nr) - rm.segment(r0, nr)) / (2.0 * h);
            }
        }
        return jac;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_params);
    x[0] = cam0.cx();
    x[1] = cam0.cy();
    x[2] = cam0.fy();
    x[3] = cam0.skew();
    x[4] = opts.fix_kappa_zero ? 0.0 : cam0.kappa();
    detail::LmOptions lm;
    lm.max_iterations = std::max(opts.max_iterations, 100);
    lm.relative_tolerance = 1e-12;
    lm.jacobian_step = opts.jacobian_step;
    const detail::LmReport report = detail::levenberg_marquardt(x, rows, residuals, jacobian, lm);

    RegistrationResult out;
    out.camera = make_camera(x);
    for (std::size_t i = 0; i < n_frames; ++i) {
        out.frame_indices.push_back(sets[i].frame_index);
        out.homographies.emplace_back(
            local_update(init.homographies[i].matrix(), t[i], t_inv[i], x.data() + kShared + 8 * i));
        out.status.push_back(report.status);
    }
    out.residuals.assign(n_frames, 0.0);
    out.reprojection_rms = reprojection_rms(sets, out);
    return out;
}

std::vector<double> reprojection_rms(const std::vector<CorrespondenceSet>& sets, const RegistrationResult& reg) {
    std::vector<double> out(reg.size(), 0.0);
    for (const auto& set : sets) {
        const int pos = reg.position_of(set.frame_index);
        if (pos < 0 || set.pairs.empty()) continue;
        double acc = 0.0;
        for (const auto& c : set.pairs) {
            const PixelPoint u = forward_map(c.module, reg.homographies[pos], reg.camera);
            acc += (u.u - c.pixel.u) * (u.u - c.pixel.u) + (u.v - c.pixel.v) * (u.v - c.pixel.v);
        }
        out[pos] = std::sqrt(acc / set.pairs.size());
    }
    return out;
}

std::vector<double> registration_error(const RegistrationResult& estimate, const RegistrationResult& truth,
                                       const ModuleRect& rect, int nx, int ny) {
    std::vector<double> out;
    out.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int pos = estimate.position_of(truth.frame_indices[i]);
        if (pos < 0) throw DataError("registration_error: frame " + std::to_string(truth.frame_indices[i]) + " missing");
        double acc = 0.0;
        for (int b = 0; b < ny; ++b) {
            for (int a = 0; a < nx; ++a) {
                const ModulePoint y{rect.y1_min + rect.width() * a / (nx - 1), rect.y2_min + rect.height() * b / (ny - 1)};
                const PixelPoint ut = forward_map(y, truth.homographies[i], truth.camera);
                const PixelPoint ue = forward_map(y, estimate.homographies[pos], estimate.camera);
                acc += (ut.u - ue.u) * (ut.u - ue.u) + (ut.v - ue.v) * (ut.v - ue.v);
            }
        }
        out.push_back(std::sqrt(acc / (nx * ny)));
    }
    return out;
}

}  // namespace modsr
