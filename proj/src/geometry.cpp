#include "modsr/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "modsr/error.hpp"

namespace modsr {

HomogeneousPoint2::HomogeneousPoint2(double y1, double y2, double s) : v_(y1, y2, s) {
    if (y1 == 0.0 && y2 == 0.0 && s == 0.0)
        throw NumericalError("HomogeneousPoint2: all components are zero");
}

bool HomogeneousPoint2::dehomogenizable() const { return std::abs(v_.z()) > kHomogeneousEps; }

PlanePoint HomogeneousPoint2::dehomogenize() const {
    if (!dehomogenizable())
        throw NumericalError("singular configuration: homogeneous scale " + std::to_string(v_.z()));
    return {v_.x() / v_.z(), v_.y() / v_.z()};
}

Eigen::Matrix3d Homography::canonical(const Eigen::Matrix3d& h) {
    const double norm = h.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("homography has zero or non-finite norm");
    Eigen::Matrix3d c = h * (std::sqrt(3.0) / norm);
    if (std::abs(c(2, 2)) > kHomogeneousEps) {
        if (c(2, 2) < 0.0) c = -c;
    } else {
        // Fall back to the sign of the largest-magnitude entry.
        Eigen::Index r = 0;
        Eigen::Index col = 0;
        c.cwiseAbs().maxCoeff(&r, &col);
        if (c(r, col) < 0.0) c = -c;
    }
    return c;
}

Homography::Homography() : h_(Eigen::Matrix3d::Identity()) {}

Homography::Homography(const Eigen::Matrix3d& h) : h_(canonical(h)) {
    if (std::abs(h_.determinant()) <= kDeterminantEps)
        throw NumericalError("homography is singular (|det| <= 1e-10)");
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

CameraModel::CameraModel(double fx, double fy, double cx, double cy, double skew, double kappa)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), skew_(skew), kappa_(kappa) {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera focal lengths must be positive");
    if (!(kappa >= kKappaMin && kappa <= kKappaMax))
        throw ConfigError("kappa " + std::to_string(kappa) + " outside validity window [-0.5, 0.5]");
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew))
        throw ConfigError("camera parameters must be finite");
}

CameraModel CameraModel::with_kappa(double kappa) const {
    return CameraModel(fx_, fy_, cx_, cy_, skew_, kappa);
}

CameraModel CameraModel::with_principal_point(double cx, double cy) const {
    return CameraModel(fx_, fy_, cx, cy, skew_, kappa_);
}

CameraModel CameraModel::scaled(double factor) const {
    return CameraModel(fx_ / factor, fy_ / factor, cx_ / factor, cy_ / factor, skew_ / factor, kappa_);
}

Eigen::Matrix3d CameraModel::K() const {
    Eigen::Matrix3d k;
    k << fx_, skew_, cx_, 0.0, fy_, cy_, 0.0, 0.0, 1.0;
    return k;
}

PixelPoint CameraModel::to_pixel(const PlanePoint& p) const {
    return {fx_ * p.x + skew_ * p.y + cx_, fy_ * p.y + cy_};
}

PlanePoint CameraModel::to_plane(const PixelPoint& u) const {
    const double y = (u.v - cy_) / fy_;
    const double x = (u.u - cx_ - skew_ * y) / fx_;
    return {x, y};
}

double monotone_radius_limit(double kappa) {
    if (kappa >= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / std::sqrt(-3.0 * kappa);
}

bool in_monotone_window(double r_u, double kappa) {
    return r_u >= 0.0 && r_u < monotone_radius_limit(kappa);
}

double distort_radius(double r_u, double kappa) {
    if (!(r_u >= 0.0)) throw DomainError("distort_radius: negative radius");
    const double r_d = r_u + kappa * r_u * r_u * r_u;
    if (r_d < 0.0) throw DomainError("distort_radius: radius beyond the fold-over point");
    return r_d;
}

namespace {

// |kappa| below this is treated as the zero-discriminant case r_u = r_d.
constexpr double kKappaZero = 1e-12;

double polish(double r_u, double r_d, double kappa) {
    for (int it = 0; it < 3; ++it) {
        const double f = r_u + kappa * r_u * r_u * r_u - r_d;
        const double df = 1.0 + 3.0 * kappa * r_u * r_u;
        if (!(df > 0.0)) break;
        const double next = r_u - f / df;
        if (!std::isfinite(next)) break;
        if (next == r_u) break;
        r_u = next;
    }
    return r_u;
}

}  // namespace

UndistortResult undistort_radius_detailed(double r_d, double kappa) {
    if (!(r_d >= 0.0)) throw DomainError("undistort_radius: negative radius");
    if (r_d == 0.0) return {0.0, CardanoCase::ZeroDiscriminant};
    if (std::abs(kappa) < kKappaZero) return {r_d, CardanoCase::ZeroDiscriminant};

    // Substituting z = 3 kappa r_u gives z^3 + 3 p z + q = 0.
    const double p = 3.0 * kappa;
    const double q = -27.0 * kappa * kappa * r_d;
    const double disc = q * q + 4.0 * p * p * p;

    UndistortResult result;
    if (disc > 0.0) {
        const double sq = std::sqrt(disc);
        // Cardano: z = A + B with A = cbrt((-q + sqrt(D)) / 2), A B = -p.
        // The larger-magnitude cube root is computed directly, the other from the product.
        const double s = (q <= 0.0) ? 1.0 : -1.0;
        const double a = std::cbrt(0.5 * (-q + s * sq));
        const double b = (a != 0.0) ? -p / a : std::cbrt(0.5 * (-q - s * sq));
        const double z = a + b;
        result = {polish(z / (3.0 * kappa), r_d, kappa), CardanoCase::PositiveDiscriminant};
    } else {
        // Three real roots z_n = 2 sqrt(-p) cos(acos(-q / (2 sqrt(-p^3))) / 3 + 2 pi (n-1) / 3).
        // Only the root that stays continuous as kappa -> 0 is inside the monotone window;
        // pick it by testing all three.
        const double m = std::sqrt(-p);
        const double arg = std::clamp(-q / (2.0 * m * m * m), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        double best = std::numeric_limits<double>::quiet_NaN();
        double best_residual = std::numeric_limits<double>::infinity();
        for (int n = 0; n < 3; ++n) {
            const double z = 2.0 * m * std::cos(theta + 2.0 * std::numbers::pi * n / 3.0);
            const double r_u = polish(z / (3.0 * kappa), r_d, kappa);
            if (!in_monotone_window(r_u, kappa)) continue;
            const double residual = std::abs(r_u + kappa * r_u * r_u * r_u - r_d);
            if (residual < best_residual) {
                best_residual = residual;
                best = r_u;
            }
        }
        result = {best, disc == 0.0 ? CardanoCase::ZeroDiscriminant : CardanoCase::NegativeDiscriminant};
    }
    if (!std::isfinite(result.r_u) || !in_monotone_window(result.r_u, kappa))
        throw DomainError("undistort_radius: r_d=" + std::to_string(r_d) + " has no root in the monotone window for kappa=" +
                          std::to_string(kappa));
    return result;
}

double undistort_radius(double r_d, double kappa) { return undistort_radius_detailed(r_d, kappa).r_u; }

PlanePoint distort_point(const PlanePoint& p, double kappa) {
    const double r2 = p.x * p.x + p.y * p.y;
    if (std::sqrt(r2) < kRadiusEps) return p;
    // r_d / r_u = 1 + kappa r_u^2
    const double ratio = 1.0 + kappa * r2;
    if (ratio < 0.0) throw DomainError("distort_point: radius beyond the fold-over point");
    return {ratio * p.x, ratio * p.y};
}

PlanePoint undistort_point(const PlanePoint& p, double kappa) {
    const double r_d = std::sqrt(p.x * p.x + p.y * p.y);
    if (r_d < kRadiusEps) return p;
    const double ratio = undistort_radius(r_d, kappa) / r_d;
    return {ratio * p.x, ratio * p.y};
}

PixelPoint forward_map(const ModulePoint& y, const Homography& h, const CameraModel& cam) {
    const HomogeneousPoint2 mapped(h.apply(Eigen::Vector3d(y.y1, y.y2, 1.0)));
    const PlanePoint plane = mapped.dehomogenize();
    return cam.to_pixel(distort_point(plane, cam.kappa()));
}

ModulePoint plane_to_module(const PlanePoint& plane, const Eigen::Matrix3d& h_inv) {
    const Eigen::Vector3d m = h_inv * Eigen::Vector3d(plane.x, plane.y, 1.0);
    if (std::abs(m.z()) <= kHomogeneousEps)
        throw NumericalError("singular configuration: homogeneous scale " + std::to_string(m.z()));
    return {m.x() / m.z(), m.y() / m.z()};
}

ModulePoint inverse_map(const PixelPoint& u, const Homography& h, const CameraModel& cam) {
    const PlanePoint undistorted = undistort_point(cam.to_plane(u), cam.kappa());
    return plane_to_module(undistorted, h.matrix().inverse());
}

}  // namespace modsr
