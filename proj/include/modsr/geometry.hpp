#pragma once

#include <Eigen/Core>

namespace modsr {

inline constexpr double kHomogeneousEps = 1e-12;  // dehomogenization threshold on |s|
inline constexpr double kDeterminantEps = 1e-10;  // minimum |det H| after normalization
inline constexpr double kRadiusEps = 1e-12;       // below this the radial ratio is 1 + kappa r^2
inline constexpr double kKappaMin = -0.5;
inline constexpr double kKappaMax = 0.5;

/// Point on the module plane, in module units.
struct ModulePoint {
    double y1 = 0.0;
    double y2 = 0.0;
};

/// Point in LR frame pixel coordinates (pixel centers at integers).
struct PixelPoint {
    double u = 0.0;
    double v = 0.0;
};

/// Point on the normalized image plane (after H, before K).
struct PlanePoint {
    double x = 0.0;
    double y = 0.0;
};

/// Homogeneous 2-D point [y1~, y2~, s].
class HomogeneousPoint2 {
public:
    HomogeneousPoint2(double y1, double y2, double s);
    explicit HomogeneousPoint2(const Eigen::Vector3d& v) : HomogeneousPoint2(v.x(), v.y(), v.z()) {}

    const Eigen::Vector3d& vector() const { return v_; }
    double scale() const { return v_.z(); }
    bool dehomogenizable() const;
    /// Throws NumericalError when |s| <= kHomogeneousEps.
    PlanePoint dehomogenize() const;

private:
    Eigen::Vector3d v_;
};

/// Invertible planar projective map, stored in canonical scale
/// (Frobenius norm sqrt(3), positive h33 when h33 is not ~0).
class Homography {
public:
    Homography();
    /// Normalizes `h`; throws NumericalError if it is (numerically) singular.
    explicit Homography(const Eigen::Matrix3d& h);

    static Homography identity() { return Homography(); }

    const Eigen::Matrix3d& matrix() const { return h_; }
    double operator()(int r, int c) const { return h_(r, c); }
    Homography inverse() const;
    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return h_ * p; }

    /// Canonical representative of the projective class of `h`.
    static Eigen::Matrix3d canonical(const Eigen::Matrix3d& h);

private:
    Eigen::Matrix3d h_;
};

/// Shared pinhole intrinsics plus one radial distortion coefficient.
/// The distortion center is the origin of the normalized plane.
class CameraModel {
public:
    CameraModel() = default;
    CameraModel(double fx, double fy, double cx, double cy, double skew, double kappa);

    static CameraModel identity() { return CameraModel(1.0, 1.0, 0.0, 0.0, 0.0, 0.0); }

    double fx() const { return fx_; }
    double fy() const { return fy_; }
    double cx() const { return cx_; }
    double cy() const { return cy_; }
    double skew() const { return skew_; }
    double kappa() const { return kappa_; }

    CameraModel with_kappa(double kappa) const;
    CameraModel with_principal_point(double cx, double cy) const;
    /// Intrinsics for an image whose pixel j corresponds to pixel factor*j of this one.
    CameraModel scaled(double factor) const;

    Eigen::Matrix3d K() const;
    PixelPoint to_pixel(const PlanePoint& p) const;
    PlanePoint to_plane(const PixelPoint& u) const;

private:
    double fx_ = 1.0;
    double fy_ = 1.0;
    double cx_ = 0.0;
    double cy_ = 0.0;
    double skew_ = 0.0;
    double kappa_ = 0.0;
};

/// Which branch of the closed-form cubic solution produced a root.
enum class CardanoCase { PositiveDiscriminant, ZeroDiscriminant, NegativeDiscriminant };

struct UndistortResult {
    double r_u = 0.0;
    CardanoCase branch = CardanoCase::ZeroDiscriminant;
};

/// Largest undistorted radius for which r_u + kappa r_u^3 is strictly increasing
/// (infinity for kappa >= 0).
double monotone_radius_limit(double kappa);
bool in_monotone_window(double r_u, double kappa);

/// r_d = r_u + kappa r_u^3. Throws DomainError when the result would be negative.
double distort_radius(double r_u, double kappa);
/// Closed-form inverse of distort_radius. Throws DomainError when no root lies
/// inside the monotone window.
double undistort_radius(double r_d, double kappa);
UndistortResult undistort_radius_detailed(double r_d, double kappa);

PlanePoint distort_point(const PlanePoint& p, double kappa);
PlanePoint undistort_point(const PlanePoint& p, double kappa);

/// u ~ K d(H y, kappa).
PixelPoint forward_map(const ModulePoint& y, const Homography& h, const CameraModel& cam);
/// Inverse of forward_map: K^-1, undistort, H^-1, dehomogenize.
ModulePoint inverse_map(const PixelPoint& u, const Homography& h, const CameraModel& cam);
/// inverse_map with a precomputed H^-1 and without the undistortion step
/// (`plane` is already undistorted).
ModulePoint plane_to_module(const PlanePoint& plane, const Eigen::Matrix3d& h_inv);

}  // namespace modsr
