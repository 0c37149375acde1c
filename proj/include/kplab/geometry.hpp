#pragma once

// Calibrated pinhole and rectified-stereo camera math.
//
// Pixel convention: continuous coordinates, integer values at pixel centers,
// origin at the top-left pixel, u rightward, v downward. Camera frames are
// x right, y down, z forward.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "kplab/errors.hpp"

namespace kplab {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Pinhole intrinsics with optional radial/tangential distortion.
///
/// Distortion coefficients follow the usual (k1, k2, p1, p2, k3) order and are
/// applied in normalized image coordinates. A shorter list is zero-padded.
template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};
  int width{0};
  int height{0};
  std::vector<Scalar> distortion;

  Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  bool has_distortion() const {
    for (Scalar c : distortion)
      if (c != Scalar(0)) return true;
    return false;
  }

  Scalar coeff(std::size_t i) const {
    return i < distortion.size() ? distortion[i] : Scalar(0);
  }

  void validate() const {
    if (!(fx > 0) || !(fy > 0))
      throw Error(ErrorCode::kInvalidArgument, "intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw Error(ErrorCode::kInvalidArgument, "intrinsics: image size must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
      throw Error(ErrorCode::kInvalidArgument, "intrinsics: principal point outside image");
    if (distortion.size() > 5)
      throw Error(ErrorCode::kInvalidArgument, "intrinsics: at most 5 distortion coefficients");
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Applies the distortion model to a normalized point.
template <typename Scalar>
Vector2<Scalar> distort(const CameraIntrinsics<Scalar>& intr, const Vector2<Scalar>& xy) {
  const Scalar k1 = intr.coeff(0), k2 = intr.coeff(1), p1 = intr.coeff(2),
               p2 = intr.coeff(3), k3 = intr.coeff(4);
  const Scalar x = xy.x(), y = xy.y();
  const Scalar r2 = x * x + y * y;
  const Scalar radial = 1 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2 * p1 * x * y + p2 * (r2 + 2 * x * x),
          y * radial + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y};
}

/// Jacobian of distort() with respect to the normalized point.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> distort_jacobian(const CameraIntrinsics<Scalar>& intr,
                                             const Vector2<Scalar>& xy) {
  const Scalar k1 = intr.coeff(0), k2 = intr.coeff(1), p1 = intr.coeff(2),
               p2 = intr.coeff(3), k3 = intr.coeff(4);
  const Scalar x = xy.x(), y = xy.y();
  const Scalar r2 = x * x + y * y;
  const Scalar radial = 1 + r2 * (k1 + r2 * (k2 + r2 * k3));
  const Scalar dradial_dr2 = k1 + r2 * (2 * k2 + 3 * k3 * r2);
  const Scalar drdx = 2 * x * dradial_dr2, drdy = 2 * y * dradial_dr2;
  Eigen::Matrix<Scalar, 2, 2> j;
  j(0, 0) = radial + x * drdx + 2 * p1 * y + 6 * p2 * x;
  j(0, 1) = x * drdy + 2 * p1 * x + 2 * p2 * y;
  j(1, 0) = y * drdx + 2 * p1 * x + 2 * p2 * y;
  j(1, 1) = radial + y * drdy + 6 * p1 * y + 2 * p2 * x;
  return j;
}

/// Inverts distort() by Newton iteration. Returns the normalized point whose
/// distorted image is `xy_distorted`.
template <typename Scalar>
Vector2<Scalar> undistort_normalized(const CameraIntrinsics<Scalar>& intr,
                                     const Vector2<Scalar>& xy_distorted) {
  if (!intr.has_distortion()) return xy_distorted;
  Vector2<Scalar> xy = xy_distorted;
  for (int it = 0; it < 50; ++it) {
    const Vector2<Scalar> r = distort(intr, xy) - xy_distorted;
    if (r.norm() < Scalar(1e-15)) break;
    xy -= distort_jacobian(intr, xy).lu().solve(r);
  }
  return xy;
}

/// Projects a camera-frame point to pixels. Throws kBehindCamera if z <= 0.
template <typename Scalar>
Vector2<Scalar> project(const CameraIntrinsics<Scalar>& intr, const Vector3<Scalar>& p) {
  if (!(p.z() > 0)) throw Error(ErrorCode::kBehindCamera, "project: point is behind the camera");
  Vector2<Scalar> xy(p.x() / p.z(), p.y() / p.z());
  if (intr.has_distortion()) xy = distort(intr, xy);
  return {intr.fx * xy.x() + intr.cx, intr.fy * xy.y() + intr.cy};
}

/// d(pixel)/d(camera-frame point), 2x3.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 3> project_jacobian(const CameraIntrinsics<Scalar>& intr,
                                             const Vector3<Scalar>& p) {
  const Scalar iz = Scalar(1) / p.z();
  Eigen::Matrix<Scalar, 2, 3> dxy;
  dxy << iz, 0, -p.x() * iz * iz, 0, iz, -p.y() * iz * iz;
  Eigen::Matrix<Scalar, 2, 2> f;
  f << intr.fx, 0, 0, intr.fy;
  if (intr.has_distortion()) {
    const Vector2<Scalar> xy(p.x() * iz, p.y() * iz);
    return f * distort_jacobian(intr, xy) * dxy;
  }
  return f * dxy;
}

/// Unit-depth ray (x/z, y/z, 1) through a pixel, undoing distortion.
template <typename Scalar>
Vector3<Scalar> unproject(const CameraIntrinsics<Scalar>& intr, const Vector2<Scalar>& uv) {
  Vector2<Scalar> xy((uv.x() - intr.cx) / intr.fx, (uv.y() - intr.cy) / intr.fy);
  xy = undistort_normalized(intr, xy);
  return {xy.x(), xy.y(), Scalar(1)};
}

/// Proper rigid transform y = R x + t.
template <typename Scalar>
struct RigidTransform {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  RigidTransform() = default;
  RigidTransform(const Matrix3<Scalar>& r, const Vector3<Scalar>& t) : rotation(r), translation(t) {}

  static RigidTransform identity() { return {}; }

  static RigidTransform from_axis_angle(const Vector3<Scalar>& omega, const Vector3<Scalar>& t) {
    return {exp_so3(omega), t};
  }

  /// Rodrigues formula; accurate near zero angle.
  static Matrix3<Scalar> exp_so3(const Vector3<Scalar>& omega) {
    const Scalar theta = omega.norm();
    if (theta < Scalar(1e-12)) {
      Matrix3<Scalar> w = skew(omega);
      return Matrix3<Scalar>::Identity() + w + Scalar(0.5) * w * w;
    }
    return Eigen::AngleAxis<Scalar>(theta, omega / theta).toRotationMatrix();
  }

  static Matrix3<Scalar> skew(const Vector3<Scalar>& v) {
    Matrix3<Scalar> s;
    s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return s;
  }

  Vector3<Scalar> apply(const Vector3<Scalar>& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    const Matrix3<Scalar> rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  /// Camera center in the source frame when this maps source -> camera.
  Vector3<Scalar> center() const { return -(rotation.transpose() * translation); }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }

  bool is_valid(Scalar tol = Scalar(1e-9)) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Scalar ortho = (rotation.transpose() * rotation - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - Scalar(1)) <= tol;
  }

  void validate(Scalar tol = Scalar(1e-9)) const {
    if (!is_valid(tol))
      throw Error(ErrorCode::kInvalidArgument, "rigid transform: rotation is not a proper orthonormal matrix");
  }
};

/// a * b: applies b first, then a. One polar-decomposition Newton step keeps
/// the product on SO(3) over long chains.
template <typename Scalar>
RigidTransform<Scalar> compose(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  Matrix3<Scalar> r = a.rotation * b.rotation;
  r = r * (Scalar(1.5) * Matrix3<Scalar>::Identity() - Scalar(0.5) * r.transpose() * r);
  return {r, a.rotation * b.translation + a.translation};
}

template <typename Scalar>
RigidTransform<Scalar> operator*(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  return compose(a, b);
}

template <typename Scalar>
RigidTransform<Scalar> invert(const RigidTransform<Scalar>& a) {
  return a.inverse();
}

template <typename Scalar>
Vector3<Scalar> apply(const RigidTransform<Scalar>& a, const Vector3<Scalar>& p) {
  return a.apply(p);
}

/// Geodesic rotation angle between two transforms (radians).
template <typename Scalar>
Scalar rotation_angle_between(const Matrix3<Scalar>& a, const Matrix3<Scalar>& b) {
  const Scalar c = ((a.transpose() * b).trace() - 1) / 2;
  return std::acos(std::clamp(c, Scalar(-1), Scalar(1)));
}

/// Left pixel (u, v) and disparity d = u_left - u_right.
template <typename Scalar>
struct UvdT {
  Scalar u{0};
  Scalar v{0};
  Scalar d{0};

  Vector3<Scalar> vec() const { return {u, v, d}; }
  static UvdT from(const Vector3<Scalar>& x) { return {x(0), x(1), x(2)}; }
  bool operator==(const UvdT&) const = default;
};

/// Rectified stereo pair. The right camera sits at +baseline along the left
/// camera's x axis and shares the left intrinsics.
template <typename Scalar>
struct StereoRig {
  CameraIntrinsics<Scalar> left;
  Scalar baseline{0};

  RigidTransform<Scalar> left_to_right() const {
    return {Matrix3<Scalar>::Identity(), Vector3<Scalar>(-baseline, 0, 0)};
  }

  void validate() const {
    left.validate();
    if (!(baseline > 0)) throw Error(ErrorCode::kInvalidArgument, "stereo rig: baseline must be positive");
    if (left.has_distortion())
      throw Error(ErrorCode::kInvalidArgument, "stereo rig: rectified intrinsics must have no distortion");
  }

  bool operator==(const StereoRig&) const = default;
};

/// Reprojection map from (u, v, d) to the left-camera 3D point.
template <typename Scalar>
Vector3<Scalar> uvd_to_xyz(const StereoRig<Scalar>& rig, const UvdT<Scalar>& k) {
  if (!(k.d > 0)) throw Error(ErrorCode::kInvalidDisparity, "uvd_to_xyz: disparity must be positive");
  const Scalar z = rig.left.fx * rig.baseline / k.d;
  return {(k.u - rig.left.cx) * z / rig.left.fx, (k.v - rig.left.cy) * z / rig.left.fy, z};
}

/// d(xyz)/d(u, v, d), 3x3.
template <typename Scalar>
Matrix3<Scalar> uvd_to_xyz_jacobian(const StereoRig<Scalar>& rig, const UvdT<Scalar>& k) {
  const Scalar fb = rig.left.fx * rig.baseline;
  const Scalar z = fb / k.d;
  const Scalar dz = -fb / (k.d * k.d);
  Matrix3<Scalar> j;
  j << z / rig.left.fx, 0, (k.u - rig.left.cx) * dz / rig.left.fx,
       0, z / rig.left.fy, (k.v - rig.left.cy) * dz / rig.left.fy,
       0, 0, dz;
  return j;
}

template <typename Scalar>
UvdT<Scalar> xyz_to_uvd(const StereoRig<Scalar>& rig, const Vector3<Scalar>& p) {
  if (!(p.z() > 0)) throw Error(ErrorCode::kBehindCamera, "xyz_to_uvd: point is behind the camera");
  return {rig.left.fx * p.x() / p.z() + rig.left.cx, rig.left.fy * p.y() / p.z() + rig.left.cy,
          rig.left.fx * rig.baseline / p.z()};
}

/// dz/dd at depth z: -z^2 / (f b), metres per pixel of disparity.
template <typename Scalar>
Scalar depth_sensitivity(const StereoRig<Scalar>& rig, Scalar z) {
  if (!(z >= 0)) throw Error(ErrorCode::kInvalidArgument, "depth_sensitivity: depth must be positive");
  return -z * z / (rig.left.fx * rig.baseline);
}

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;
using Intrinsics = CameraIntrinsics<double>;
using Rigid = RigidTransform<double>;
using Rig = StereoRig<double>;
using Uvd = UvdT<double>;

}  // namespace kplab
