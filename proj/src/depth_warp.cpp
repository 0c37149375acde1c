#include "kplab/depth_warp.hpp"

#include <cmath>
#include <limits>

namespace kplab {

DepthImage undistort_depth(const DepthImage& img) {
  img.validate();
  DepthImage out = img;
  out.intrinsics.distortion.clear();
  if (!img.intrinsics.has_distortion()) return out;

  const Intrinsics& k = img.intrinsics;
  out.depth.setZero();
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const Vec2 xy((u - k.cx) / k.fx, (v - k.cy) / k.fy);
      const Vec2 xd = distort(k, xy);
      const double su = k.fx * xd.x() + k.cx, sv = k.fy * xd.y() + k.cy;
      const int iu = static_cast<int>(std::floor(su + 0.5));
      const int iv = static_cast<int>(std::floor(sv + 0.5));
      if (iu < 0 || iv < 0 || iu >= img.width() || iv >= img.height()) continue;
      out.depth(v, u) = img.depth(iv, iu);
    }
  }
  return out;
}

int nearest_view(const Rigid& depth_pose, std::span<const Rigid> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyInput, "nearest_view: no candidate poses");
  auto probes = [](const Rigid& pose) {
    const Vec3 c = pose.center();
    const Vec3 axis = pose.rotation.transpose() * Vec3::UnitZ();
    return std::pair<Vec3, Vec3>{c + axis, c - axis};
  };
  const auto [ahead, behind] = probes(depth_pose);
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto [a, b] = probes(candidates[i]);
    const double d = (a - ahead).norm() + (b - behind).norm();
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Rigid chain_to_left(const Rigid& left_from_world, const Rigid& rgb_from_world, const Rigid& rgb_from_depth) {
  return left_from_world * (invert(rgb_from_world) * rgb_from_depth);
}

namespace {

// Pinhole lift of a (possibly fractional) source pixel with depth z.
Vec3 lift(const Intrinsics& k, double u, double v, double z) {
  return {(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z};
}

// Bilinear depth at a fractional source position. Falls back to the nearest
// pixel when a neighbour is invalid or the neighbours straddle a discontinuity.
double upsampled_depth(const DepthImage& img, double u, double v) {
  const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
  const double au = u - u0, av = v - v0;
  const int nu = static_cast<int>(std::floor(u + 0.5)), nv = static_cast<int>(std::floor(v + 0.5));
  const double nearest = img.depth(nv, nu);
  if (u0 < 0 || v0 < 0 || u0 + 1 >= img.width() || v0 + 1 >= img.height()) return nearest;
  const double d00 = img.depth(v0, u0), d10 = img.depth(v0, u0 + 1);
  const double d01 = img.depth(v0 + 1, u0), d11 = img.depth(v0 + 1, u0 + 1);
  const double lo = std::min({d00, d10, d01, d11});
  const double hi = std::max({d00, d10, d01, d11});
  if (lo <= 0 || hi - lo > kDepthDiscontinuityM) return nearest;
  return (1 - av) * ((1 - au) * d00 + au * d10) + av * ((1 - au) * d01 + au * d11);
}

}  // namespace

DepthImage warp_depth(const DepthImage& img, const Rigid& depth_to_target, const Intrinsics& target) {
  img.validate();
  target.validate();
  constexpr double kEmpty = std::numeric_limits<double>::infinity();
  PlaneD primary = PlaneD::Constant(target.height, target.width, kEmpty);
  PlaneD fill = PlaneD::Constant(target.height, target.width, kEmpty);

  auto splat = [&](PlaneD& buffer, double u, double v, double z) {
    const Vec3 p = depth_to_target.apply(lift(img.intrinsics, u, v, z));
    if (!(p.z() > 0)) return;
    const Vec2 uv = project(target, p);
    const double fu = std::floor(uv.x() + 0.5), fv = std::floor(uv.y() + 0.5);
    if (fu < 0 || fv < 0 || fu >= target.width || fv >= target.height) return;
    double& cell = buffer(static_cast<Eigen::Index>(fv), static_cast<Eigen::Index>(fu));
    cell = std::min(cell, p.z());
  };

  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u)
      if (img.valid(u, v)) splat(primary, u, v, img.depth(v, u));

  // 2x up-sampled grid: fine pixel centers sit at +-0.25 around each source pixel.
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.valid(u, v)) continue;
      for (double dv : {-0.25, 0.25}) {
        for (double du : {-0.25, 0.25}) {
          const double z = upsampled_depth(img, u + du, v + dv);
          if (z > 0) splat(fill, u + du, v + dv, z);
        }
      }
    }
  }

  DepthImage out(target);
  for (int v = 0; v < target.height; ++v) {
    for (int u = 0; u < target.width; ++u) {
      const double a = primary(v, u), b = fill(v, u);
      double z = a;
      if (a == kEmpty || b < a - kDepthDiscontinuityM) z = b;
      out.depth(v, u) = z == kEmpty ? 0.0 : z;
    }
  }
  return out;
}

}  // namespace kplab
