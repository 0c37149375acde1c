#pragma once

#include <span>

#include "kplab/geometry.hpp"
#include "kplab/image.hpp"

namespace kplab {

/// Depth differences above this are treated as surface discontinuities.
inline constexpr double kDepthDiscontinuityM = 0.02;

/// Resamples a distorted depth image onto the ideal pinhole grid with the same
/// focal lengths and principal point. Nearest-pixel sampling; invalid pixels
/// stay invalid. Zero distortion returns an identical image.
DepthImage undistort_depth(const DepthImage& img);

/// Index of the candidate camera whose probe points, 1 m ahead of and behind
/// the camera center along the optical axis, are closest in total to those of
/// `depth_pose`. All poses map world to camera. Ties go to the lowest index.
int nearest_view(const Rigid& depth_pose, std::span<const Rigid> candidates);

/// Depth-to-left transform: left<-world * world<-rgb * rgb<-depth.
Rigid chain_to_left(const Rigid& left_from_world, const Rigid& rgb_from_world, const Rigid& rgb_from_depth);

/// Reprojects an undistorted depth image into a target camera.
///
/// Every valid pixel is lifted to 3D, transformed by `depth_to_target`, and
/// splatted to the nearest target pixel with a z-buffer (closest depth wins).
/// A second pass splats the source image up-sampled 2x (bilinear, no blending
/// across discontinuities) to fill quantization holes; an up-sampled sample
/// only replaces a pixel that is empty or lies more than
/// kDepthDiscontinuityM behind it.
DepthImage warp_depth(const DepthImage& img, const Rigid& depth_to_target, const Intrinsics& target);

}  // namespace kplab
