#pragma once

#include <Eigen/Core>

#include <array>

#include "kplab/geometry.hpp"

namespace kplab {

/// Single-channel raster, rows = v, cols = u.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PlaneF = Plane<float>;
using PlaneD = Plane<double>;

/// RGB image with float channels, nominally in [0, 1].
struct ColorImage {
  std::array<PlaneF, 3> channels;

  ColorImage() = default;
  ColorImage(int width, int height, float fill = 0.f) {
    for (auto& c : channels) c = PlaneF::Constant(height, width, fill);
  }

  int width() const { return static_cast<int>(channels[0].cols()); }
  int height() const { return static_cast<int>(channels[0].rows()); }

  ColorImage block(int u0, int v0, int w, int h) const {
    ColorImage out;
    for (int c = 0; c < 3; ++c) out.channels[c] = channels[c].block(v0, u0, h, w);
    return out;
  }

  ColorImage flipped_horizontally() const {
    ColorImage out;
    for (int c = 0; c < 3; ++c) out.channels[c] = channels[c].rowwise().reverse();
    return out;
  }

  bool operator==(const ColorImage& o) const {
    for (int c = 0; c < 3; ++c) {
      if (channels[c].rows() != o.channels[c].rows() || channels[c].cols() != o.channels[c].cols()) return false;
      if ((channels[c] != o.channels[c]).any()) return false;
    }
    return true;
  }
};

/// Metric depth (m) per pixel; 0 marks an invalid pixel.
struct DepthImage {
  Intrinsics intrinsics;
  PlaneD depth;

  DepthImage() = default;
  explicit DepthImage(const Intrinsics& intr)
      : intrinsics(intr), depth(PlaneD::Zero(intr.height, intr.width)) {}

  int width() const { return static_cast<int>(depth.cols()); }
  int height() const { return static_cast<int>(depth.rows()); }
  bool valid(int u, int v) const { return depth(v, u) > 0; }

  /// Throws kInvalidArgument for non-finite or negative values or a size
  /// mismatch with the intrinsics.
  void validate() const;
};

/// Bilinear sample of one channel with zero outside the image.
float sample_bilinear(const PlaneF& plane, double u, double v);

}  // namespace kplab
