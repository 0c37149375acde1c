#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "kplab/geometry.hpp"
#include "kplab/image.hpp"
#include "kplab/rng.hpp"

namespace kplab {

inline constexpr int kCropWidth = 180;
inline constexpr int kCropHeight = 120;
inline constexpr int kRightCropOffset = 30;

/// Left and right patches cut from a rectified pair on the same rows. The
/// right patch starts `right_offset` pixels left of the left patch, so label
/// disparities in crop coordinates are the full-frame ones minus the offset.
struct StereoCrop {
  ColorImage left;
  ColorImage right;
  int u0 = 0;  // left patch origin in the full frame
  int v0 = 0;
  int right_offset = kRightCropOffset;
  std::vector<Uvd> labels;  // crop coordinates

  int width() const { return left.width(); }
  int height() const { return left.height(); }
};

struct BoundingBox {
  double u_min = 0, v_min = 0, u_max = 0, v_max = 0;
  Vec2 center() const { return {0.5 * (u_min + u_max), 0.5 * (v_min + v_max)}; }
};

Uvd full_to_crop(const Uvd& full, int u0, int v0, int right_offset = kRightCropOffset);
Uvd crop_to_full(const Uvd& crop, int u0, int v0, int right_offset = kRightCropOffset);

/// Cuts a fixed-size stereo crop centered on the (optionally jittered) box
/// center. The crop is clamped inside both images. Throws
/// kObjectOutsideFrame when the box does not overlap the image and
/// kOutOfRange when the images are too small for a crop.
StereoCrop crop_stereo(const ColorImage& left, const ColorImage& right, const BoundingBox& bbox,
                       std::span<const Uvd> full_frame_labels, Rng* jitter_rng = nullptr,
                       double jitter_px = 20.0);

/// Swaps and horizontally flips the pair. Disparities are preserved exactly;
/// applying it twice is the identity.
StereoCrop mirror_stereo(const StereoCrop& crop);

struct LabelPair {
  Vec2 left;
  Vec2 right;
};

/// Maps a crop label's left and right image points through the rotation
/// homographies of both crop cameras.
LabelPair rotate_label_pair(const Uvd& label, const StereoCrop& crop, const Intrinsics& full_frame,
                            double angle_deg);

/// Rotates both views about the camera x axis (the baseline), which keeps
/// epipolar lines horizontal. `full_frame` are the rectified intrinsics of the
/// uncropped images. Throws kOutOfRange for |angle| > 5 degrees.
StereoCrop rotate_about_x(const StereoCrop& crop, const Intrinsics& full_frame, double angle_deg);

struct PhotometricParams {
  double hue_max_delta = 0.1;
  double saturation_lower = 0.6;
  double saturation_upper = 1.2;
  double contrast_lower = 0.7;
  double contrast_upper = 1.2;
  double brightness_max_delta = 32.0 / 255.0;
  std::array<double, 3> mean = {0.485, 0.456, 0.406};
  std::array<double, 3> stddev = {0.229, 0.224, 0.225};
  bool elliptical_dropout = true;

  void validate() const;
};

ColorImage adjust_hue(const ColorImage& img, double delta);
ColorImage adjust_saturation(const ColorImage& img, double factor);
/// Scales each channel's deviation from its mean by `factor`.
ColorImage adjust_contrast(const ColorImage& img, double factor);
ColorImage adjust_brightness(const ColorImage& img, double delta);
ColorImage normalize(const ColorImage& img, const std::array<double, 3>& mean,
                     const std::array<double, 3>& stddev);

/// Hue, saturation, contrast, brightness, clamp to [0, 1], elliptical
/// dropout, then normalization. Deterministic per seed.
ColorImage photometric_augment(const ColorImage& img, const PhotometricParams& params, std::uint64_t seed);

}  // namespace kplab
