#include "kplab/stereo_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kplab {

Uvd full_to_crop(const Uvd& full, int u0, int v0, int right_offset) {
  return {full.u - u0, full.v - v0, full.d - right_offset};
}

Uvd crop_to_full(const Uvd& crop, int u0, int v0, int right_offset) {
  return {crop.u + u0, crop.v + v0, crop.d + right_offset};
}

StereoCrop crop_stereo(const ColorImage& left, const ColorImage& right, const BoundingBox& bbox,
                       std::span<const Uvd> full_frame_labels, Rng* jitter_rng, double jitter_px) {
  const int w = left.width(), h = left.height();
  if (right.width() != w || right.height() != h)
    throw Error(ErrorCode::kSizeMismatch, "crop_stereo: left and right images differ in size");
  if (w < kCropWidth + kRightCropOffset || h < kCropHeight)
    throw Error(ErrorCode::kOutOfRange, "crop_stereo: images are smaller than the crop");
  if (bbox.u_max < -0.5 || bbox.v_max < -0.5 || bbox.u_min > w - 0.5 || bbox.v_min > h - 0.5 ||
      bbox.u_max < bbox.u_min || bbox.v_max < bbox.v_min)
    throw Error(ErrorCode::kObjectOutsideFrame, "crop_stereo: object box lies outside the frame");

  Vec2 c = bbox.center();
  if (jitter_rng != nullptr && jitter_px > 0)
    c += Vec2(jitter_rng->uniform(-jitter_px, jitter_px), jitter_rng->uniform(-jitter_px, jitter_px));

  const double half_w = 0.5 * (kCropWidth - 1), half_h = 0.5 * (kCropHeight - 1);
  int u0 = static_cast<int>(std::lround(c.x() - half_w));
  int v0 = static_cast<int>(std::lround(c.y() - half_h));
  u0 = std::clamp(u0, kRightCropOffset, w - kCropWidth);
  v0 = std::clamp(v0, 0, h - kCropHeight);

  StereoCrop crop;
  crop.u0 = u0;
  crop.v0 = v0;
  crop.right_offset = kRightCropOffset;
  crop.left = left.block(u0, v0, kCropWidth, kCropHeight);
  crop.right = right.block(u0 - kRightCropOffset, v0, kCropWidth, kCropHeight);
  crop.labels.reserve(full_frame_labels.size());
  for (const Uvd& l : full_frame_labels) crop.labels.push_back(full_to_crop(l, u0, v0, kRightCropOffset));
  return crop;
}

StereoCrop mirror_stereo(const StereoCrop& crop) {
  StereoCrop out = crop;
  out.left = crop.right.flipped_horizontally();
  out.right = crop.left.flipped_horizontally();
  const double last = crop.width() - 1;
  for (Uvd& l : out.labels) {
    const double u_right = l.u - l.d;
    l.u = last - u_right;
  }
  return out;
}

namespace {

constexpr double kMaxRotationDeg = 5.0;

Mat3 crop_camera(const Intrinsics& full, double u_origin, double v_origin) {
  Mat3 k = full.matrix();
  k(0, 2) -= u_origin;
  k(1, 2) -= v_origin;
  return k;
}

Mat3 rotation_x(double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

struct Homographies {
  Mat3 left;
  Mat3 right;
};

Homographies rotation_homographies(const StereoCrop& crop, const Intrinsics& full, double angle_deg) {
  if (!(std::abs(angle_deg) <= kMaxRotationDeg))
    throw Error(ErrorCode::kOutOfRange, "rotate_about_x: angle must lie within +-5 degrees");
  const Mat3 r = rotation_x(angle_deg);
  const Mat3 kl = crop_camera(full, crop.u0, crop.v0);
  const Mat3 kr = crop_camera(full, crop.u0 - crop.right_offset, crop.v0);
  return {kl * r * kl.inverse(), kr * r * kr.inverse()};
}

Vec2 apply_homography(const Mat3& h, const Vec2& p) { return (h * p.homogeneous()).hnormalized(); }

ColorImage warp_image(const ColorImage& img, const Mat3& h) {
  const Mat3 inv = h.inverse();
  ColorImage out(img.width(), img.height());
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const Vec2 src = apply_homography(inv, Vec2(u, v));
      for (int c = 0; c < 3; ++c) out.channels[c](v, u) = sample_bilinear(img.channels[c], src.x(), src.y());
    }
  }
  return out;
}

}  // namespace

LabelPair rotate_label_pair(const Uvd& label, const StereoCrop& crop, const Intrinsics& full_frame,
                            double angle_deg) {
  const Homographies h = rotation_homographies(crop, full_frame, angle_deg);
  return {apply_homography(h.left, Vec2(label.u, label.v)),
          apply_homography(h.right, Vec2(label.u - label.d, label.v))};
}

StereoCrop rotate_about_x(const StereoCrop& crop, const Intrinsics& full_frame, double angle_deg) {
  const Homographies h = rotation_homographies(crop, full_frame, angle_deg);
  if (angle_deg == 0.0) return crop;
  StereoCrop out = crop;
  out.left = warp_image(crop.left, h.left);
  out.right = warp_image(crop.right, h.right);
  for (Uvd& l : out.labels) {
    const Vec2 a = apply_homography(h.left, Vec2(l.u, l.v));
    const Vec2 b = apply_homography(h.right, Vec2(l.u - l.d, l.v));
    l = {a.x(), a.y(), a.x() - b.x()};
  }
  return out;
}

void PhotometricParams::validate() const {
  if (!(hue_max_delta >= 0 && brightness_max_delta >= 0))
    throw Error(ErrorCode::kInvalidArgument, "photometric params: deltas must be non-negative");
  if (!(saturation_lower <= saturation_upper && contrast_lower <= contrast_upper))
    throw Error(ErrorCode::kInvalidArgument, "photometric params: bounds must be ordered");
  for (double s : stddev)
    if (!(s > 0)) throw Error(ErrorCode::kInvalidArgument, "photometric params: stddev must be positive");
}

namespace {

// Hue in [0, 1), saturation and value in [0, 1].
void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const float delta = mx - mn;
  v = mx;
  s = mx > 0 ? delta / mx : 0.f;
  if (delta <= 0) {
    h = 0;
    return;
  }
  if (mx == r)
    h = (g - b) / delta;
  else if (mx == g)
    h = 2.f + (b - r) / delta;
  else
    h = 4.f + (r - g) / delta;
  h /= 6.f;
  if (h < 0) h += 1.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float hh = (h - std::floor(h)) * 6.f;
  const int sector = static_cast<int>(hh) % 6;
  const float f = hh - std::floor(hh);
  const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

template <typename Fn>
ColorImage map_hsv(const ColorImage& img, Fn&& fn) {
  ColorImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      float h, s, v;
      rgb_to_hsv(img.channels[0](y, x), img.channels[1](y, x), img.channels[2](y, x), h, s, v);
      fn(h, s, v);
      hsv_to_rgb(h, s, v, out.channels[0](y, x), out.channels[1](y, x), out.channels[2](y, x));
    }
  }
  return out;
}

}  // namespace

ColorImage adjust_hue(const ColorImage& img, double delta) {
  if (delta == 0.0) return img;
  return map_hsv(img, [delta](float& h, float&, float&) {
    h += static_cast<float>(delta);
    h -= std::floor(h);
  });
}

ColorImage adjust_saturation(const ColorImage& img, double factor) {
  if (factor == 1.0) return img;
  return map_hsv(img, [factor](float&, float& s, float&) {
    s = std::clamp(static_cast<float>(s * factor), 0.f, 1.f);
  });
}

ColorImage adjust_contrast(const ColorImage& img, double factor) {
  if (factor == 1.0) return img;
  ColorImage out;
  for (int c = 0; c < 3; ++c) {
    const float mean = img.channels[c].mean();
    out.channels[c] = (img.channels[c] - mean) * static_cast<float>(factor) + mean;
  }
  return out;
}

ColorImage adjust_brightness(const ColorImage& img, double delta) {
  ColorImage out;
  for (int c = 0; c < 3; ++c) out.channels[c] = img.channels[c] + static_cast<float>(delta);
  return out;
}

ColorImage normalize(const ColorImage& img, const std::array<double, 3>& mean,
                     const std::array<double, 3>& stddev) {
  ColorImage out;
  for (int c = 0; c < 3; ++c)
    out.channels[c] = (img.channels[c] - static_cast<float>(mean[c])) / static_cast<float>(stddev[c]);
  return out;
}

ColorImage photometric_augment(const ColorImage& img, const PhotometricParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  const double hue = rng.uniform(-params.hue_max_delta, params.hue_max_delta);
  const double saturation = rng.uniform(params.saturation_lower, params.saturation_upper);
  const double contrast = rng.uniform(params.contrast_lower, params.contrast_upper);
  const double brightness = rng.uniform(-params.brightness_max_delta, params.brightness_max_delta);

  ColorImage out = adjust_brightness(
      adjust_contrast(adjust_saturation(adjust_hue(img, hue), saturation), contrast), brightness);
  for (auto& c : out.channels) c = c.max(0.f).min(1.f);

  if (params.elliptical_dropout) {
    const int count = rng.uniform_int(0, 2);
    for (int e = 0; e < count; ++e) {
      const double cu = rng.uniform(0, out.width()), cv = rng.uniform(0, out.height());
      const double a = rng.uniform(5, 30), b = rng.uniform(5, 30);
      const double theta = rng.uniform(0, std::numbers::pi);
      const std::array<float, 3> color = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                                          static_cast<float>(rng.uniform())};
      const double ct = std::cos(theta), st = std::sin(theta);
      for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
          const double dx = x - cu, dy = y - cv;
          const double p = (dx * ct + dy * st) / a, q = (-dx * st + dy * ct) / b;
          if (p * p + q * q <= 1.0)
            for (int c = 0; c < 3; ++c) out.channels[c](y, x) = color[c];
        }
      }
    }
  }
  return normalize(out, params.mean, params.stddev);
}

}  // namespace kplab
