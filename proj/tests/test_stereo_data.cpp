#include <doctest.h>

#include "kplab/stereo_data.hpp"
#include "test_util.hpp"

using namespace kplab;
using testutil::pinhole;

namespace {

ColorImage random_image(Rng& rng, int w, int h) {
  ColorImage img(w, h);
  for (auto& c : img.channels)
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) c(v, u) = static_cast<float>(rng.uniform());
  return img;
}

Mat3 rot_x(double deg) {
  const double a = deg * M_PI / 180;
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

}  // namespace

TEST_CASE("crop coordinates: disparity drops by the right offset") {
  const Uvd a = full_to_crop({300, 200, 48}, 250, 150);
  CHECK(a.u == 50);
  CHECK(a.v == 50);
  CHECK(a.d == 18);
  CHECK(full_to_crop({300, 200, 96}, 250, 150).d == 66);
  const Uvd back = crop_to_full(a, 250, 150);
  CHECK(back.u == 300);
  CHECK(back.v == 200);
  CHECK(back.d == 48);
}

TEST_CASE("crop_stereo: geometry, clamping, and errors") {
  Rng rng(1);
  const ColorImage left = random_image(rng, 640, 480), right = random_image(rng, 640, 480);
  const std::vector<Uvd> labels{{320, 240, 48}, {330, 250, 96}};
  const StereoCrop c = crop_stereo(left, right, {300, 220, 340, 260}, labels);
  CHECK(c.width() == kCropWidth);
  CHECK(c.height() == kCropHeight);
  // Box center (320, 240); the crop center sits half a pixel off, rounded away from zero.
  CHECK(c.u0 == 231);
  CHECK(c.v0 == 181);
  CHECK(c.labels[0].d == 18);
  CHECK(c.labels[1].d == 66);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CHECK(c.labels[i].u == labels[i].u - c.u0);
    CHECK(c.labels[i].v == labels[i].v - c.v0);
  }
  // Patches are the source pixels at the stated origins.
  CHECK(c.left.channels[1](5, 7) == left.channels[1](c.v0 + 5, c.u0 + 7));
  CHECK(c.right.channels[2](9, 3) == right.channels[2](c.v0 + 9, c.u0 - c.right_offset + 3));

  const StereoCrop corner = crop_stereo(left, right, {0, 0, 4, 4}, labels);
  CHECK(corner.u0 == kRightCropOffset);
  CHECK(corner.v0 == 0);
  const StereoCrop far = crop_stereo(left, right, {630, 470, 639, 479}, labels);
  CHECK(far.u0 == 640 - kCropWidth);
  CHECK(far.v0 == 480 - kCropHeight);

  try {
    crop_stereo(left, right, {700, 100, 720, 120}, labels);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kObjectOutsideFrame);
  }
  CHECK_THROWS_AS(crop_stereo(left, random_image(rng, 320, 480), {0, 0, 5, 5}, labels), Error);
  CHECK_THROWS_AS(crop_stereo(random_image(rng, 100, 100), random_image(rng, 100, 100), {0, 0, 5, 5}, labels),
                  Error);
}

TEST_CASE("crop_stereo: jitter stays bounded and is seeded") {
  Rng rng(2);
  const ColorImage left = random_image(rng, 640, 480), right = left;
  const std::vector<Uvd> none;
  const BoundingBox box{300, 200, 340, 280};
  const StereoCrop base = crop_stereo(left, right, box, none);
  Rng j1(7), j2(7);
  for (int i = 0; i < 200; ++i) {
    const StereoCrop a = crop_stereo(left, right, box, none, &j1, 20);
    const StereoCrop b = crop_stereo(left, right, box, none, &j2, 20);
    CHECK(a.u0 == b.u0);
    CHECK(a.v0 == b.v0);
    CHECK(std::abs(a.u0 - base.u0) <= 21);
    CHECK(std::abs(a.v0 - base.v0) <= 21);
  }
}

TEST_CASE("mirror: involution, preserved disparity, pixel correspondence") {
  Rng rng(3);
  const ColorImage left = random_image(rng, 640, 480), right = random_image(rng, 640, 480);
  std::vector<Uvd> labels;
  for (int i = 0; i < 20; ++i) labels.push_back({rng.uniform(280, 360), rng.uniform(200, 280), rng.uniform(30, 100)});
  const StereoCrop c = crop_stereo(left, right, {280, 200, 360, 280}, labels);
  const StereoCrop m = mirror_stereo(c);
  const StereoCrop mm = mirror_stereo(m);
  CHECK(mm.left == c.left);
  CHECK(mm.right == c.right);
  const double w = c.width();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CHECK(m.labels[i].d == c.labels[i].d);
    CHECK(m.labels[i].v == c.labels[i].v);
    CHECK(m.labels[i].u == doctest::Approx(w - 1 - (c.labels[i].u - c.labels[i].d)).epsilon(1e-15));
    CHECK(std::abs(mm.labels[i].u - c.labels[i].u) < 1e-12);
  }
  // The mirrored left image is the flipped right one.
  for (int u = 0; u < c.width(); u += 17) CHECK(m.left.channels[0](11, u) == c.right.channels[0](11, c.width() - 1 - u));

  // A label at u = (W - 1 + d) / 2 is a fixed point.
  StereoCrop centred = c;
  centred.labels = {{(w - 1 + 20) / 2, 60, 20}};
  CHECK(mirror_stereo(centred).labels[0].u == doctest::Approx(centred.labels[0].u));
}

TEST_CASE("rotate_about_x: rows stay aligned and labels follow the 3D rotation") {
  const Rig rig{pinhole(400, 320, 240), 0.12};
  Rng rng(4);
  const ColorImage left = random_image(rng, 640, 480), right = random_image(rng, 640, 480);
  std::vector<Uvd> full;
  for (int i = 0; i < 50; ++i) full.push_back({rng.uniform(280, 360), rng.uniform(210, 270), rng.uniform(40, 90)});
  const StereoCrop c = crop_stereo(left, right, {280, 210, 360, 270}, full);
  for (double angle : {-5.0, -2.5, 0.7, 5.0}) {
    const StereoCrop r = rotate_about_x(c, rig.left, angle);
    for (std::size_t i = 0; i < full.size(); ++i) {
      const LabelPair p = rotate_label_pair(c.labels[i], c, rig.left, angle);
      CHECK(std::abs(p.left.y() - p.right.y()) < 1e-9);
      // Oracle: back-project in the full frame, rotate, re-project.
      const Vec3 x = rot_x(angle) * uvd_to_xyz(rig, full[i]);
      const Uvd expect = full_to_crop(xyz_to_uvd(rig, x), c.u0, c.v0, c.right_offset);
      CHECK(std::abs(r.labels[i].u - expect.u) < 1e-9);
      CHECK(std::abs(r.labels[i].v - expect.v) < 1e-9);
      CHECK(std::abs(r.labels[i].d - expect.d) < 1e-9);
    }
  }
  const StereoCrop same = rotate_about_x(c, rig.left, 0);
  CHECK(same.left == c.left);
  CHECK_THROWS_AS(rotate_about_x(c, rig.left, 5.01), Error);
  CHECK_THROWS_AS(rotate_label_pair(c.labels[0], c, rig.left, -6), Error);
}

TEST_CASE("photometric: identity parameters reduce to normalization") {
  Rng rng(5);
  const ColorImage img = random_image(rng, 40, 30);
  PhotometricParams p;
  p.hue_max_delta = 0;
  p.saturation_lower = p.saturation_upper = 1;
  p.contrast_lower = p.contrast_upper = 1;
  p.brightness_max_delta = 0;
  p.elliptical_dropout = false;
  const ColorImage out = photometric_augment(img, p, 99);
  const ColorImage ref = normalize(img, p.mean, p.stddev);
  for (int c = 0; c < 3; ++c) CHECK((out.channels[c] - ref.channels[c]).abs().maxCoeff() < 1e-6f);
  // Normalization oracle.
  CHECK(ref.channels[1](3, 4) == doctest::Approx((img.channels[1](3, 4) - 0.456) / 0.224).epsilon(1e-5));
}

TEST_CASE("photometric: deterministic per seed, bounded before normalization") {
  Rng rng(6);
  const ColorImage img = random_image(rng, 64, 48);
  PhotometricParams p;
  CHECK(photometric_augment(img, p, 3) == photometric_augment(img, p, 3));
  CHECK(!(photometric_augment(img, p, 3) == photometric_augment(img, p, 4)));
  p.mean = {0, 0, 0};
  p.stddev = {1, 1, 1};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ColorImage out = photometric_augment(img, p, s);
    for (const auto& c : out.channels) {
      CHECK(c.minCoeff() >= 0.f);
      CHECK(c.maxCoeff() <= 1.f);
    }
  }
  PhotometricParams bad;
  bad.saturation_lower = 2;
  CHECK_THROWS_AS(photometric_augment(img, bad, 0), Error);
}

TEST_CASE("photometric: individual adjustments") {
  Rng rng(7);
  const ColorImage img = random_image(rng, 20, 20);
  const ColorImage c = adjust_contrast(img, 0.5);
  for (int ch = 0; ch < 3; ++ch) {
    const float mean = img.channels[ch].mean();
    CHECK(c.channels[ch].mean() == doctest::Approx(mean).epsilon(1e-5));
    CHECK(c.channels[ch](2, 3) - mean == doctest::Approx(0.5 * (img.channels[ch](2, 3) - mean)).epsilon(1e-4));
  }
  const ColorImage b = adjust_brightness(img, 0.1);
  CHECK(b.channels[0](1, 1) == doctest::Approx(img.channels[0](1, 1) + 0.1f));
  // A full hue turn is the identity up to float rounding.
  const ColorImage h = adjust_hue(img, 1.0);
  for (int ch = 0; ch < 3; ++ch) CHECK((h.channels[ch] - img.channels[ch]).abs().maxCoeff() < 1e-5f);
  // Zero saturation yields gray pixels at the max channel value.
  const ColorImage g = adjust_saturation(img, 0.0);
  const float mx = std::max({img.channels[0](4, 4), img.channels[1](4, 4), img.channels[2](4, 4)});
  for (int ch = 0; ch < 3; ++ch) CHECK(g.channels[ch](4, 4) == doctest::Approx(mx));
}
