#include <doctest.h>

#include "kplab/losses.hpp"
#include "test_util.hpp"

using namespace kplab;

namespace {

KeypointSet random_set(Rng& rng, int n) {
  KeypointSet s;
  for (int i = 0; i < n; ++i) s.push_back({rng.uniform(200, 440), rng.uniform(160, 320), rng.uniform(20, 90)});
  return s;
}

std::vector<ViewProjection> side_views(Rng& rng, int n, const Intrinsics& k) {
  std::vector<ViewProjection> views;
  for (int j = 0; j < n; ++j) {
    // Rotate about a point 0.8 m ahead so the scene stays in front.
    const Rigid turn = Rigid::from_axis_angle(testutil::random_vec(rng, 0.3), Vec3::Zero());
    const Vec3 c(0, 0, 0.8);
    views.push_back({Rigid(turn.rotation, c - turn.rotation * c), k});
  }
  return views;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("keypoint loss examples") {
  Rng rng(1);
  const KeypointSet gt = random_set(rng, 4);
  CHECK(keypoint_loss(gt, gt) == 0);
  KeypointSet off = gt;
  off[2].u += 1;
  CHECK(keypoint_loss(off, gt) == doctest::Approx(1).epsilon(1e-12));
  for (int t = 0; t < 100; ++t) {
    const KeypointSet a = random_set(rng, 5), b = random_set(rng, 5);
    double oracle = 0;
    for (int i = 0; i < 5; ++i)
      oracle += (a[i].u - b[i].u) * (a[i].u - b[i].u) + (a[i].v - b[i].v) * (a[i].v - b[i].v) +
                (a[i].d - b[i].d) * (a[i].d - b[i].d);
    CHECK(std::abs(keypoint_loss(a, b) - oracle) <= 1e-12 * oracle);
  }
  CHECK_THROWS_AS(keypoint_loss(random_set(rng, 3), gt), Error);
}

TEST_CASE("projection loss examples") {
  Rng rng(2);
  const Rig rig = testutil::default_rig();
  const KeypointSet gt = random_set(rng, 4);
  const auto views = side_views(rng, 3, rig.left);
  CHECK(projection_loss(gt, gt, rig, views) == 0);

  // Left camera as the only view: squared pixel distance of the projections.
  const KeypointSet pred = random_set(rng, 4);
  const std::vector<ViewProjection> left{{Rigid{}, rig.left}};
  double oracle = 0;
  for (int i = 0; i < 4; ++i)
    oracle += (project(rig.left, uvd_to_xyz(rig, pred[i])) - project(rig.left, uvd_to_xyz(rig, gt[i]))).squaredNorm();
  CHECK(projection_loss(pred, gt, rig, left) == doctest::Approx(oracle).epsilon(1e-12));
  // That is just the UV distance.
  double uv = 0;
  for (int i = 0; i < 4; ++i) uv += std::pow(pred[i].u - gt[i].u, 2) + std::pow(pred[i].v - gt[i].v, 2);
  CHECK(projection_loss(pred, gt, rig, left) == doctest::Approx(uv).epsilon(1e-9));

  // Euclidean invariance: moving both point sets by g and every view by g^-1
  // leaves the loss unchanged.
  const double base = projection_loss(pred, gt, rig, views);
  const Rigid g = testutil::random_rigid(rng, 0.1);
  double moved = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec3 xp = g.apply(uvd_to_xyz(rig, pred[i])), xg = g.apply(uvd_to_xyz(rig, gt[i]));
    for (const auto& v : views) {
      const Rigid p = v.pose * g.inverse();
      moved += (project(v.intrinsics, p.apply(xp)) - project(v.intrinsics, p.apply(xg))).squaredNorm();
    }
  }
  CHECK(moved == doctest::Approx(base).epsilon(1e-9));

  // Non-positive predicted disparity is clamped rather than failing.
  KeypointSet bad = pred;
  bad[0].d = -5;
  CHECK(std::isfinite(projection_loss(bad, gt, rig, left)));
}

TEST_CASE("locality loss examples") {
  const int rows = 60, cols = 200;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(rows, cols);
  delta(30, 40) = 1;
  const std::vector<Eigen::MatrixXd> at_label{delta};
  CHECK(locality_loss(at_label, std::vector<Vec2>{{40, 30}}) == 0);
  CHECK(std::abs(locality_loss(at_label, std::vector<Vec2>{{140, 30}}) - 1) < 1e-4);

  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(rows, cols, 1.0 / (rows * cols));
  const Vec2 label(77.3, 12.8);
  double oracle = 0, peak = 0;
  for (int v = 0; v < rows; ++v)
    for (int u = 0; u < cols; ++u) peak = std::max(peak, std::exp(-(std::pow(u - label.x(), 2) + std::pow(v - label.y(), 2)) / 200));
  for (int v = 0; v < rows; ++v)
    for (int u = 0; u < cols; ++u)
      oracle += 1 - std::exp(-(std::pow(u - label.x(), 2) + std::pow(v - label.y(), 2)) / 200) / peak;
  oracle /= rows * cols;
  CHECK(locality_loss(std::vector<Eigen::MatrixXd>{uniform}, std::vector<Vec2>{label}) ==
        doctest::Approx(oracle).epsilon(1e-12));

  // Bounded by the keypoint count.
  Rng rng(3);
  std::vector<Eigen::MatrixXd> logits;
  std::vector<Vec2> labels;
  for (int i = 0; i < 4; ++i) {
    logits.push_back(Eigen::MatrixXd::Random(rows, cols) * 5);
    labels.emplace_back(rng.uniform(0, cols), rng.uniform(0, rows));
  }
  const double l = locality_loss(spatial_softmax(logits), labels);
  CHECK(l >= 0);
  CHECK(l <= 4);
}

TEST_CASE("alpha schedule and total loss") {
  CHECK(alpha_schedule(0.2) == 0);
  CHECK(alpha_schedule(0.5) == 1.25);
  CHECK(alpha_schedule(1.0) == 2.5);
  CHECK(alpha_schedule(0.0) == 0);
  CHECK(alpha_schedule(1.0 / 3) == 0);
  CHECK(alpha_schedule(2.0 / 3) == 2.5);
  CHECK_THROWS_AS(alpha_schedule(-0.1), Error);
  CHECK_THROWS_AS(alpha_schedule(1.1), Error);
  double prev = 0;
  for (int i = 0; i <= 100; ++i) {
    const double a = alpha_schedule(i / 100.0);
    CHECK(a >= prev);
    prev = a;
  }
  CHECK(total_loss(1, 1, 1, 0) == doctest::Approx(1.001).epsilon(1e-15));
  CHECK(total_loss(1, 1, 1, 1) == doctest::Approx(3.501).epsilon(1e-15));
  CHECK(total_loss(0, 0, 0, 0.4) == 0);
}

TEST_CASE("permutation minimum") {
  Rng rng(4);
  const KeypointSet gt = random_set(rng, 4);
  KeypointSet swapped = gt;
  std::swap(swapped[2], swapped[3]);
  SymmetrySpec sym;
  sym.permutations = {{0, 1, 2, 3}, {0, 1, 3, 2}};
  const SetLoss kp = [](std::span<const Uvd> a, std::span<const Uvd> b) { return keypoint_loss(a, b); };
  const PermutationMin r = permutation_min(kp, swapped, gt, sym);
  CHECK(r.value == 0);
  CHECK(r.index == 1);
  CHECK(r.permutation == std::vector<int>{0, 1, 3, 2});

  const KeypointSet pred = random_set(rng, 4);
  CHECK(permutation_min(kp, pred, gt, SymmetrySpec::identity(4)).value == keypoint_loss(pred, gt));
  CHECK(permutation_min(kp, pred, gt, sym).value <= keypoint_loss(pred, gt));

  // Ties keep the first listed permutation; value is order independent.
  CHECK(permutation_min(kp, gt, gt, SymmetrySpec{{{0, 1, 2, 3}, {0, 1, 2, 3}}}).index == 0);
  SymmetrySpec reversed;
  reversed.permutations = {{0, 1, 3, 2}, {0, 1, 2, 3}};
  CHECK(permutation_min(kp, pred, gt, reversed).value == permutation_min(kp, pred, gt, sym).value);

  SymmetrySpec no_identity;
  no_identity.permutations = {{1, 0, 2, 3}};
  CHECK_THROWS_AS(permutation_min(kp, pred, gt, no_identity), Error);
  SymmetrySpec not_bijection;
  not_bijection.permutations = {{0, 1, 2, 3}, {0, 0, 2, 3}};
  CHECK_THROWS_AS(not_bijection.validate(4), Error);
}

TEST_CASE("integral decode examples") {
  const int rows = 30, cols = 40;
  Heatmaps maps;
  Eigen::MatrixXd peak = Eigen::MatrixXd::Zero(rows, cols);
  peak(7, 23) = 1e4;
  maps.logits.push_back(peak);
  maps.logits.push_back(Eigen::MatrixXd::Zero(rows, cols));
  Eigen::MatrixXd two = Eigen::MatrixXd::Zero(rows, cols);
  two(5, 10) = two(15, 30) = 50;
  maps.logits.push_back(two);
  Eigen::MatrixXd disp(rows, cols);
  for (int v = 0; v < rows; ++v)
    for (int u = 0; u < cols; ++u) disp(v, u) = 10 + u;
  for (int i = 0; i < 3; ++i) maps.disparity.push_back(disp);

  const KeypointSet out = integral_decode(maps);
  CHECK(std::abs(out[0].u - 23) < 1e-6);
  CHECK(std::abs(out[0].v - 7) < 1e-6);
  CHECK(std::abs(out[0].d - 33) < 1e-6);
  CHECK(out[1].u == doctest::Approx((cols - 1) / 2.0).epsilon(1e-12));
  CHECK(out[1].v == doctest::Approx((rows - 1) / 2.0).epsilon(1e-12));
  CHECK(out[1].d == doctest::Approx(10 + (cols - 1) / 2.0).epsilon(1e-12));
  CHECK(std::abs(out[2].u - 20) < 1e-9);
  CHECK(std::abs(out[2].v - 10) < 1e-9);

  const auto probs = spatial_softmax(maps.logits);
  for (const auto& p : probs) CHECK(p.sum() == doctest::Approx(1).epsilon(1e-12));
  maps.disparity.pop_back();
  CHECK_THROWS_AS(integral_decode(maps), Error);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(5);
  const Rig rig = testutil::default_rig();
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    const KeypointSet gt = random_set(rng, 3);
    const KeypointSet pred = random_set(rng, 3);
    const auto views = side_views(rng, 3, rig.left);

    const LossWithGradient kg = keypoint_loss_with_gradient(pred, gt);
    const LossWithGradient pg = projection_loss_with_gradient(pred, gt, rig, views);
    CHECK(kg.value == doctest::Approx(keypoint_loss(pred, gt)).epsilon(1e-12));
    CHECK(pg.value == doctest::Approx(projection_loss(pred, gt, rig, views)).epsilon(1e-12));
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 3; ++c) {
        KeypointSet plus = pred, minus = pred;
        double* p = c == 0 ? &plus[i].u : c == 1 ? &plus[i].v : &plus[i].d;
        double* m = c == 0 ? &minus[i].u : c == 1 ? &minus[i].v : &minus[i].d;
        *p += h;
        *m -= h;
        const double fk = (keypoint_loss(plus, gt) - keypoint_loss(minus, gt)) / (2 * h);
        const double fp = (projection_loss(plus, gt, rig, views) - projection_loss(minus, gt, rig, views)) / (2 * h);
        CHECK(rel_err(kg.gradient[i][c], fk) < 1e-5);
        CHECK(rel_err(pg.gradient[i][c], fp) < 1e-5);
      }
  }
}
