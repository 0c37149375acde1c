#include <doctest.h>

#include "kplab/error_sim.hpp"
#include "test_util.hpp"

using namespace kplab;

namespace {

SimulationConfig small(int trials, std::uint64_t seed = 1) {
  SimulationConfig c;
  c.n_trials = trials;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("isotropic sigma gives the requested 2D rms") {
  Rng rng(1);
  const double sigma = isotropic_sigma(2.0);
  double ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) ss += Vec2(rng.normal(), rng.normal()).squaredNorm() * sigma * sigma;
  CHECK(std::sqrt(ss / n) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("trajectory sampling stays inside the capture geometry") {
  CaptureGeometry g;
  Rng rng(3);
  const auto poses = sample_trajectory(g, rng);
  CHECK(poses.size() == 200);
  for (const Rigid& p : poses) {
    const Vec3 c = p.center();
    const double r = c.norm();
    CHECK(r >= g.radius_min - 1e-12);
    CHECK(r <= g.radius_max + 1e-12);
    const double el = std::asin(c.z() / r) * 180 / M_PI;
    CHECK(el >= g.elevation_min_deg - 1e-9);
    CHECK(el <= g.elevation_max_deg + 1e-9);
    CHECK(render_detections(g.board, p, g.intrinsics).tags.size() >= 3);
  }
}

TEST_CASE("zero noise gives zero error") {
  NoiseModel none{0, 0, 0};
  const SimulationResult r = simulate_labeling_error(CaptureGeometry{}, none, small(200));
  CHECK(r.rmse_m < 1e-6);
  CHECK(r.errors_m.size() == 200);
  for (int v : r.views_used) {
    CHECK(v >= 4);
    CHECK(v <= 6);
  }
}

TEST_CASE("simulation is deterministic per seed") {
  const SimulationResult a = simulate_labeling_error(CaptureGeometry{}, NoiseModel{}, small(100, 5));
  const SimulationResult b = simulate_labeling_error(CaptureGeometry{}, NoiseModel{}, small(100, 5));
  CHECK(a.errors_m == b.errors_m);
  CHECK(a.rmse_m == b.rmse_m);
  const SimulationResult c = simulate_labeling_error(CaptureGeometry{}, NoiseModel{}, small(100, 6));
  CHECK(a.errors_m != c.errors_m);
}

TEST_CASE("more annotation noise never lowers the rmse under paired seeds") {
  NoiseModel base;
  NoiseModel doubled = base;
  doubled.annotation_rmse_mean *= 2;
  const double a = simulate_labeling_error(CaptureGeometry{}, base, small(500, 9)).rmse_m;
  const double b = simulate_labeling_error(CaptureGeometry{}, doubled, small(500, 9)).rmse_m;
  CHECK(b > a);

  // Pose error only matters when the annotations come from the true cameras;
  // imaged through the estimated poses the views stay self-consistent.
  SimulationConfig true_cams = small(500, 9);
  true_cams.project_through_true_poses = true;
  NoiseModel pose_up = base;
  pose_up.pose_corner_rmse *= 4;
  const double p0 = simulate_labeling_error(CaptureGeometry{}, base, true_cams).rmse_m;
  const double p1 = simulate_labeling_error(CaptureGeometry{}, pose_up, true_cams).rmse_m;
  CHECK(p1 > p0);
}

TEST_CASE("six views do no worse than four under paired seeds") {
  SimulationConfig four = small(1000, 13), six = small(1000, 13);
  four.n_views_min = four.n_views_max = 4;
  six.n_views_min = six.n_views_max = 6;
  const double r4 = simulate_labeling_error(CaptureGeometry{}, NoiseModel{}, four).rmse_m;
  const double r6 = simulate_labeling_error(CaptureGeometry{}, NoiseModel{}, six).rmse_m;
  CHECK(r6 <= r4);
}

TEST_CASE("compare_to_sensor") {
  CHECK(compare_to_sensor(0.0034) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(compare_to_sensor(0.017) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(compare_to_sensor(0.0017) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(compare_to_sensor(0), Error);
}

TEST_CASE("invalid configurations") {
  SimulationConfig c = small(0);
  CHECK_THROWS_AS(simulate_labeling_error(CaptureGeometry{}, NoiseModel{}, c), Error);
  c = small(10);
  c.n_views_min = 1;
  CHECK_THROWS_AS(simulate_labeling_error(CaptureGeometry{}, NoiseModel{}, c), Error);
  NoiseModel bad;
  bad.annotation_rmse_std = -1;
  CHECK_THROWS_AS(simulate_labeling_error(CaptureGeometry{}, bad, small(10)), Error);
  CaptureGeometry g;
  g.radius_min = 2;
  CHECK_THROWS_AS(simulate_labeling_error(g, NoiseModel{}, small(10)), Error);
}

TEST_CASE("coincident views are reported as degenerate geometry") {
  CaptureGeometry g;
  g.radius_min = g.radius_max = 0.8;
  g.elevation_min_deg = g.elevation_max_deg = 60;
  g.azimuth_min_deg = g.azimuth_max_deg = 0;
  try {
    simulate_labeling_error(g, NoiseModel{0, 0, 0}, small(3));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateGeometry);
  }
}
