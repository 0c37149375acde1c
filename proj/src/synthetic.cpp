#include "kplab/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "kplab/rng.hpp"

namespace kplab {

namespace {

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "f%04d", i);
  return buf;
}

// Grey level of the board at a board-plane point, or -1 off the board.
float board_shade(const FiducialBoard& board, double x, double y) {
  double half = 0;
  for (const auto& [id, corners] : board.tags)
    for (const Vec3& c : corners) half = std::max({half, std::abs(c.x()), std::abs(c.y())});
  half += 0.02;
  if (std::abs(x) > half || std::abs(y) > half) return -1.f;
  for (const auto& [id, c] : board.tags) {
    const double x0 = std::min({c[0].x(), c[1].x(), c[2].x(), c[3].x()});
    const double x1 = std::max({c[0].x(), c[1].x(), c[2].x(), c[3].x()});
    const double y0 = std::min({c[0].y(), c[1].y(), c[2].y(), c[3].y()});
    const double y1 = std::max({c[0].y(), c[1].y(), c[2].y(), c[3].y()});
    if (x < x0 || x > x1 || y < y0 || y > y1) continue;
    // 6x6 cells: a black border ring around a 4x4 id pattern.
    const int cx = std::clamp(static_cast<int>((x - x0) / (x1 - x0) * 6), 0, 5);
    const int cy = std::clamp(static_cast<int>((y - y0) / (y1 - y0) * 6), 0, 5);
    if (cx == 0 || cy == 0 || cx == 5 || cy == 5) return 0.f;
    const std::uint64_t bits = splitmix64(static_cast<std::uint64_t>(id) * 0x9e37u + 1);
    return (bits >> ((cy - 1) * 4 + (cx - 1))) & 1 ? 1.f : 0.f;
  }
  return 0.92f;
}

struct RenderedView {
  ColorImage color;
  PlaneD depth;
};

RenderedView render_view(const FiducialBoard& board, const Intrinsics& intr, const Rigid& world_to_cam,
                         std::span<const Vec3> keypoints) {
  RenderedView out{ColorImage(intr.width, intr.height), PlaneD::Zero(intr.height, intr.width)};
  const Rigid cam_to_world = world_to_cam.inverse();
  const Vec3 origin = cam_to_world.translation;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 ray = unproject(intr, Vec2(u, v));
      const Vec3 dir = cam_to_world.rotation * ray;
      float shade = -1.f;
      double t = -1;
      if (std::abs(dir.z()) > 1e-12) {
        t = -origin.z() / dir.z();
        if (t > 0) {
          const Vec3 p = origin + t * dir;
          shade = board_shade(board, p.x(), p.y());
        }
      }
      if (shade >= 0) {
        for (auto& c : out.color.channels) c(v, u) = shade;
        out.depth(v, u) = t;
      } else {
        out.color.channels[0](v, u) = 0.45f;
        out.color.channels[1](v, u) = 0.42f;
        out.color.channels[2](v, u) = 0.38f;
      }
    }
  }
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    const Vec3 pc = world_to_cam.apply(keypoints[k]);
    if (pc.z() <= 0) continue;
    const Vec2 uv = project(intr, pc);
    const float hue = static_cast<float>(k) / static_cast<float>(keypoints.size());
    const float rgb[3] = {0.5f + 0.5f * std::cos(6.2832f * hue), 0.5f + 0.5f * std::cos(6.2832f * (hue - 0.333f)),
                          0.5f + 0.5f * std::cos(6.2832f * (hue - 0.667f))};
    for (int dv = -3; dv <= 3; ++dv)
      for (int du = -3; du <= 3; ++du) {
        if (du * du + dv * dv > 9) continue;
        const int u = static_cast<int>(std::lround(uv.x())) + du, v = static_cast<int>(std::lround(uv.y())) + dv;
        if (u < 0 || v < 0 || u >= intr.width || v >= intr.height) continue;
        for (int c = 0; c < 3; ++c) out.color.channels[c](v, u) = rgb[c];
      }
  }
  return out;
}

}  // namespace

SyntheticSession make_synthetic_session(const SyntheticConfig& config) {
  if (config.n_frames < 2 || config.num_keypoints < 1 || config.annotated_views < 2 ||
      config.annotated_views > config.n_frames)
    throw Error(ErrorCode::kInvalidArgument, "synthetic: need >= 2 frames, >= 1 keypoint, 2..n_frames views");
  CaptureGeometry geom = config.geometry;
  geom.poses_per_scan = config.n_frames;
  geom.validate();
  config.noise.validate();

  Rng rng(config.seed);
  SyntheticSession out;
  ScanSession& s = out.session;
  s.session_id = config.session_id;
  s.num_keypoints = config.num_keypoints;
  s.rig = Rig{geom.intrinsics, config.baseline};
  s.rig.validate();
  s.board = geom.board;

  out.true_poses = sample_trajectory(geom, rng);
  for (int k = 0; k < config.num_keypoints; ++k)
    out.true_keypoints.emplace_back(rng.uniform(-1, 1) * config.keypoint_half_extent,
                                    rng.uniform(-1, 1) * config.keypoint_half_extent,
                                    rng.uniform(0.2, 1.0) * config.keypoint_height);

  const double corner_sigma = config.noisy ? isotropic_sigma(config.noise.pose_corner_rmse) : 0.0;
  for (int i = 0; i < config.n_frames; ++i) {
    const std::string id = frame_name(i);
    s.frames.push_back(FrameRecord{id, "", "", "", {}});
    TagDetections det = render_detections(s.board, out.true_poses[i], s.rig.left, id);
    if (config.noisy)
      for (TagObservation& t : det.tags)
        for (Vec2& c : t.corners) c += Vec2(rng.normal(), rng.normal()) * corner_sigma;
    s.detections.emplace(id, std::move(det));

    std::vector<Uvd> labels;
    for (const Vec3& x : out.true_keypoints) labels.push_back(xyz_to_uvd(s.rig, out.true_poses[i].apply(x)));
    out.true_labels.push_back(std::move(labels));
  }

  std::vector<double> annotation_sigma(config.num_keypoints, 0.0);
  if (config.noisy)
    for (double& sigma : annotation_sigma)
      sigma = isotropic_sigma(
          std::max(0.0, rng.normal(config.noise.annotation_rmse_mean, config.noise.annotation_rmse_std)));

  for (int idx : fps_select(out.true_poses, config.annotated_views)) {
    const std::string& id = s.frames[idx].id;
    out.annotated_frames.push_back(id);
    for (int k = 0; k < config.num_keypoints; ++k) {
      Vec2 uv = project(s.rig.left, out.true_poses[idx].apply(out.true_keypoints[k]));
      if (config.noisy) uv += Vec2(rng.normal(), rng.normal()) * annotation_sigma[k];
      s.annotations.push_back(Annotation2D{id, k + 1, uv});
    }
  }
  return out;
}

void render_session_images(SyntheticSession& synth, const fs::path& dir) {
  ScanSession& s = synth.session;
  fs::create_directories(dir / "frames");
  const Rigid to_right = s.rig.left_to_right();
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    FrameRecord& f = s.frames[i];
    const RenderedView left = render_view(s.board, s.rig.left, synth.true_poses[i], synth.true_keypoints);
    const RenderedView right = render_view(s.board, s.rig.left, to_right * synth.true_poses[i], synth.true_keypoints);
    f.left = "frames/" + f.id + "_left.png";
    f.right = "frames/" + f.id + "_right.png";
    f.depth = "frames/" + f.id + "_depth.png";
    write_png(dir / f.left, left.color);
    write_png(dir / f.right, right.color);
    write_depth_png(dir / f.depth, left.depth);
    f.checksums = {{"left", sha256_file(dir / f.left)},
                   {"right", sha256_file(dir / f.right)},
                   {"depth", sha256_file(dir / f.depth)}};
  }
}

}  // namespace kplab
