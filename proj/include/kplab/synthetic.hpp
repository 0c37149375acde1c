#pragma once

// Synthetic scan sessions with known ground truth: a fiducial board, a
// camera trajectory around it, and keypoints floating above it.

#include <cstdint>
#include <string>
#include <vector>

#include "kplab/error_sim.hpp"
#include "kplab/session.hpp"

namespace kplab {

struct SyntheticConfig {
  std::string session_id = "synthetic";
  int n_frames = 40;
  int num_keypoints = 8;
  int annotated_views = kDefaultKeyframeCount;
  double baseline = 0.12;  // m
  /// Keypoints are drawn in a box of this half-width and height above the
  /// board center (m).
  double keypoint_half_extent = 0.12;
  double keypoint_height = 0.15;
  CaptureGeometry geometry;  // poses_per_scan is replaced by n_frames
  /// When false, detections and annotations are exact.
  bool noisy = false;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

struct SyntheticSession {
  ScanSession session;  // frames, detections and annotations filled
  std::vector<Rigid> true_poses;         // per frame, world to left camera
  std::vector<Vec3> true_keypoints;      // ordered by keypoint id
  std::vector<std::vector<Uvd>> true_labels;  // per frame, per keypoint
  std::vector<std::string> annotated_frames;
};

SyntheticSession make_synthetic_session(const SyntheticConfig& config);

/// Ray-traces left/right PNGs and a left depth PNG for every frame into
/// `dir/frames/`, and records the references and checksums on the session.
void render_session_images(SyntheticSession& synth, const fs::path& dir);

}  // namespace kplab
