#pragma once

#include <cstdio>

#include "kplab/formats.hpp"
#include "kplab/session.hpp"
#include "test_util.hpp"

namespace testutil {

/// Random but internally consistent session exercising every optional part.
/// Tag corners are pre-rounded so exact equality survives the disk trip.
inline ScanSession fuzz_session(Rng& rng) {
  ScanSession s;
  s.session_id = "fuzz" + std::to_string(rng.uniform_int(0, 99999));
  s.num_keypoints = rng.uniform_int(1, 6);
  s.rig = Rig{pinhole(rng.uniform(300, 700), rng.uniform(300, 340), rng.uniform(220, 260)), rng.uniform(0.05, 0.2)};
  s.board = FiducialBoard::perimeter();
  if (s.num_keypoints >= 2 && rng.uniform() < 0.5) {
    SymmetrySpec sym = SymmetrySpec::identity(s.num_keypoints);
    auto swapped = sym.permutations[0];
    std::swap(swapped[0], swapped[1]);
    sym.permutations.push_back(swapped);
    s.sym = sym;
  }
  s.qa_threshold_px = rng.uniform(1, 10);

  const int n_frames = rng.uniform_int(0, 6);
  for (int i = 0; i < n_frames; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "frame_%02d", i);
    s.frames.push_back({id, "", "", "", {}});
  }
  std::vector<int> tag_ids;
  for (const auto& [id, c] : s.board.tags) tag_ids.push_back(id);
  for (const FrameRecord& f : s.frames) {
    if (rng.uniform() < 0.8) {
      TagDetections det{f.id, {}};
      for (int id : tag_ids)
        if (rng.uniform() < 0.6) {
          TagObservation t{id, {}};
          for (Vec2& c : t.corners) c = Vec2(canonical(rng.uniform(0, 640)), canonical(rng.uniform(0, 480)));
          det.tags.push_back(t);
        }
      s.detections[f.id] = det;
    }
    if (rng.uniform() < 0.7) s.poses[f.id] = PoseEstimate{random_rigid(rng), rng.uniform(0, 3), rng.uniform_int(3, 8)};
    if (rng.uniform() < 0.4) s.selection.push_back(f.id);
    for (int k = 1; k <= s.num_keypoints; ++k)
      if (rng.uniform() < 0.5) s.annotations.push_back({f.id, k, Vec2(rng.uniform(0, 640), rng.uniform(0, 480))});
  }
  s.annotation_revision = rng.uniform_int(0, 20);

  if (rng.uniform() < 0.6) {
    for (int k = 1; k <= s.num_keypoints; ++k)
      s.keypoints.push_back({k, random_vec(rng, 0.2), rng.uniform(0, 8), rng.uniform_int(2, 6)});
    if (!s.frames.empty() && rng.uniform() < 0.7) {
      for (const FrameRecord& f : s.frames) {
        if (rng.uniform() < 0.3) continue;
        FrameLabels l;
        for (int k = 0; k < s.num_keypoints; ++k) {
          const bool front = rng.uniform() < 0.9;
          l.in_front.push_back(front);
          l.uvd.push_back(front ? Uvd{rng.uniform(0, 640), rng.uniform(0, 480), rng.uniform(10, 100)} : Uvd{0, 0, 0});
          l.flagged = l.flagged || !front;
        }
        s.labels[f.id] = l;
      }
      if (!s.labels.empty() && rng.uniform() < 0.7)
        s.qa = QaResult{rng.uniform() < 0.5, rng.uniform_int(1, s.num_keypoints), rng.uniform(0, 10)};
    }
  }
  return s;
}

}  // namespace testutil
