#pragma once

#include <span>
#include <vector>

#include "kplab/geometry.hpp"
#include "kplab/losses.hpp"

namespace kplab {

/// Model-frame keypoints of an object with its symmetry relabelings.
struct KeypointModel {
  std::vector<Vec3> points;
  SymmetrySpec sym;
};

struct ProcrustesResult {
  Rigid transform;  // model -> observed
  double rmsd = 0;  // m
  std::vector<int> permutation;
  bool degenerate = false;
};

/// Orthogonal Procrustes with the reflection-free determinant correction,
/// minimized over the model's symmetry permutations.
///
/// Collinear or coincident keypoints leave the roll about the axis
/// undetermined; the result is then flagged and the rotation chosen is the
/// one closest to identity that aligns the axes.
ProcrustesResult procrustes_align(const KeypointModel& model, std::span<const Vec3> observed);

}  // namespace kplab
