#include "kplab/image.hpp"

#include <cmath>

namespace kplab {

void DepthImage::validate() const {
  if (depth.rows() != intrinsics.height || depth.cols() != intrinsics.width)
    throw Error(ErrorCode::kInvalidArgument, "depth image: size does not match intrinsics");
  if (!depth.allFinite()) throw Error(ErrorCode::kInvalidArgument, "depth image: non-finite depth value");
  if ((depth < 0).any()) throw Error(ErrorCode::kInvalidArgument, "depth image: negative depth value");
}

float sample_bilinear(const PlaneF& plane, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const int u0 = static_cast<int>(fu), v0 = static_cast<int>(fv);
  const double au = u - fu, av = v - fv;
  auto at = [&](int uu, int vv) -> double {
    if (uu < 0 || vv < 0 || uu >= plane.cols() || vv >= plane.rows()) return 0.0;
    return plane(vv, uu);
  };
  const double top = (1 - au) * at(u0, v0) + au * at(u0 + 1, v0);
  const double bottom = (1 - au) * at(u0, v0 + 1) + au * at(u0 + 1, v0 + 1);
  return static_cast<float>((1 - av) * top + av * bottom);
}

}  // namespace kplab
