#pragma once

// File formats: UTF-8 JSON with a schema version, 8-bit PNG images, 16-bit
// millimetre depth PNGs, and a little-endian float32 array container.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kplab/board_pose.hpp"
#include "kplab/error_sim.hpp"
#include "kplab/eval_metrics.hpp"
#include "kplab/geometry.hpp"
#include "kplab/image.hpp"
#include "kplab/labeler.hpp"
#include "kplab/losses.hpp"
#include "kplab/stereo_data.hpp"

namespace kplab {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

/// Rounds to 9 significant digits, the precision every persisted float uses.
/// Negative zero becomes zero.
double canonical(double x);

/// Read-only view of a JSON value that knows its path, so schema errors can
/// name the offending field (e.g. "detections.json: frames[2].tags[0].id").
class JsonReader {
 public:
  JsonReader(const Json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  JsonReader operator[](const std::string& key) const;
  JsonReader operator[](std::size_t index) const;
  bool has(const std::string& key) const;
  bool is_null() const { return value_->is_null(); }

  double number() const;
  int integer() const;
  bool boolean() const;
  std::string string() const;
  std::size_t size() const;  // arrays only
  Vec2 vec2() const;
  Vec3 vec3() const;

  const Json& raw() const { return *value_; }
  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& message) const;

 private:
  const Json* value_;
  std::string path_;
};

Json parse_json_file(const fs::path& file);
/// Writes `value` (2-space indent, trailing newline) via a temp file + rename.
void write_json_file(const fs::path& file, const Json& value);
void write_text_atomic(const fs::path& file, const std::string& text);
std::string read_file(const fs::path& file);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& file);
std::string sha256_hex(const std::string& bytes);

// JSON mappings. Writers round floats with canonical().
Json to_json(const Vec2& v);
Json to_json(const Vec3& v);
Json to_json(const Intrinsics& k);
Json to_json(const Rig& rig);
Json to_json(const Rigid& t);
Json to_json(const FiducialBoard& board);
Json to_json(const TagDetections& det);
Json to_json(const PoseEstimate& est);
Json to_json(const Annotation2D& a);
Json to_json(const Keypoint3D& kp);
Json to_json(const Uvd& k);
Json to_json(const SymmetrySpec& sym);  // 1-based ids
Json to_json(const NoiseModel& n);
Json to_json(const CaptureGeometry& g);
Json to_json(const PhotometricParams& p);
Json to_json(const MetricsSummary& m);

Intrinsics intrinsics_from(const JsonReader& r);
Rig rig_from(const JsonReader& r);
Rigid rigid_from(const JsonReader& r);
FiducialBoard board_from(const JsonReader& r);
TagDetections detections_from(const JsonReader& r);
PoseEstimate pose_estimate_from(const JsonReader& r);
Annotation2D annotation_from(const JsonReader& r);
Keypoint3D keypoint_from(const JsonReader& r);
Uvd uvd_from(const JsonReader& r);
SymmetrySpec symmetry_from(const JsonReader& r);
/// Missing keys keep their defaults.
NoiseModel noise_from(const JsonReader& r);
CaptureGeometry geometry_from(const JsonReader& r);
SimulationConfig simulation_from(const JsonReader& r);
PhotometricParams photometric_from(const JsonReader& r);

// Images.
ColorImage read_png(const fs::path& file);
/// Values are clamped to [0, 1] and quantized to 8 bits.
void write_png(const fs::path& file, const ColorImage& img);
/// 16-bit single channel, value = millimetres, 0 = invalid.
PlaneD read_depth_png(const fs::path& file);
void write_depth_png(const fs::path& file, const PlaneD& depth_m);

/// Float32 tensor container: "KPLA", u32 version, u32 rank, u32 dims[rank],
/// then row-major float32 data, all little-endian.
struct FloatArray {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
  bool operator==(const FloatArray&) const = default;
};

void write_array(const fs::path& file, const FloatArray& array);
/// Throws kSchema on a malformed header or any NaN value.
FloatArray read_array(const fs::path& file);
std::string encode_array(const FloatArray& array);
FloatArray decode_array(const std::string& bytes, const std::string& origin = "array");

/// Heatmaps as a [2, N, H, W] array: logits then disparity.
FloatArray heatmaps_to_array(const Heatmaps& maps);
Heatmaps heatmaps_from_array(const FloatArray& array);

}  // namespace kplab
