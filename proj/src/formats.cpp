#include "kplab/formats.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace kplab {

double canonical(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  const double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;
}

// ---------------------------------------------------------------------------
// JsonReader

JsonReader JsonReader::operator[](const std::string& key) const {
  if (!value_->is_object()) fail("expected an object");
  auto it = value_->find(key);
  const std::string child = path_.empty() ? key : path_ + "." + key;
  if (it == value_->end()) throw Error(ErrorCode::kSchema, child + ": missing required field");
  return {*it, child};
}

JsonReader JsonReader::operator[](std::size_t index) const {
  if (!value_->is_array()) fail("expected an array");
  const std::string child = path_ + "[" + std::to_string(index) + "]";
  if (index >= value_->size()) throw Error(ErrorCode::kSchema, child + ": index out of range");
  return {(*value_)[index], child};
}

bool JsonReader::has(const std::string& key) const {
  return value_->is_object() && value_->contains(key) && !(*value_)[key].is_null();
}

double JsonReader::number() const {
  if (!value_->is_number()) fail("expected a number");
  const double x = value_->get<double>();
  if (!std::isfinite(x)) fail("expected a finite number");
  return x;
}

int JsonReader::integer() const {
  if (!value_->is_number_integer()) fail("expected an integer");
  return value_->get<int>();
}

bool JsonReader::boolean() const {
  if (!value_->is_boolean()) fail("expected a boolean");
  return value_->get<bool>();
}

std::string JsonReader::string() const {
  if (!value_->is_string()) fail("expected a string");
  return value_->get<std::string>();
}

std::size_t JsonReader::size() const {
  if (!value_->is_array()) fail("expected an array");
  return value_->size();
}

Vec2 JsonReader::vec2() const {
  if (size() != 2) fail("expected 2 numbers");
  return {(*this)[0].number(), (*this)[1].number()};
}

Vec3 JsonReader::vec3() const {
  if (size() != 3) fail("expected 3 numbers");
  return {(*this)[0].number(), (*this)[1].number(), (*this)[2].number()};
}

void JsonReader::fail(const std::string& message) const {
  throw Error(ErrorCode::kSchema, (path_.empty() ? std::string("<root>") : path_) + ": " + message);
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json_file(const fs::path& file) {
  const std::string text = read_file(file);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kSchema, file.filename().string() + ": invalid JSON: " + e.what());
  }
}

void write_text_atomic(const fs::path& file, const std::string& text) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot replace " + file.string() + ": " + ec.message());
}

void write_json_file(const fs::path& file, const Json& value) { write_text_atomic(file, value.dump(2) + "\n"); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kIo, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const fs::path& file) { return sha256_hex(read_file(file)); }

// ---------------------------------------------------------------------------
// JSON mappings

Json to_json(const Vec2& v) { return Json::array({canonical(v.x()), canonical(v.y())}); }
Json to_json(const Vec3& v) { return Json::array({canonical(v.x()), canonical(v.y()), canonical(v.z())}); }

Json to_json(const Intrinsics& k) {
  Json dist = Json::array();
  for (double c : k.distortion) dist.push_back(canonical(c));
  return {{"fx", canonical(k.fx)}, {"fy", canonical(k.fy)}, {"cx", canonical(k.cx)},  {"cy", canonical(k.cy)},
          {"width", k.width},      {"height", k.height},    {"distortion", dist}};
}

Json to_json(const Rig& rig) { return {{"left", to_json(rig.left)}, {"baseline", canonical(rig.baseline)}}; }

Json to_json(const Rigid& t) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(canonical(t.rotation(i, j)));
  return {{"rotation", r}, {"translation", to_json(t.translation)}};
}

Json to_json(const FiducialBoard& board) {
  Json tags = Json::array();
  for (const auto& [id, corners] : board.tags) {
    Json c = Json::array();
    for (const Vec3& p : corners) c.push_back(to_json(p));
    tags.push_back({{"id", id}, {"corners", c}});
  }
  return {{"tags", tags}};
}

Json to_json(const TagDetections& det) {
  Json tags = Json::array();
  for (const TagObservation& t : det.tags) {
    Json c = Json::array();
    for (const Vec2& p : t.corners) c.push_back(to_json(p));
    tags.push_back({{"id", t.tag_id}, {"corners", c}});
  }
  return {{"frame_id", det.frame_id}, {"tags", tags}};
}

Json to_json(const PoseEstimate& est) {
  Json j = to_json(est.pose);
  j["rmse"] = canonical(est.rmse);
  j["n_tags"] = est.n_tags;
  return j;
}

Json to_json(const Annotation2D& a) {
  return {{"frame_id", a.frame_id}, {"keypoint_id", a.keypoint_id}, {"uv", to_json(a.uv)}};
}

Json to_json(const Keypoint3D& kp) {
  return {{"keypoint_id", kp.keypoint_id},
          {"position", to_json(kp.position)},
          {"rmse", canonical(kp.rmse)},
          {"n_views", kp.n_views}};
}

Json to_json(const Uvd& k) { return Json::array({canonical(k.u), canonical(k.v), canonical(k.d)}); }

Json to_json(const SymmetrySpec& sym) {
  Json out = Json::array();
  for (const auto& p : sym.permutations) {
    Json row = Json::array();
    for (int i : p) row.push_back(i + 1);
    out.push_back(row);
  }
  return out;
}

Json to_json(const NoiseModel& n) {
  return {{"pose_corner_rmse", canonical(n.pose_corner_rmse)},
          {"annotation_rmse_mean", canonical(n.annotation_rmse_mean)},
          {"annotation_rmse_std", canonical(n.annotation_rmse_std)}};
}

Json to_json(const CaptureGeometry& g) {
  return {{"radius_min", canonical(g.radius_min)},
          {"radius_max", canonical(g.radius_max)},
          {"elevation_min_deg", canonical(g.elevation_min_deg)},
          {"elevation_max_deg", canonical(g.elevation_max_deg)},
          {"azimuth_min_deg", canonical(g.azimuth_min_deg)},
          {"azimuth_max_deg", canonical(g.azimuth_max_deg)},
          {"poses_per_scan", g.poses_per_scan},
          {"board", to_json(g.board)},
          {"intrinsics", to_json(g.intrinsics)}};
}

Json to_json(const PhotometricParams& p) {
  return {{"hue_max_delta", canonical(p.hue_max_delta)},
          {"saturation_lower", canonical(p.saturation_lower)},
          {"saturation_upper", canonical(p.saturation_upper)},
          {"contrast_lower", canonical(p.contrast_lower)},
          {"contrast_upper", canonical(p.contrast_upper)},
          {"brightness_max_delta", canonical(p.brightness_max_delta)},
          {"mean", {canonical(p.mean[0]), canonical(p.mean[1]), canonical(p.mean[2])}},
          {"stddev", {canonical(p.stddev[0]), canonical(p.stddev[1]), canonical(p.stddev[2])}},
          {"elliptical_dropout", p.elliptical_dropout}};
}

Json to_json(const MetricsSummary& m) {
  return {{"auc", canonical(m.auc)},
          {"pct_2cm", canonical(m.pct_2cm)},
          {"mae_mm", canonical(m.mae_mm)},
          {"uv_mae_px", canonical(m.uv_mae_px)},
          {"disp_mae_px", canonical(m.disp_mae_px)},
          {"count", m.count}};
}

Intrinsics intrinsics_from(const JsonReader& r) {
  Intrinsics k;
  k.fx = r["fx"].number();
  k.fy = r["fy"].number();
  k.cx = r["cx"].number();
  k.cy = r["cy"].number();
  k.width = r["width"].integer();
  k.height = r["height"].integer();
  if (r.has("distortion")) {
    const JsonReader d = r["distortion"];
    for (std::size_t i = 0; i < d.size(); ++i) k.distortion.push_back(d[i].number());
  }
  try {
    k.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return k;
}

Rig rig_from(const JsonReader& r) {
  Rig rig;
  rig.left = intrinsics_from(r["left"]);
  rig.baseline = r["baseline"].number();
  try {
    rig.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return rig;
}

Rigid rigid_from(const JsonReader& r) {
  const JsonReader rot = r["rotation"];
  if (rot.size() != 9) rot.fail("expected 9 numbers (row-major 3x3)");
  Rigid t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t.rotation(i, j) = rot[3 * i + j].number();
  t.translation = r["translation"].vec3();
  // Persisted rotations carry 9 significant digits.
  if (!t.is_valid(1e-7)) rot.fail("not a proper rotation matrix");
  return t;
}

FiducialBoard board_from(const JsonReader& r) {
  FiducialBoard board;
  const JsonReader tags = r["tags"];
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const JsonReader t = tags[i];
    const int id = t["id"].integer();
    const JsonReader c = t["corners"];
    if (c.size() != 4) c.fail("expected 4 corners");
    std::array<Vec3, 4> corners;
    for (int k = 0; k < 4; ++k) corners[k] = c[k].vec3();
    if (!board.tags.emplace(id, corners).second) t["id"].fail("duplicate tag id");
  }
  try {
    board.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return board;
}

TagDetections detections_from(const JsonReader& r) {
  TagDetections det;
  det.frame_id = r["frame_id"].string();
  const JsonReader tags = r["tags"];
  for (std::size_t i = 0; i < tags.size(); ++i) {
    TagObservation obs;
    obs.tag_id = tags[i]["id"].integer();
    const JsonReader c = tags[i]["corners"];
    if (c.size() != 4) c.fail("expected 4 corners");
    for (int k = 0; k < 4; ++k) obs.corners[k] = c[k].vec2();
    det.tags.push_back(obs);
  }
  return det;
}

PoseEstimate pose_estimate_from(const JsonReader& r) {
  PoseEstimate est;
  est.pose = rigid_from(r);
  est.rmse = r["rmse"].number();
  est.n_tags = r["n_tags"].integer();
  if (est.rmse < 0) r["rmse"].fail("must be non-negative");
  return est;
}

Annotation2D annotation_from(const JsonReader& r) {
  Annotation2D a;
  a.frame_id = r["frame_id"].string();
  a.keypoint_id = r["keypoint_id"].integer();
  a.uv = r["uv"].vec2();
  return a;
}

Keypoint3D keypoint_from(const JsonReader& r) {
  Keypoint3D kp;
  kp.keypoint_id = r["keypoint_id"].integer();
  kp.position = r["position"].vec3();
  kp.rmse = r["rmse"].number();
  kp.n_views = r["n_views"].integer();
  if (kp.n_views < 2) r["n_views"].fail("must be at least 2");
  if (kp.rmse < 0) r["rmse"].fail("must be non-negative");
  return kp;
}

Uvd uvd_from(const JsonReader& r) { return Uvd::from(r.vec3()); }

SymmetrySpec symmetry_from(const JsonReader& r) {
  SymmetrySpec sym;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const JsonReader row = r[i];
    std::vector<int> p;
    for (std::size_t k = 0; k < row.size(); ++k) p.push_back(row[k].integer() - 1);
    sym.permutations.push_back(std::move(p));
  }
  if (!sym.permutations.empty()) {
    try {
      sym.validate(sym.size());
    } catch (const Error& e) {
      r.fail(e.what());
    }
  }
  return sym;
}

namespace {

void read_opt(const JsonReader& r, const char* key, double& out) {
  if (r.has(key)) out = r[key].number();
}
void read_opt(const JsonReader& r, const char* key, int& out) {
  if (r.has(key)) out = r[key].integer();
}
void read_opt(const JsonReader& r, const char* key, bool& out) {
  if (r.has(key)) out = r[key].boolean();
}

}  // namespace

NoiseModel noise_from(const JsonReader& r) {
  NoiseModel n;
  read_opt(r, "pose_corner_rmse", n.pose_corner_rmse);
  read_opt(r, "annotation_rmse_mean", n.annotation_rmse_mean);
  read_opt(r, "annotation_rmse_std", n.annotation_rmse_std);
  try {
    n.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return n;
}

CaptureGeometry geometry_from(const JsonReader& r) {
  CaptureGeometry g;
  read_opt(r, "radius_min", g.radius_min);
  read_opt(r, "radius_max", g.radius_max);
  read_opt(r, "elevation_min_deg", g.elevation_min_deg);
  read_opt(r, "elevation_max_deg", g.elevation_max_deg);
  read_opt(r, "azimuth_min_deg", g.azimuth_min_deg);
  read_opt(r, "azimuth_max_deg", g.azimuth_max_deg);
  read_opt(r, "poses_per_scan", g.poses_per_scan);
  if (r.has("board")) g.board = board_from(r["board"]);
  if (r.has("intrinsics")) g.intrinsics = intrinsics_from(r["intrinsics"]);
  try {
    g.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return g;
}

SimulationConfig simulation_from(const JsonReader& r) {
  SimulationConfig c;
  read_opt(r, "n_views_min", c.n_views_min);
  read_opt(r, "n_views_max", c.n_views_max);
  read_opt(r, "n_trials", c.n_trials);
  read_opt(r, "workspace_xy", c.workspace_xy);
  read_opt(r, "workspace_height", c.workspace_height);
  read_opt(r, "project_through_true_poses", c.project_through_true_poses);
  if (r.has("seed")) c.seed = r["seed"].raw().get<std::uint64_t>();
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return c;
}

PhotometricParams photometric_from(const JsonReader& r) {
  PhotometricParams p;
  read_opt(r, "hue_max_delta", p.hue_max_delta);
  read_opt(r, "saturation_lower", p.saturation_lower);
  read_opt(r, "saturation_upper", p.saturation_upper);
  read_opt(r, "contrast_lower", p.contrast_lower);
  read_opt(r, "contrast_upper", p.contrast_upper);
  read_opt(r, "brightness_max_delta", p.brightness_max_delta);
  read_opt(r, "elliptical_dropout", p.elliptical_dropout);
  for (const char* key : {"mean", "stddev"}) {
    if (!r.has(key)) continue;
    const Vec3 v = r[key].vec3();
    auto& dst = std::string(key) == "mean" ? p.mean : p.stddev;
    dst = {v.x(), v.y(), v.z()};
  }
  try {
    p.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) { throw Error(ErrorCode::kIo, msg); }
void png_warning_handler(png_structp, png_const_charp) {}

struct PngRead {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<std::vector<png_byte>> rows;
};

PngRead read_png_rows(const fs::path& file) {
  FilePtr fp(std::fopen(file.c_str(), "rb"));
  if (!fp) throw Error(ErrorCode::kMissingFile, "cannot open " + file.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png_create_info_struct(png);
  PngRead out;
  try {
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (out.bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.rows.assign(out.height, std::vector<png_byte>(rowbytes));
    std::vector<png_bytep> ptrs(out.height);
    for (int y = 0; y < out.height; ++y) ptrs[y] = out.rows[y].data();
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png_rows(const fs::path& file, int width, int height, int color_type, int bit_depth,
                    const std::vector<std::vector<png_byte>>& rows) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    FilePtr fp(std::fopen(tmp.c_str(), "wb"));
    if (!fp) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    try {
      png_init_io(png, fp.get());
      png_set_compression_level(png, 6);
      png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                   PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
      png_write_info(png, info);
      if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
      for (const auto& row : rows) png_write_row(png, row.data());
      png_write_end(png, nullptr);
    } catch (...) {
      png_destroy_write_struct(&png, &info);
      throw;
    }
    png_destroy_write_struct(&png, &info);
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot replace " + file.string() + ": " + ec.message());
}

}  // namespace

ColorImage read_png(const fs::path& file) {
  const PngRead p = read_png_rows(file);
  if (p.bit_depth != 8) throw Error(ErrorCode::kSchema, file.string() + ": expected an 8-bit image");
  ColorImage img(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src = p.channels >= 3 ? c : 0;
        img.channels[c](y, x) = p.rows[y][x * p.channels + src] / 255.0f;
      }
    }
  }
  return img;
}

void write_png(const fs::path& file, const ColorImage& img) {
  std::vector<std::vector<png_byte>> rows(img.height(), std::vector<png_byte>(3 * img.width()));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.channels[c](y, x), 0.f, 1.f);
        rows[y][3 * x + c] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
  write_png_rows(file, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8, rows);
}

PlaneD read_depth_png(const fs::path& file) {
  const PngRead p = read_png_rows(file);
  if (p.bit_depth != 16 || p.channels != 1)
    throw Error(ErrorCode::kSchema, file.string() + ": expected a 16-bit single-channel depth image");
  PlaneD depth(p.height, p.width);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      std::uint16_t mm;
      std::memcpy(&mm, &p.rows[y][2 * x], 2);
      depth(y, x) = mm / 1000.0;
    }
  return depth;
}

void write_depth_png(const fs::path& file, const PlaneD& depth_m) {
  std::vector<std::vector<png_byte>> rows(depth_m.rows(), std::vector<png_byte>(2 * depth_m.cols()));
  for (Eigen::Index y = 0; y < depth_m.rows(); ++y)
    for (Eigen::Index x = 0; x < depth_m.cols(); ++x) {
      const double z = depth_m(y, x);
      if (!std::isfinite(z) || z < 0) throw Error(ErrorCode::kInvalidArgument, "depth png: invalid depth value");
      const long mm = std::lround(z * 1000.0);
      if (mm > 65535) throw Error(ErrorCode::kOutOfRange, "depth png: depth exceeds 65.535 m");
      const auto v = static_cast<std::uint16_t>(mm);
      std::memcpy(&rows[y][2 * x], &v, 2);
    }
  write_png_rows(file, static_cast<int>(depth_m.cols()), static_cast<int>(depth_m.rows()), PNG_COLOR_TYPE_GRAY, 16,
                 rows);
}

// ---------------------------------------------------------------------------
// Float arrays

namespace {

constexpr char kArrayMagic[4] = {'K', 'P', 'L', 'A'};
constexpr std::uint32_t kArrayVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos, const std::string& origin) {
  if (pos + 4 > in.size()) throw Error(ErrorCode::kSchema, origin + ": truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::string encode_array(const FloatArray& array) {
  std::size_t count = 1;
  for (auto d : array.shape) count *= d;
  if (count != array.data.size()) throw Error(ErrorCode::kSizeMismatch, "array: shape does not match data size");
  std::string out(kArrayMagic, 4);
  put_u32(out, kArrayVersion);
  put_u32(out, static_cast<std::uint32_t>(array.shape.size()));
  for (auto d : array.shape) put_u32(out, d);
  for (float f : array.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FloatArray decode_array(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kArrayMagic, 4) != 0)
    throw Error(ErrorCode::kSchema, origin + ": bad magic");
  std::size_t pos = 4;
  if (get_u32(bytes, pos, origin) != kArrayVersion) throw Error(ErrorCode::kSchema, origin + ": unsupported version");
  const std::uint32_t rank = get_u32(bytes, pos, origin);
  if (rank > 16) throw Error(ErrorCode::kSchema, origin + ": rank too large");
  FloatArray a;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    a.shape.push_back(get_u32(bytes, pos, origin));
    count *= a.shape.back();
  }
  if (bytes.size() - pos != 4 * count) throw Error(ErrorCode::kSchema, origin + ": data size does not match shape");
  a.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    a.data[i] = std::bit_cast<float>(get_u32(bytes, pos, origin));
    if (std::isnan(a.data[i])) throw Error(ErrorCode::kSchema, origin + ": NaN at element " + std::to_string(i));
  }
  return a;
}

void write_array(const fs::path& file, const FloatArray& array) { write_text_atomic(file, encode_array(array)); }

FloatArray read_array(const fs::path& file) { return decode_array(read_file(file), file.filename().string()); }

FloatArray heatmaps_to_array(const Heatmaps& maps) {
  if (maps.logits.size() != maps.disparity.size() || maps.logits.empty())
    throw Error(ErrorCode::kSizeMismatch, "heatmaps: logit and disparity counts differ or are empty");
  const auto rows = static_cast<std::uint32_t>(maps.logits[0].rows());
  const auto cols = static_cast<std::uint32_t>(maps.logits[0].cols());
  FloatArray a;
  a.shape = {2, static_cast<std::uint32_t>(maps.logits.size()), rows, cols};
  for (const auto* group : {&maps.logits, &maps.disparity})
    for (const Eigen::MatrixXd& m : *group) {
      if (m.rows() != rows || m.cols() != cols) throw Error(ErrorCode::kSizeMismatch, "heatmaps: grid sizes differ");
      for (std::uint32_t v = 0; v < rows; ++v)
        for (std::uint32_t u = 0; u < cols; ++u) a.data.push_back(static_cast<float>(m(v, u)));
    }
  return a;
}

Heatmaps heatmaps_from_array(const FloatArray& a) {
  if (a.shape.size() != 4 || a.shape[0] != 2) throw Error(ErrorCode::kSchema, "heatmaps: expected shape [2, N, H, W]");
  const std::uint32_t n = a.shape[1], rows = a.shape[2], cols = a.shape[3];
  Heatmaps maps;
  std::size_t pos = 0;
  for (auto* group : {&maps.logits, &maps.disparity})
    for (std::uint32_t k = 0; k < n; ++k) {
      Eigen::MatrixXd m(rows, cols);
      for (std::uint32_t v = 0; v < rows; ++v)
        for (std::uint32_t u = 0; u < cols; ++u) m(v, u) = a.data[pos++];
      group->push_back(std::move(m));
    }
  return maps;
}

}  // namespace kplab
