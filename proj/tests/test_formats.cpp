#include <doctest.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "kplab/formats.hpp"
#include "test_util.hpp"

using namespace kplab;
using testutil::TempDir;

TEST_CASE("canonical rounding") {
  CHECK(canonical(-0.0) == 0.0);
  CHECK(!std::signbit(canonical(-0.0)));
  CHECK(canonical(1.0) == 1.0);
  CHECK(canonical(0.1234567891234) == 0.123456789);
  CHECK(canonical(canonical(M_PI)) == canonical(M_PI));
}

TEST_CASE("json round trips") {
  Rng rng(1);
  const Rigid t = testutil::random_rigid(rng);
  const Rigid back = rigid_from(JsonReader(to_json(t), "t"));
  CHECK((back.rotation - t.rotation).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((back.translation - t.translation).cwiseAbs().maxCoeff() < 1e-8);

  Intrinsics k = testutil::pinhole(512.25, 320.5, 240.25);
  k.distortion = {-0.1, 0.01};
  CHECK(intrinsics_from(JsonReader(to_json(k), "k")) == k);
  const Rig rig{testutil::pinhole(512.25, 320.5, 240.25), 0.12};
  CHECK(rig_from(JsonReader(to_json(rig), "rig")) == rig);

  const FiducialBoard board = FiducialBoard::perimeter();
  const FiducialBoard b2 = board_from(JsonReader(to_json(board), "board"));
  CHECK(b2.tags.size() == board.tags.size());
  for (const auto& [id, c] : board.tags)
    for (int i = 0; i < 4; ++i) CHECK((b2.tags.at(id)[i] - c[i]).norm() < 1e-9);

  SymmetrySpec sym;
  sym.permutations = {{0, 1, 2, 3}, {0, 1, 3, 2}};
  const Json sj = to_json(sym);
  CHECK(sj.dump().find("[1,2,4,3]") != std::string::npos);  // files use 1-based ids
  CHECK(symmetry_from(JsonReader(sj, "sym")) == sym);

  const Annotation2D a{"f0001", 3, Vec2(101.5, 77.25)};
  CHECK(annotation_from(JsonReader(to_json(a), "a")) == a);
  const Keypoint3D kp{2, Vec3(0.125, -0.5, 0.25), 1.5, 4};
  CHECK(keypoint_from(JsonReader(to_json(kp), "kp")) == kp);
  const Uvd u{1.5, 2.5, 48};
  CHECK(uvd_from(JsonReader(to_json(u), "u")) == u);

  TagDetections det{"f1", {{4, {Vec2(1, 2), Vec2(3, 4), Vec2(5, 6), Vec2(7, 8)}}}};
  CHECK(detections_from(JsonReader(to_json(det), "d")) == det);

  NoiseModel n;
  n.annotation_rmse_mean = 3.5;
  const NoiseModel n2 = noise_from(JsonReader(to_json(n), "n"));
  CHECK(n2.annotation_rmse_mean == 3.5);
  CHECK(n2.pose_corner_rmse == n.pose_corner_rmse);
}

TEST_CASE("json schema errors name the field") {
  const Json j = Json::parse(R"({"fx": 400, "fy": "oops", "cx": 1, "cy": 1, "width": 10, "height": 10})");
  try {
    intrinsics_from(JsonReader(j, "rig.left"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchema);
    CHECK(std::string(e.what()).find("rig.left.fy") != std::string::npos);
  }
  const Json missing = Json::parse(R"({"fx": 400})");
  try {
    intrinsics_from(JsonReader(missing, "k"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }
  const Json bad_sym = Json::parse(R"({"permutations": [[1, 2], [1, 1]]})");
  CHECK_THROWS_AS(symmetry_from(JsonReader(bad_sym, "sym")), Error);
  const Json not_rot = Json::parse(R"({"rotation": [1,0,0, 0,1,0, 0,0,2], "translation": [0,0,0]})");
  CHECK_THROWS_AS(rigid_from(JsonReader(not_rot, "t")), Error);
}

TEST_CASE("atomic json files") {
  TempDir dir("fmt_json");
  const fs::path f = dir.path() / "x.json";
  write_json_file(f, Json{{"a", 1}, {"b", {1.5, 2}}});
  CHECK(parse_json_file(f)["b"][0] == 1.5);
  CHECK(read_file(f).back() == '\n');
  for (const auto& e : fs::directory_iterator(dir.path())) CHECK(e.path().filename() == "x.json");
  CHECK_THROWS_AS(parse_json_file(dir.path() / "missing.json"), Error);
  write_text_atomic(dir.path() / "bad.json", "{not json");
  try {
    parse_json_file(dir.path() / "bad.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchema);
  }
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("png round trips") {
  TempDir dir("fmt_png");
  Rng rng(2);
  ColorImage img(37, 21);
  for (auto& c : img.channels)
    for (int v = 0; v < 21; ++v)
      for (int u = 0; u < 37; ++u) c(v, u) = static_cast<float>(rng.uniform_int(0, 255)) / 255.f;
  write_png(dir.path() / "a.png", img);
  const ColorImage back = read_png(dir.path() / "a.png");
  CHECK(back.width() == 37);
  CHECK(back.height() == 21);
  for (int c = 0; c < 3; ++c) CHECK((back.channels[c] - img.channels[c]).abs().maxCoeff() < 1e-6f);

  PlaneD depth = PlaneD::Zero(13, 17);
  for (int v = 0; v < 13; ++v)
    for (int u = 0; u < 17; ++u) depth(v, u) = (u + v) % 5 == 0 ? 0.0 : rng.uniform_int(1, 65535) / 1000.0;
  write_depth_png(dir.path() / "d.png", depth);
  const PlaneD dback = read_depth_png(dir.path() / "d.png");
  CHECK((dback - depth).abs().maxCoeff() < 1e-9);

  PlaneD too_far = PlaneD::Constant(2, 2, 70.0);
  CHECK_THROWS_AS(write_depth_png(dir.path() / "e.png", too_far), Error);
  write_text_atomic(dir.path() / "junk.png", "not a png");
  CHECK_THROWS_AS(read_png(dir.path() / "junk.png"), Error);
}

TEST_CASE("float array container") {
  TempDir dir("fmt_arr");
  FloatArray a{{2, 3}, {1.f, -2.5f, 3.25f, 0.f, -0.f, 1e-30f}};
  const std::string bytes = encode_array(a);
  CHECK(bytes.substr(0, 4) == "KPLA");
  CHECK(bytes.size() == 4 + 4 + 4 + 2 * 4 + 6 * 4);
  const FloatArray back = decode_array(bytes);
  CHECK(back.shape == a.shape);
  CHECK(std::memcmp(back.data.data(), a.data.data(), a.data.size() * sizeof(float)) == 0);
  write_array(dir.path() / "a.kpla", a);
  CHECK(read_array(dir.path() / "a.kpla") == a);

  FloatArray nan = a;
  nan.data[2] = std::numeric_limits<float>::quiet_NaN();
  try {
    decode_array(encode_array(nan));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchema);
  }
  CHECK_THROWS_AS(decode_array("KPLB" + bytes.substr(4)), Error);
  CHECK_THROWS_AS(decode_array(bytes.substr(0, bytes.size() - 1)), Error);

  Heatmaps maps;
  for (int i = 0; i < 2; ++i) {
    maps.logits.push_back(Eigen::MatrixXd::Constant(4, 5, i + 0.5));
    maps.disparity.push_back(Eigen::MatrixXd::Constant(4, 5, 10 * i + 1.0));
  }
  const FloatArray h = heatmaps_to_array(maps);
  CHECK(h.shape == std::vector<std::uint32_t>{2, 2, 4, 5});
  const Heatmaps hb = heatmaps_from_array(h);
  CHECK(hb.logits[1](3, 4) == 1.5);
  CHECK(hb.disparity[1](0, 0) == 11);
}
