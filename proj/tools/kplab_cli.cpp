// kplab command-line interface.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 QA rejection.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "kplab/depth_warp.hpp"
#include "kplab/error_sim.hpp"
#include "kplab/eval_metrics.hpp"
#include "kplab/formats.hpp"
#include "kplab/pose_fit.hpp"
#include "kplab/service.hpp"
#include "kplab/session.hpp"
#include "kplab/stereo_data.hpp"
#include "kplab/synthetic.hpp"

using namespace kplab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitReject = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string session;
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

fs::path require_session(const Globals& g) {
  if (g.session.empty()) throw UsageError("--session is required");
  return g.session;
}

std::optional<Json> load_config(const Globals& g) {
  if (g.config.empty()) return std::nullopt;
  return parse_json_file(g.config);
}

// Writes JSON to --out when given, else to stdout.
void emit(const Globals& g, const Json& j) {
  if (g.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    if (fs::path(g.out).has_parent_path()) fs::create_directories(fs::path(g.out).parent_path());
    write_json_file(g.out, j);
  }
}

Json qa_record(const ScanSession& s) {
  return {{"accept", s.qa->accept},
          {"worst_keypoint", s.qa->worst_keypoint},
          {"worst_rmse", canonical(s.qa->worst_rmse)},
          {"threshold_px", canonical(s.qa_threshold_px)}};
}

// Loads the session, runs `fn` on it under the writer lock, and saves it.
template <class F>
ScanSession mutate_session(const Globals& g, F&& fn) {
  const fs::path dir = require_session(g);
  SessionLock lock(dir);
  ScanSession s = load_session(dir);
  fn(s);
  save_session(s, dir);
  return s;
}

int cmd_poses(const Globals& g) {
  const ScanSession s = mutate_session(g, [](ScanSession& s) { stage_poses(s); });
  std::vector<PoseEstimate> est;
  for (const auto& [id, p] : s.poses) est.push_back(p);
  const TrajectoryPoseStats st = trajectory_pose_stats(est);
  std::cout << "posed " << s.poses.size() << " of " << s.frames.size() << " frames; corner rmse "
            << st.mean_rmse << " +/- " << st.std_rmse << " px, " << st.mean_tags << " tags per frame\n";
  return kExitOk;
}

int cmd_select(const Globals& g, int k) {
  const ScanSession s = mutate_session(g, [&](ScanSession& s) { stage_select(s, k); });
  for (const std::string& id : s.selection) std::cout << id << "\n";
  return kExitOk;
}

int cmd_triangulate(const Globals& g) {
  const ScanSession s = mutate_session(g, [](ScanSession& s) { stage_triangulate(s); });
  for (const Keypoint3D& kp : s.keypoints)
    std::printf("keypoint %d: (%.6f, %.6f, %.6f) rmse %.3f px over %d views\n", kp.keypoint_id, kp.position.x(),
                kp.position.y(), kp.position.z(), kp.rmse, kp.n_views);
  return kExitOk;
}

int cmd_propagate(const Globals& g) {
  const ScanSession s = mutate_session(g, [](ScanSession& s) { stage_propagate(s); });
  int flagged = 0;
  for (const auto& [id, l] : s.labels) flagged += l.flagged;
  std::cout << "labeled " << s.labels.size() << " frames; " << flagged << " flagged\n";
  return kExitOk;
}

int report_qa(const Globals& g, const ScanSession& s) {
  const Json rec = qa_record(s);
  if (!g.out.empty()) write_json_file(g.out, rec);
  std::printf("qa %s: worst keypoint %d at %.3f px (threshold %.3f px)\n", s.qa->accept ? "accept" : "reject",
              s.qa->worst_keypoint, s.qa->worst_rmse, s.qa_threshold_px);
  return s.qa->accept ? kExitOk : kExitReject;
}

int cmd_qa(const Globals& g, std::optional<double> threshold) {
  const ScanSession s = mutate_session(g, [&](ScanSession& s) {
    if (threshold) s.qa_threshold_px = *threshold;
    stage_qa(s);
  });
  return report_qa(g, s);
}

int cmd_pipeline(const Globals& g, int k) {
  const ScanSession s = mutate_session(g, [&](ScanSession& s) { run_pipeline(s, PipelineOptions{k}); });
  return report_qa(g, s);
}

int cmd_make_synthetic(const Globals& g, bool images) {
  if (g.out.empty()) throw UsageError("--out <dir> is required");
  SyntheticConfig cfg;
  if (auto j = load_config(g)) {
    const JsonReader r(*j, "");
    if (r.has("session_id")) cfg.session_id = r["session_id"].string();
    if (r.has("n_frames")) cfg.n_frames = r["n_frames"].integer();
    if (r.has("num_keypoints")) cfg.num_keypoints = r["num_keypoints"].integer();
    if (r.has("annotated_views")) cfg.annotated_views = r["annotated_views"].integer();
    if (r.has("baseline")) cfg.baseline = r["baseline"].number();
    if (r.has("noisy")) cfg.noisy = r["noisy"].boolean();
    if (r.has("noise")) cfg.noise = noise_from(r["noise"]);
    if (r.has("geometry")) cfg.geometry = geometry_from(r["geometry"]);
  }
  cfg.seed = g.seed;
  SyntheticSession synth = make_synthetic_session(cfg);
  if (images) render_session_images(synth, g.out);
  save_session(synth.session, g.out);
  std::cout << "wrote " << synth.session.frames.size() << " frames to " << g.out << "\n";
  return kExitOk;
}

// --- warp-depth --------------------------------------------------------------

int cmd_warp_depth(const Globals& g, const std::string& input) {
  if (g.out.empty()) throw UsageError("--out <depth.png> is required");
  const auto cfg = load_config(g);
  if (!cfg) throw UsageError("--config is required (source/target intrinsics and transform)");
  const JsonReader r(*cfg, "");
  DepthImage src(intrinsics_from(r["source_intrinsics"]));
  const Intrinsics target = intrinsics_from(r["target_intrinsics"]);
  Rigid to_target;
  if (r.has("depth_to_target")) {
    to_target = rigid_from(r["depth_to_target"]);
  } else {
    to_target = chain_to_left(rigid_from(r["left_from_world"]), rigid_from(r["rgb_from_world"]),
                              rigid_from(r["rgb_from_depth"]));
  }
  src.depth = read_depth_png(input);
  src.validate();
  const DepthImage warped = warp_depth(undistort_depth(src), to_target, target);
  write_depth_png(g.out, warped.depth);
  const long valid = (warped.depth > 0).count();
  std::cout << "warped " << valid << " valid pixels into " << g.out << "\n";
  return kExitOk;
}

// --- augment -----------------------------------------------------------------

FloatArray image_array(const ColorImage& img) {
  FloatArray a;
  a.shape = {3, static_cast<std::uint32_t>(img.height()), static_cast<std::uint32_t>(img.width())};
  for (const PlaneF& c : img.channels)
    for (int v = 0; v < img.height(); ++v)
      for (int u = 0; u < img.width(); ++u) a.data.push_back(c(v, u));
  return a;
}

int cmd_augment(const Globals& g, const std::string& frame_id, bool mirror, double rotate_deg, bool photometric,
                bool jitter) {
  if (g.out.empty()) throw UsageError("--out <dir> is required");
  const fs::path dir = require_session(g);
  const ScanSession s = load_session(dir);
  const FrameRecord* f = s.find_frame(frame_id);
  if (!f) throw Error(ErrorCode::kInvalidArgument, "unknown frame '" + frame_id + "'");
  if (f->left.empty() || f->right.empty()) throw Error(ErrorCode::kMissingFile, "frame has no stereo images");
  const auto labels = s.labels.find(frame_id);
  if (labels == s.labels.end()) throw Error(ErrorCode::kEmptyInput, "frame '" + frame_id + "' has no labels");

  BoundingBox box{1e300, 1e300, -1e300, -1e300};
  std::vector<Uvd> uvd;
  for (std::size_t k = 0; k < labels->second.uvd.size(); ++k) {
    const Uvd& p = labels->second.uvd[k];
    uvd.push_back(p);
    if (!labels->second.in_front[k]) continue;
    box.u_min = std::min(box.u_min, p.u);
    box.v_min = std::min(box.v_min, p.v);
    box.u_max = std::max(box.u_max, p.u);
    box.v_max = std::max(box.v_max, p.v);
  }
  if (box.u_min > box.u_max) throw Error(ErrorCode::kObjectOutsideFrame, "no keypoint in front of the camera");

  Rng rng(g.seed);
  StereoCrop crop = crop_stereo(read_png(dir / f->left), read_png(dir / f->right), box, uvd,
                                jitter ? &rng : nullptr);
  if (mirror) crop = mirror_stereo(crop);
  if (rotate_deg != 0) crop = rotate_about_x(crop, s.rig.left, rotate_deg);

  fs::create_directories(g.out);
  const fs::path out = g.out;
  write_png(out / "left.png", crop.left);
  write_png(out / "right.png", crop.right);
  if (photometric) {
    PhotometricParams params;
    if (auto cfg = load_config(g)) params = photometric_from(JsonReader(*cfg, ""));
    write_array(out / "left.kpla", image_array(photometric_augment(crop.left, params, rng.next())));
    write_array(out / "right.kpla", image_array(photometric_augment(crop.right, params, rng.next())));
  }
  Json lj = Json::array();
  for (const Uvd& p : crop.labels) lj.push_back(to_json(p));
  write_json_file(out / "labels.json", {{"schema_version", kSchemaVersion},
                                        {"frame_id", frame_id},
                                        {"u0", crop.u0},
                                        {"v0", crop.v0},
                                        {"right_offset", crop.right_offset},
                                        {"mirrored", mirror},
                                        {"rotation_deg", canonical(rotate_deg)},
                                        {"uvd", lj}});
  std::cout << "crop at (" << crop.u0 << ", " << crop.v0 << ") written to " << g.out << "\n";
  return kExitOk;
}

// --- simulate-error ----------------------------------------------------------

int cmd_simulate(const Globals& g, std::optional<int> trials, const std::string& samples) {
  CaptureGeometry geom;
  NoiseModel noise;
  SimulationConfig sim;
  if (auto cfg = load_config(g)) {
    const JsonReader r(*cfg, "");
    if (r.has("geometry")) geom = geometry_from(r["geometry"]);
    if (r.has("noise")) noise = noise_from(r["noise"]);
    if (r.has("simulation")) sim = simulation_from(r["simulation"]);
  }
  if (g.seed_set) sim.seed = g.seed;
  if (trials) sim.n_trials = *trials;
  const SimulationResult res = simulate_labeling_error(geom, noise, sim);
  const Json summary{{"schema_version", kSchemaVersion},
                     {"rmse_mm", canonical(1000 * res.rmse_m)},
                     {"sensor_ratio", canonical(compare_to_sensor(res.rmse_m))},
                     {"n_trials", sim.n_trials},
                     {"seed", sim.seed},
                     {"noise", to_json(noise)},
                     {"n_views_min", sim.n_views_min},
                     {"n_views_max", sim.n_views_max}};
  if (!samples.empty()) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < res.errors_m.size(); ++i)
      rows.push_back({{"trial", i}, {"error_mm", canonical(1000 * res.errors_m[i])}, {"views", res.views_used[i]}});
    write_json_file(samples, {{"schema_version", kSchemaVersion}, {"trials", rows}});
  }
  if (g.out.empty())
    std::printf("rmse %.3f mm over %d trials (%.2fx better than a %.0f mm depth sensor)\n", 1000 * res.rmse_m,
                sim.n_trials, compare_to_sensor(res.rmse_m), 1000 * kDepthSensorErrorM);
  else
    write_json_file(g.out, summary);
  return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct SampleFile {
  std::vector<std::pair<std::string, std::vector<Uvd>>> samples;
  std::optional<Rig> rig;
  SymmetrySpec sym;
};

// {"samples": [{"id": ..., "uvd": [[u, v, d], ...]}], "rig"?, "symmetry"?}
SampleFile read_samples(const fs::path& file) {
  const Json j = parse_json_file(file);
  SampleFile out;
  try {
    const JsonReader r(j, "");
    if (r.has("rig")) out.rig = rig_from(r["rig"]);
    if (r.has("symmetry")) out.sym = symmetry_from(r["symmetry"]);
    const JsonReader list = r["samples"];
    for (std::size_t i = 0; i < list.size(); ++i) {
      std::vector<Uvd> uvd;
      const JsonReader pts = list[i]["uvd"];
      for (std::size_t k = 0; k < pts.size(); ++k) uvd.push_back(uvd_from(pts[k]));
      out.samples.emplace_back(list[i]["id"].string(), std::move(uvd));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchema) throw Error(e.code(), file.filename().string() + ": " + e.what());
    throw;
  }
  return out;
}

int cmd_eval(const Globals& g, const std::string& pred_file, const std::string& label_file, int curve_points) {
  const SampleFile pred = read_samples(pred_file);
  const SampleFile gt = read_samples(label_file);
  std::optional<Rig> rig = gt.rig;
  SymmetrySpec sym = gt.sym;
  if (!g.session.empty()) {
    const ScanSession s = load_session(g.session, false);
    if (!rig) rig = s.rig;
    if (sym.permutations.empty()) sym = s.sym;
  }
  if (!rig) throw Error(ErrorCode::kSchema, "no rig: add one to the label file or pass --session");

  std::map<std::string, const std::vector<Uvd>*> by_id;
  for (const auto& [id, uvd] : gt.samples) by_id[id] = &uvd;
  std::vector<EvalRecord> records;
  for (const auto& [id, uvd] : pred.samples) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kSchema, "prediction '" + id + "' has no label");
    records.push_back(sample_errors(uvd, *it->second, *rig, sym));
  }
  const MetricsSummary m = summarize(records);
  Json rec = to_json(m);
  rec["schema_version"] = kSchemaVersion;
  rec["config_hash"] = sha256_hex(Json{{"rig", to_json(*rig)}, {"symmetry", to_json(sym)}}.dump());
  if (curve_points > 0) {
    Json curve = Json::array();
    for (const auto& [t, pct] : precision_curve(pooled_errors(records), kDefaultAucRangeM, curve_points))
      curve.push_back({canonical(t), canonical(pct)});
    rec["curve"] = curve;
  }
  emit(g, rec);
  return kExitOk;
}

// --- fit-pose ----------------------------------------------------------------

int cmd_fit_pose(const Globals& g, const std::string& model_file, const std::string& pred_file) {
  const Json mj = parse_json_file(model_file);
  KeypointModel model;
  {
    const JsonReader r(mj, "");
    const JsonReader pts = r["points"];
    for (std::size_t i = 0; i < pts.size(); ++i) model.points.push_back(pts[i].vec3());
    if (r.has("symmetry")) model.sym = symmetry_from(r["symmetry"]);
  }
  const Json pj = parse_json_file(pred_file);
  const JsonReader r(pj, "");
  std::optional<Rig> rig;
  if (r.has("rig")) rig = rig_from(r["rig"]);
  else if (!g.session.empty()) rig = load_session(g.session, false).rig;

  Json poses = Json::array();
  const JsonReader list = r["samples"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::vector<Vec3> xyz;
    if (list[i].has("xyz")) {
      const JsonReader pts = list[i]["xyz"];
      for (std::size_t k = 0; k < pts.size(); ++k) xyz.push_back(pts[k].vec3());
    } else {
      if (!rig) list[i].fail("uvd predictions need a rig (in the file or via --session)");
      const JsonReader pts = list[i]["uvd"];
      for (std::size_t k = 0; k < pts.size(); ++k) {
        Uvd p = uvd_from(pts[k]);
        p.d = std::max(p.d, kMinPredictedDisparity);
        xyz.push_back(uvd_to_xyz(*rig, p));
      }
    }
    const ProcrustesResult fit = procrustes_align(model, xyz);
    Json perm = Json::array();
    for (int p : fit.permutation) perm.push_back(p + 1);
    Json rec = to_json(fit.transform);
    rec["id"] = list[i]["id"].string();
    rec["rmsd"] = canonical(fit.rmsd);
    rec["permutation"] = perm;
    rec["degenerate"] = fit.degenerate;
    poses.push_back(rec);
  }
  emit(g, {{"schema_version", kSchemaVersion}, {"poses", poses}});
  return kExitOk;
}

// --- serve -------------------------------------------------------------------

int cmd_serve(const Globals& g, const std::string& host, int port, const std::string& static_dir) {
  const fs::path root = require_session(g);
  SessionService service(root, static_dir);
  const int bound = service.bind(host, port);
  std::cout << "serving " << root << " on http://" << host << ":" << bound << "/\n" << std::flush;
  service.listen();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kplab: stereo keypoint labeling toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--session", g.session, "session directory (session root for serve)");
  app.add_option("--config", g.config, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed");
  app.add_option("--out", g.out, "output file or directory");

  int k = kDefaultKeyframeCount;
  std::optional<double> threshold;
  std::string input, frame, model, pred, labels, samples, host = "127.0.0.1", static_dir;
  std::optional<int> trials;
  int curve = 0, port = 8080;
  bool mirror = false, photometric = false, jitter = false, images = false;
  double rotate = 0;

  auto* poses = app.add_subcommand("poses", "estimate board poses from tag detections");
  auto* select = app.add_subcommand("select", "pick keyframes for annotation by farthest-point sampling");
  select->add_option("-k", k, "number of keyframes")->check(CLI::PositiveNumber);
  auto* tri = app.add_subcommand("triangulate", "triangulate annotated keypoints");
  auto* prop = app.add_subcommand("propagate", "project keypoints into every posed frame");
  auto* qa = app.add_subcommand("qa", "accept or reject the session by keypoint rmse");
  qa->add_option("--threshold", threshold, "rejection threshold in px");
  auto* pipe = app.add_subcommand("pipeline", "poses, select, triangulate, propagate, qa");
  pipe->add_option("-k", k, "number of keyframes")->check(CLI::PositiveNumber);
  auto* synth = app.add_subcommand("make-synthetic", "generate a synthetic session with known ground truth");
  synth->add_flag("--images", images, "also render PNG images");
  auto* warp = app.add_subcommand("warp-depth", "reproject a depth image into another camera");
  warp->add_option("input", input, "16-bit depth PNG")->required();
  auto* aug = app.add_subcommand("augment", "cut and augment a stereo training crop");
  aug->add_option("--frame", frame, "frame id")->required();
  aug->add_flag("--mirror", mirror, "swap and flip the pair");
  aug->add_option("--rotate", rotate, "rotation about the baseline in degrees")->check(CLI::Range(-5.0, 5.0));
  aug->add_flag("--photometric", photometric, "write photometrically augmented float arrays");
  aug->add_flag("--jitter", jitter, "jitter the crop center");
  auto* sim = app.add_subcommand("simulate-error", "Monte Carlo labeling-error simulation");
  sim->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
  sim->add_option("--samples", samples, "per-trial sample output file");
  auto* ev = app.add_subcommand("eval", "score predictions against labels");
  ev->add_option("--pred", pred, "prediction sample file")->required();
  ev->add_option("--labels", labels, "label sample file")->required();
  ev->add_option("--curve", curve, "number of precision-curve intervals (0 = none)");
  auto* fit = app.add_subcommand("fit-pose", "recover object poses from predicted keypoints");
  fit->add_option("--model", model, "model keypoint file")->required();
  fit->add_option("--pred", pred, "prediction sample file")->required();
  auto* serve = app.add_subcommand("serve", "run the annotation session service");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 = any free port)");
  serve->add_option("--static", static_dir, "annotator UI bundle to host at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*poses) return cmd_poses(g);
    if (*select) return cmd_select(g, k);
    if (*tri) return cmd_triangulate(g);
    if (*prop) return cmd_propagate(g);
    if (*qa) return cmd_qa(g, threshold);
    if (*pipe) return cmd_pipeline(g, k);
    if (*synth) return cmd_make_synthetic(g, images);
    if (*warp) return cmd_warp_depth(g, input);
    if (*aug) return cmd_augment(g, frame, mirror, rotate, photometric, jitter);
    if (*sim) return cmd_simulate(g, trials, samples);
    if (*ev) return cmd_eval(g, pred, labels, curve);
    if (*fit) return cmd_fit_pose(g, model, pred);
    if (*serve) return cmd_serve(g, host, port, static_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
