#include "kplab/service.hpp"

#include <map>
#include <mutex>
#include <regex>
#include <set>

#include "kplab/formats.hpp"
#include "kplab/session.hpp"

// After Eigen: resolv.h (pulled in here) defines a `_res` macro.
#include <httplib.h>

namespace kplab {

namespace {

struct HttpError {
  int status;
  std::string message;
};

[[noreturn]] void fail(int status, const std::string& message) { throw HttpError{status, message}; }

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return 404;
    case ErrorCode::kLocked: return 409;
    case ErrorCode::kTooFewViews:
    case ErrorCode::kDegenerateRays:
    case ErrorCode::kTooFewTags:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kInvalidArgument: return 422;
    default: return 500;
  }
}

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

bool valid_name(const std::string& s) {
  static const std::regex kName(R"([A-Za-z0-9_.\-]+)");
  return !s.empty() && s != "." && s != ".." && std::regex_match(s, kName);
}

Json keypoints_json(const ScanSession& s) {
  Json out = Json::array();
  for (const Keypoint3D& kp : s.keypoints) out.push_back(to_json(kp));
  return out;
}

Json qa_json(const ScanSession& s) {
  if (!s.qa) return nullptr;
  return {{"accept", s.qa->accept},
          {"worst_keypoint", s.qa->worst_keypoint},
          {"worst_rmse", canonical(s.qa->worst_rmse)},
          {"threshold_px", canonical(s.qa_threshold_px)}};
}

}  // namespace

struct SessionService::Impl {
  fs::path root;
  fs::path static_dir;
  httplib::Server server;
  std::mutex registry_mutex;
  std::map<std::string, std::unique_ptr<std::mutex>> writers;

  std::mutex& writer(const std::string& id) {
    std::lock_guard lock(registry_mutex);
    auto& m = writers[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  fs::path session_dir(const std::string& id) const {
    if (!valid_name(id) || !fs::exists(root / id / "session.json")) fail(404, "unknown session '" + id + "'");
    return root / id;
  }

  ScanSession load(const std::string& id) const { return load_session(session_dir(id), false); }

  // Wraps a handler with error translation.
  template <class F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_json(res, {{"error", e.message}}, e.status);
      } catch (const Error& e) {
        send_json(res, {{"error", e.what()}, {"kind", to_string(e.code())}}, status_for(e.code()));
      } catch (const std::exception& e) {
        send_json(res, {{"error", e.what()}}, 500);
      }
    };
  }

  void routes() {
    server.Get("/sessions", wrap([this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      std::vector<fs::path> dirs;
      if (fs::is_directory(root))
        for (const auto& entry : fs::directory_iterator(root))
          if (entry.is_directory() && fs::exists(entry.path() / "session.json")) dirs.push_back(entry.path());
      std::sort(dirs.begin(), dirs.end());
      for (const fs::path& d : dirs) {
        const std::string id = d.filename().string();
        try {
          const ScanSession s = load_session(d, false);
          list.push_back({{"id", id},
                          {"session_id", s.session_id},
                          {"num_frames", s.frames.size()},
                          {"num_keypoints", s.num_keypoints},
                          {"qa", qa_json(s)}});
        } catch (const Error& e) {
          list.push_back({{"id", id}, {"error", e.what()}});
        }
      }
      send_json(res, {{"sessions", list}});
    }));

    server.Get(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const ScanSession s = load(req.matches[1]);
      Json frames = Json::array();
      for (const FrameRecord& f : s.frames) {
        Json jf{{"id", f.id}, {"has_pose", s.poses.count(f.id) > 0}};
        jf["images"] = Json::array();
        for (const auto& [kind, ref] : {std::pair{"left", f.left}, {"right", f.right}, {"depth", f.depth}})
          if (!ref.empty()) jf["images"].push_back(kind);
        frames.push_back(jf);
      }
      send_json(res, {{"id", req.matches[1].str()},
                      {"session_id", s.session_id},
                      {"num_keypoints", s.num_keypoints},
                      {"rig", to_json(s.rig)},
                      {"symmetry", to_json(s.sym)},
                      {"frames", frames},
                      {"selection", s.selection},
                      {"annotation_revision", s.annotation_revision},
                      {"qa", qa_json(s)}});
    }));

    server.Get(R"(/sessions/([^/]+)/frames/([^/]+)/(left|right|depth)\.png)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const fs::path dir = session_dir(req.matches[1]);
                 const ScanSession s = load_session(dir, false);
                 const FrameRecord* f = s.find_frame(req.matches[2]);
                 if (!f) fail(404, "unknown frame '" + req.matches[2].str() + "'");
                 const std::string kind = req.matches[3];
                 const std::string& ref = kind == "left" ? f->left : kind == "right" ? f->right : f->depth;
                 if (ref.empty()) fail(404, "frame '" + f->id + "' has no " + kind + " image");
                 res.set_content(read_file(dir / ref), "image/png");
               }));

    server.Get(R"(/sessions/([^/]+)/select)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      ScanSession s = load(req.matches[1]);
      int k = kDefaultKeyframeCount;
      if (req.has_param("k")) {
        try {
          std::size_t used = 0;
          const std::string v = req.get_param_value("k");
          k = std::stoi(v, &used);
          if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
          fail(422, "k must be an integer");
        }
      }
      if (k < 1) fail(422, "k must be at least 1");
      if (s.poses.empty()) stage_poses(s);
      stage_select(s, k);
      Json indices = Json::array();
      for (const std::string& id : s.selection) indices.push_back(s.frame_index(id));
      send_json(res, {{"k", k}, {"frames", s.selection}, {"indices", indices}});
    }));

    server.Get(R"(/sessions/([^/]+)/annotations)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const ScanSession s = load(req.matches[1]);
                 Json list = Json::array();
                 for (const Annotation2D& a : s.annotations) list.push_back(to_json(a));
                 send_json(res, {{"revision", s.annotation_revision}, {"annotations", list}});
               }));

    server.Put(R"(/sessions/([^/]+)/annotations)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const fs::path dir = session_dir(id);
                 Json body;
                 try {
                   body = Json::parse(req.body);
                 } catch (const Json::parse_error& e) {
                   fail(422, std::string("invalid JSON: ") + e.what());
                 }
                 std::lock_guard guard(writer(id));
                 SessionLock lock(dir);
                 ScanSession s = load_session(dir, false);
                 std::vector<Annotation2D> list;
                 try {
                   const JsonReader r(body, "");
                   if (r.has("revision") && r["revision"].integer() != s.annotation_revision)
                     fail(409, "annotation revision " + std::to_string(r["revision"].integer()) +
                                   " is stale; current is " + std::to_string(s.annotation_revision));
                   const JsonReader items = r["annotations"];
                   std::set<std::pair<std::string, int>> seen;
                   for (std::size_t i = 0; i < items.size(); ++i) {
                     const Annotation2D a = annotation_from(items[i]);
                     if (!s.find_frame(a.frame_id)) items[i]["frame_id"].fail("unknown frame '" + a.frame_id + "'");
                     if (a.keypoint_id < 1 || a.keypoint_id > s.num_keypoints)
                       items[i]["keypoint_id"].fail("outside [1, " + std::to_string(s.num_keypoints) + "]");
                     if (!seen.emplace(a.frame_id, a.keypoint_id).second)
                       items[i].fail("duplicate annotation for this frame and keypoint");
                     list.push_back(a);
                   }
                 } catch (const Error& e) {
                   if (e.code() == ErrorCode::kSchema) fail(422, e.what());
                   throw;
                 }
                 s.annotations = std::move(list);
                 ++s.annotation_revision;
                 save_session(s, dir);
                 send_json(res, {{"revision", s.annotation_revision}, {"count", s.annotations.size()}});
               }));

    server.Post(R"(/sessions/([^/]+)/triangulate)",
                wrap([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  const fs::path dir = session_dir(id);
                  std::lock_guard guard(writer(id));
                  SessionLock lock(dir);
                  ScanSession s = load_session(dir, false);
                  if (s.poses.empty()) stage_poses(s);
                  stage_triangulate(s);
                  stage_propagate(s);
                  stage_qa(s);
                  save_session(s, dir);
                  Json residuals = Json::object();
                  for (const auto& [frame, per_kp] : annotation_residuals(s)) {
                    Json jf = Json::object();
                    for (const auto& [kp, r] : per_kp) jf[std::to_string(kp)] = canonical(r);
                    residuals[frame] = jf;
                  }
                  send_json(res, {{"keypoints", keypoints_json(s)}, {"residuals", residuals}, {"qa", qa_json(s)}});
                }));

    server.Get(R"(/sessions/([^/]+)/labels)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const fs::path dir = session_dir(req.matches[1]);
      if (!fs::exists(dir / "labels.json")) fail(404, "no labels yet; run triangulation first");
      res.set_content(read_file(dir / "labels.json"), "application/json");
    }));

    server.Get(R"(/sessions/([^/]+)/qa)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const fs::path dir = session_dir(req.matches[1]);
      if (!fs::exists(dir / "qa.json")) fail(404, "no qa verdict yet; run triangulation first");
      res.set_content(read_file(dir / "qa.json"), "application/json");
    }));

    if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
  }
};

SessionService::SessionService(fs::path root, fs::path static_dir) : impl_(std::make_unique<Impl>()) {
  impl_->root = std::move(root);
  impl_->static_dir = std::move(static_dir);
  impl_->routes();
}

SessionService::~SessionService() { stop(); }

int SessionService::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void SessionService::listen() { impl_->server.listen_after_bind(); }

void SessionService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool SessionService::running() const { return impl_->server.is_running(); }

}  // namespace kplab
