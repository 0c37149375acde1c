#pragma once

// HTTP session service backing the annotation UI. Every subdirectory of the
// root holding a session.json is served under /sessions/{dir-name}.
//
//   GET  /sessions
//   GET  /sessions/{id}
//   GET  /sessions/{id}/frames/{fid}/{left,right,depth}.png
//   GET  /sessions/{id}/select?k=6
//   GET  /sessions/{id}/annotations
//   PUT  /sessions/{id}/annotations     {"revision"?: n, "annotations": [...]}
//   POST /sessions/{id}/triangulate
//   GET  /sessions/{id}/labels
//   GET  /sessions/{id}/qa
//
// Writes to one session run one at a time and also take the session's lock
// file, so a concurrent CLI writer yields 409. A PUT carrying a stale
// revision also yields 409.

#include <filesystem>
#include <memory>
#include <string>

namespace kplab {

class SessionService {
 public:
  explicit SessionService(std::filesystem::path root, std::filesystem::path static_dir = {});
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Binds without serving yet; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kplab
