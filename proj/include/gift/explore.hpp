// HTTP exploration service over completed runs.
//
//   GET  /runs                      run summaries
//   GET  /runs/{id}                 report.json
//   GET  /runs/{id}/candidates      ranked candidates
//   GET  /pairs/{id}/gallery        cf-N or iv-N, optional ?run=
//   POST /concepts/evaluate         {"concepts": [...], "session": "...", "run": "..."}
//   GET  /jobs/{id}
//
// Errors carry {"code", "message", "detail"}.
#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "gift/pipeline.hpp"

namespace gift {

class ExploreService {
 public:
  // `root` is either one run directory or a directory of run directories.
  explicit ExploreService(std::filesystem::path root, Services services = {});
  ~ExploreService();
  ExploreService(const ExploreService&) = delete;
  ExploreService& operator=(const ExploreService&) = delete;

  // Number of runs found; throws StageError when there are none.
  std::size_t scan();

  // Binds and returns the port (an ephemeral one when port == 0).
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void serve();
  void stop();

  // Handles one request without a socket: method, path with query, body.
  // Returns (status, body).
  std::pair<int, std::string> handle(const std::string& method, const std::string& target,
                                     const std::string& body = {});

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gift
