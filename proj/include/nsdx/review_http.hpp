#pragma once

#include <memory>
#include <string>

#include "nsdx/review_service.hpp"

namespace nsdx {

// JSON over HTTP:
//   GET  /cases               case summaries
//   GET  /cases/{id}          stage-gated case view
//   POST /cases/{id}/stage    stage payload
//   GET  /report              feedback tables
// Errors are {"error": message}; 409 responses also carry "stage".
class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& service);
  ~ReviewServer();

  /// Port 0 picks a free port. Returns the bound port; throws StartupError.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nsdx
