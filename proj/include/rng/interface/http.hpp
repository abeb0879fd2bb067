// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "rng/common/error.hpp"
#include "rng/interface/service.hpp"

namespace rng::service {

struct HttpOptions {
  /// Request bodies above this size get 413.
  std::size_t max_body_bytes = 32u << 20;
  /// Optional directory served at "/" (the scanner UI bundle).
  std::string static_dir;
  int threads = 8;
};

/// JSON API over an InferenceService:
///
///   GET    /health
///   POST   /sessions                  {images: [base64 PNG]}       -> 201
///   GET    /sessions/{id}
///   GET    /sessions/{id}/sources.rngt
///   POST   /sessions/{id}/render      {pose}
///   POST   /sessions/{id}/accumulate  {pose, conf_quantile}
///   GET    /sessions/{id}/pointcloud  -> binary PLY
///   DELETE /sessions/{id}             -> 204
///
/// Errors are {"error": {"code", "message"}} with status 400, 404, 413 or 422.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<InferenceService> service, HttpOptions options = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds without serving. Port 0 picks a free port; returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// bind() and listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status for a library error code.
int http_status(ErrorCode code);

}  // namespace rng::service
