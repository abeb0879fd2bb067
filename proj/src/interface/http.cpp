// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/interface/http.hpp"

#include <thread>

#include <fmt/format.h>

#include "httplib.h"
#include "rng/common/error.hpp"
#include "rng/interface/codec.hpp"

namespace rng::service {

namespace {

using nlohmann::json;

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)) {}
  int status;
  std::string code;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw HttpError(400, "invalid_argument", "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError(400, "invalid_argument", std::string("malformed JSON: ") + e.what());
  }
}

/// Wraps a handler so library errors become JSON error responses.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const HttpError& e) {
      send_error(res, e.status, e.code, e.what());
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

geometry::CameraPose request_pose(const InferenceService& service, const json& body) {
  if (!body.contains("pose")) throw HttpError(400, "invalid_argument", "missing pose");
  const auto [r, c] = pose_from_json(body["pose"]);
  try {
    return service.make_pose(r, c);
  } catch (const Error& e) {
    throw HttpError(422, std::string(to_string(e.code())), e.what());
  }
}

json session_json(const Session& s) {
  json poses = json::array();
  for (const auto& p : s.poses) poses.push_back(pose_to_json(p));
  std::shared_lock lock(s.cloud_mutex);
  return {{"id", s.id},
          {"poses", poses},
          {"source_pointmaps", fmt::format("/sessions/{}/sources.rngt", s.id)},
          {"cache_hash", s.cache_hash},
          {"total_points", s.cloud.size()},
          {"created_unix_ms", s.created_unix_ms}};
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kInvalidCamera:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kNotApplicable:
      return 422;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kShapeMismatch:
      return 400;
    default:
      return 500;
  }
}

struct HttpServer::Impl {
  std::shared_ptr<InferenceService> service;
  HttpOptions options;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(std::shared_ptr<InferenceService> service, HttpOptions options)
    : impl_(std::make_unique<Impl>()) {
  require(service != nullptr, ErrorCode::kInvalidArgument, "server needs a service");
  impl_->service = std::move(service);
  impl_->options = std::move(options);
  auto& srv = impl_->server;
  auto& svc = *impl_->service;
  const int threads = impl_->options.threads;
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  srv.set_payload_max_length(impl_->options.max_body_bytes);
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const int status = res.status;
    const char* code = status == 413 ? "payload_too_large" : status == 404 ? "not_found" : "http_error";
    send_error(res, status, code, httplib::status_message(status));
  });
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200,
                      {{"status", "ok"},
                       {"model_fingerprint", svc.model().fingerprint()},
                       {"model_config", svc.model().config().to_json()},
                       {"sessions", svc.size()},
                       {"max_sessions", svc.options().max_sessions}});
          }));

  srv.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             if (!body.contains("images") || !body["images"].is_array()) {
               throw HttpError(400, "invalid_argument", "images must be an array of base64 PNGs");
             }
             std::vector<ImageF> images;
             for (const auto& item : body["images"]) {
               if (!item.is_string()) throw HttpError(400, "invalid_argument", "images must be strings");
               images.push_back(io::decode_png(io::base64_decode(item.get<std::string>())));
             }
             const auto s = svc.create_session(images);
             send_json(res, 201, session_json(*s));
           }));

  srv.Get(R"(/sessions/([0-9a-f]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, session_json(*svc.get(req.matches[1])));
          }));

  srv.Get(R"(/sessions/([0-9a-f]+)/sources\.rngt)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const auto s = svc.get(req.matches[1]);
            res.set_content(s->source_maps.to_bytes(), "application/octet-stream");
          }));

  srv.Post(R"(/sessions/([0-9a-f]+)/render)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             svc.get(id);
             const auto body = parse_body(req);
             const auto pose = request_pose(svc, body);
             const auto r = svc.render(id, pose);
             send_json(res, 200,
                       {{"pose", pose_to_json(r.pose)},
                        {"rgb", io::base64_encode(io::encode_png(r.maps.rgb))},
                        {"maps", io::base64_encode(maps_container(r.maps, r.depth).to_bytes())}});
           }));

  srv.Post(R"(/sessions/([0-9a-f]+)/accumulate)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             svc.get(id);
             const auto body = parse_body(req);
             const auto pose = request_pose(svc, body);
             const double q = body.value("conf_quantile", 0.2);
             if (q < 0.0 || q > 1.0) throw HttpError(400, "invalid_argument", "conf_quantile must lie in [0, 1]");
             const auto r = svc.accumulate(id, pose, q);
             send_json(res, 200, {{"points_added", r.points_added}, {"total_points", r.total_points}});
           }));

  srv.Get(R"(/sessions/([0-9a-f]+)/pointcloud)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const auto cloud = svc.pointcloud(req.matches[1]);
            res.set_header("X-Total-Points", std::to_string(cloud.size()));
            res.set_content(geometry::to_ply_bytes(cloud), "application/octet-stream");
          }));

  srv.Delete(R"(/sessions/([0-9a-f]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               svc.remove(req.matches[1]);
               res.status = 204;
             }));

  if (!impl_->options.static_dir.empty()) {
    require(srv.set_mount_point("/", impl_->options.static_dir), ErrorCode::kIo,
            "static directory not found: " + impl_->options.static_dir);
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  require(bound > 0, ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace rng::service
