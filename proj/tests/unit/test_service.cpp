#include <doctest.h>

#include <atomic>
#include <cstring>
#include <random>
#include <thread>

#include "rng/common/error.hpp"
#include "rng/interface/codec.hpp"
#include "rng/interface/http.hpp"
#include "rng/interface/rngt.hpp"
#include "rng/interface/service.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include "httplib.h"

using namespace rng;
using namespace rng::service;
using nlohmann::json;

namespace {

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.layers = 1;
  c.dim = 16;
  c.heads = 2;
  c.patch = 4;
  c.registers = 1;
  c.resolution = 16;
  c.mlp_ratio = 2;
  c.camera_hidden = 16;
  c.head_width = 8;
  c.head_channels = {8, 8};
  return c;
}

std::shared_ptr<const model::RnG<float>> tiny_model() {
  static const auto m = std::make_shared<const model::RnG<float>>(model::ModelWeights<float>::initialize(tiny_config()));
  return m;
}

std::vector<ImageF> source_images(std::uint64_t seed = 1'000'001) {
  evaluation::EvalConfig ec;
  const auto s = evaluation::make_eval_scene(seed, 16, ec);
  std::vector<ImageF> out;
  for (const auto& v : s.sources) out.push_back(v.rgb);
  return out;
}

/// Images quantized to 8 bits so they survive a PNG round trip unchanged.
std::vector<ImageF> quantized(std::vector<ImageF> images) {
  for (auto& im : images) {
    for (auto& v : im.data) v = std::round(v * 255.0f) / 255.0f;
  }
  return images;
}

geometry::CameraPose query_pose(const InferenceService& svc, int i) {
  return evaluation::sphere_poses(8, 1.1, svc.model().config().resolution)[static_cast<std::size_t>(i)];
}

}  // namespace

TEST_CASE("base64 matches known vectors and rejects garbage") {
  CHECK(io::base64_encode("") == "");
  CHECK(io::base64_encode("f") == "Zg==");
  CHECK(io::base64_encode("fo") == "Zm8=");
  CHECK(io::base64_encode("foobar") == "Zm9vYmFy");
  CHECK(io::base64_decode("Zg==") == "f");
  CHECK(io::base64_decode("Zm8=") == "fo");
  CHECK(io::base64_decode("Zm9vYmFy") == "foobar");
  std::string bytes;
  for (int i = 0; i < 256; ++i) bytes.push_back(static_cast<char>(i));
  CHECK(io::base64_decode(io::base64_encode(bytes)) == bytes);
  CHECK_THROWS_AS(io::base64_decode("abc"), Error);
  CHECK_THROWS_AS(io::base64_decode("ab!d"), Error);
}

TEST_CASE("PNG round trip of 8-bit images is exact") {
  std::mt19937_64 rng(3);
  ImageF im(7, 9, 3);
  for (auto& v : im.data) v = static_cast<float>(rng() % 256) / 255.0f;
  const auto back = io::decode_png(io::encode_png(im));
  CHECK(back.same_shape(im));
  CHECK(back.data == im.data);

  ImageF gray(4, 5, 1, 0.2f);
  const auto g = io::decode_png(io::encode_png(gray));
  CHECK(g.channels == 3);
  CHECK(g.at(3, 4, 2) == doctest::Approx(51.0 / 255.0));
  CHECK_THROWS_AS(io::decode_png("not a png"), Error);
}

TEST_CASE("RNGT container layout and byte-identical round trip") {
  io::RngtContainer c;
  c.add("a", {2, 3}, {1, 2, 3, 4, 5, 6});
  c.add("scalar", {}, {7.5f});
  c.metadata()["kind"] = "test";
  const auto bytes = c.to_bytes();
  CHECK(bytes.substr(0, 4) == "RNGT");
  std::uint32_t version = 0, count = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 4);
  CHECK(version == 1);
  CHECK(count == 2);
  const auto back = io::RngtContainer::from_bytes(bytes);
  CHECK(back.to_bytes() == bytes);
  CHECK(back.get("a").data[4] == 5.0f);
  CHECK(back.metadata()["kind"] == "test");
  try {
    io::RngtContainer::from_bytes(bytes.substr(0, bytes.size() - 3));
    FAIL("truncated container accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCorruptFile);
  }
  CHECK_THROWS_AS(c.add("a", {1}, {0.0f}), Error);
}

TEST_CASE("pose wire format") {
  const auto svc = InferenceService(tiny_model());
  const auto p = query_pose(svc, 2);
  const auto j = pose_to_json(p);
  CHECK(j["rotation"].size() == 9);
  CHECK(j["rotation"][1] == p.rotation(0, 1));
  const auto [r, c] = pose_from_json(json::parse(j.dump()));
  CHECK(r == p.rotation);
  CHECK(c == p.center);
  CHECK_THROWS_AS(pose_from_json(json{{"rotation", {1, 0, 0}}, {"center", {0, 0, 0}}}), Error);
  Eigen::Matrix3d skew = Eigen::Matrix3d::Identity();
  skew(0, 1) = 0.1;
  try {
    svc.make_pose(skew, Eigen::Vector3d::Zero());
    FAIL("non-orthonormal rotation accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidCamera);
  }
}

TEST_CASE("sessions: validation, determinism and deletion") {
  InferenceService svc(tiny_model());
  auto images = source_images();
  const auto a = svc.create_session(images);
  const auto b = svc.create_session(images);
  CHECK(a->id != b->id);
  CHECK(a->id.size() == 32);
  REQUIRE(a->poses.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a->poses[i].rotation == b->poses[i].rotation);
    CHECK(a->poses[i].center == b->poses[i].center);
    CHECK((a->poses[i].rotation.transpose() * a->poses[i].rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  }
  CHECK(a->cache_hash == b->cache_hash);
  CHECK(a->source_maps.contains("pointmap.3"));
  CHECK(svc.size() == 2);

  images.pop_back();
  CHECK_THROWS_AS(svc.create_session(images), Error);
  images.push_back(ImageF(8, 8, 3));
  CHECK_THROWS_AS(svc.create_session(images), Error);

  svc.remove(a->id);
  try {
    svc.render(a->id, query_pose(svc, 0));
    FAIL("render on deleted session");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotFound);
  }
  CHECK_THROWS_AS(svc.remove(a->id), Error);
}

TEST_CASE("sessions: LRU eviction") {
  ServiceOptions opt;
  opt.max_sessions = 2;
  InferenceService svc(tiny_model(), opt);
  const auto images = source_images();
  const auto a = svc.create_session(images);
  const auto b = svc.create_session(images);
  svc.get(a->id);  // a becomes most recent
  const auto c = svc.create_session(images);
  CHECK(svc.size() == 2);
  CHECK_NOTHROW(svc.get(a->id));
  CHECK_NOTHROW(svc.get(c->id));
  CHECK_THROWS_AS(svc.get(b->id), Error);
}

TEST_CASE("session cache hash is unchanged across 100 renders") {
  InferenceService svc(tiny_model());
  const auto s = svc.create_session(source_images());
  const auto before = s->cache_hash;
  const auto first = svc.render(s->id, query_pose(svc, 1));
  for (int i = 0; i < 100; ++i) svc.render(s->id, query_pose(svc, i % 8));
  CHECK(s->cache.content_hash() == before);
  const auto again = svc.render(s->id, query_pose(svc, 1));
  CHECK(again.maps.rgb.data == first.maps.rgb.data);
  CHECK(again.maps.confidence.data == first.maps.confidence.data);
}

TEST_CASE("concurrent renders on one session equal sequential results") {
  InferenceService svc(tiny_model());
  const auto s = svc.create_session(source_images());
  std::vector<RenderResult> sequential;
  for (int i = 0; i < 8; ++i) sequential.push_back(svc.render(s->id, query_pose(svc, i)));
  std::vector<RenderResult> parallel(8);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = t; i < 8; i += 4) parallel[static_cast<std::size_t>(i)] = svc.render(s->id, query_pose(svc, i));
    });
  }
  for (auto& th : threads) th.join();
  for (int i = 0; i < 8; ++i) {
    CHECK(parallel[static_cast<std::size_t>(i)].maps.rgb.data == sequential[static_cast<std::size_t>(i)].maps.rgb.data);
    CHECK(parallel[static_cast<std::size_t>(i)].maps.pointmap.data ==
          sequential[static_cast<std::size_t>(i)].maps.pointmap.data);
  }
}

TEST_CASE("accumulate is append-only and matches the exported cloud") {
  InferenceService svc(tiny_model());
  const auto s = svc.create_session(source_images());
  const auto r1 = svc.accumulate(s->id, query_pose(svc, 0), 0.2);
  CHECK(r1.points_added > 0);
  CHECK(r1.total_points == r1.points_added);
  const auto r2 = svc.accumulate(s->id, query_pose(svc, 3), 0.2);
  CHECK(r2.total_points == r1.total_points + r2.points_added);
  try {
    svc.accumulate(s->id, query_pose(svc, 3), 1.0);
    FAIL("empty addition accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyInput);
  }
  const auto cloud = svc.pointcloud(s->id);
  CHECK(cloud.size() == r2.total_points);
  const auto bytes = geometry::to_ply_bytes(cloud);
  const auto parsed = geometry::from_ply_bytes(bytes);
  CHECK(parsed.points == cloud.points);
  CHECK(parsed.confidences == cloud.confidences);
  CHECK(geometry::to_ply_bytes(parsed) == bytes);

  // Concurrent accumulations serialize without losing points.
  std::vector<std::thread> threads;
  std::atomic<std::size_t> added{0};
  for (int t = 0; t < 3; ++t) {
    threads.emplace_back([&, t] { added += svc.accumulate(s->id, query_pose(svc, 4 + t), 0.2).points_added; });
  }
  for (auto& th : threads) th.join();
  CHECK(svc.pointcloud(s->id).size() == r2.total_points + added.load());
}

TEST_CASE("HTTP API end to end") {
  auto svc = std::make_shared<InferenceService>(tiny_model());
  HttpServer server(svc);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(30, 0);

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  const auto images = quantized(source_images());
  json body{{"images", json::array()}};
  for (const auto& im : images) body["images"].push_back(io::base64_encode(io::encode_png(im)));
  auto created = cli.Post("/sessions", body.dump(), "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const auto session = json::parse(created->body);
  const std::string id = session["id"];
  CHECK(session["poses"].size() == 4);
  CHECK(session["source_pointmaps"] == "/sessions/" + id + "/sources.rngt");

  // Same images through the library give the same poses.
  const auto direct = svc->create_session(images);
  CHECK(session["poses"] == json::parse(json(std::vector<json>{pose_to_json(direct->poses[0]), pose_to_json(direct->poses[1]),
                                                               pose_to_json(direct->poses[2]), pose_to_json(direct->poses[3])})
                                            .dump()));

  auto dump = cli.Get("/sessions/" + id + "/sources.rngt");
  REQUIRE(dump);
  CHECK(dump->status == 200);
  CHECK(io::RngtContainer::from_bytes(dump->body).contains("confidence.0"));

  json three{{"images", json::array({body["images"][0], body["images"][1], body["images"][2]})}};
  auto bad = cli.Post("/sessions", three.dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["error"]["code"] == "invalid_argument");
  CHECK(cli.Post("/sessions", "{not json", "application/json")->status == 400);

  const auto pose = query_pose(*svc, 5);
  json req{{"pose", pose_to_json(pose)}};
  auto rendered = cli.Post("/sessions/" + id + "/render", req.dump(), "application/json");
  REQUIRE(rendered);
  REQUIRE(rendered->status == 200);
  const auto rj = json::parse(rendered->body);
  for (int i = 0; i < 9; ++i) CHECK(std::abs(rj["pose"]["rotation"][i].get<double>() - pose.rotation(i / 3, i % 3)) <= 1e-9);
  const auto rgb = io::decode_png(io::base64_decode(rj["rgb"].get<std::string>()));
  CHECK(rgb.height == 16);
  const auto maps = io::RngtContainer::from_bytes(io::base64_decode(rj["maps"].get<std::string>()));
  const auto expected = svc->render(id, pose);
  CHECK(maps.get("pointmap").data == expected.maps.pointmap.data);
  CHECK(maps.get("depth").data == expected.depth.data);

  json skew = req;
  skew["pose"]["rotation"][1] = 0.3;
  auto r422 = cli.Post("/sessions/" + id + "/render", skew.dump(), "application/json");
  REQUIRE(r422);
  CHECK(r422->status == 422);
  CHECK(cli.Post("/sessions/0123abcd/render", req.dump(), "application/json")->status == 404);

  json acc{{"pose", pose_to_json(query_pose(*svc, 1))}, {"conf_quantile", 0.2}};
  auto a1 = cli.Post("/sessions/" + id + "/accumulate", acc.dump(), "application/json");
  acc["pose"] = pose_to_json(query_pose(*svc, 6));
  auto a2 = cli.Post("/sessions/" + id + "/accumulate", acc.dump(), "application/json");
  REQUIRE(a2);
  REQUIRE(a2->status == 200);
  const auto total = json::parse(a2->body)["total_points"].get<std::size_t>();
  CHECK(total > json::parse(a1->body)["total_points"].get<std::size_t>());
  acc["conf_quantile"] = 1.0;
  CHECK(cli.Post("/sessions/" + id + "/accumulate", acc.dump(), "application/json")->status == 422);

  auto ply = cli.Get("/sessions/" + id + "/pointcloud");
  REQUIRE(ply);
  CHECK(ply->status == 200);
  const auto cloud = geometry::from_ply_bytes(ply->body);
  CHECK(cloud.size() == total);
  CHECK(cloud.points == svc->pointcloud(id).points);

  // Concurrent HTTP renders equal the sequential result.
  std::vector<std::string> bodies(4);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(30, 0);
      auto r = c.Post("/sessions/" + id + "/render", req.dump(), "application/json");
      if (r) bodies[static_cast<std::size_t>(t)] = r->body;
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& b : bodies) CHECK(b == rendered->body);

  CHECK(cli.Delete("/sessions/" + id)->status == 204);
  CHECK(cli.Post("/sessions/" + id + "/render", req.dump(), "application/json")->status == 404);
  CHECK(cli.Get("/sessions/" + id + "/pointcloud")->status == 404);
  server.stop();
}

TEST_CASE("HTTP payload limit answers 413") {
  auto svc = std::make_shared<InferenceService>(tiny_model());
  HttpOptions opt;
  opt.max_body_bytes = 1024;
  HttpServer server(svc, opt);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  const std::string big(4096, 'x');
  auto r = cli.Post("/sessions", "{\"images\":[\"" + big + "\"]}", "application/json");
  REQUIRE(r);
  CHECK(r->status == 413);
  server.stop();
}

TEST_CASE("HTTP status mapping") {
  CHECK(http_status(ErrorCode::kNotFound) == 404);
  CHECK(http_status(ErrorCode::kInvalidCamera) == 422);
  CHECK(http_status(ErrorCode::kEmptyInput) == 422);
  CHECK(http_status(ErrorCode::kInvalidArgument) == 400);
  CHECK(http_status(ErrorCode::kIo) == 500);
}
