// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rng/common/error.hpp"
#include "rng/evaluation/evaluate.hpp"
#include "rng/interface/codec.hpp"
#include "rng/interface/http.hpp"
#include "rng/interface/service.hpp"
#include "rng/trainer/trainer.hpp"

namespace {

using nlohmann::json;
using namespace rng;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

/// --config file, then RNG_CONFIG (a path or inline JSON) merged on top.
json load_config(const std::string& path) {
  json cfg = json::object();
  if (!path.empty()) cfg = read_json_file(path);
  if (const char* env = std::getenv("RNG_CONFIG"); env != nullptr && *env != '\0') {
    const std::string value(env);
    json patch;
    if (value.front() == '{') {
      try {
        patch = json::parse(value);
      } catch (const json::parse_error& e) {
        fail(ErrorCode::kInvalidArgument, std::string("RNG_CONFIG: ") + e.what());
      }
    } else {
      patch = read_json_file(value);
    }
    cfg.merge_patch(patch);
  }
  return cfg;
}

int run_train(const std::string& config_path, const std::string& out, const std::string& log_path, bool resume,
              bool quiet) {
  const auto cfg = trainer::TrainConfig::from_json(load_config(config_path));
  std::unique_ptr<trainer::Trainer> t;
  if (resume && std::filesystem::exists(out)) {
    auto loaded = trainer::Trainer::load_checkpoint(out, &cfg.model);
    require(loaded.config().to_json() == cfg.to_json(), ErrorCode::kConfigMismatch,
            "existing checkpoint " + out + " was trained with a different config");
    t = std::make_unique<trainer::Trainer>(std::move(loaded));
  } else {
    t = std::make_unique<trainer::Trainer>(cfg);
  }
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, t->step() > 0 ? std::ios::app : std::ios::trunc);
    require(static_cast<bool>(log), ErrorCode::kIo, "cannot open " + log_path);
  }
  t->run(out, log_path.empty() ? nullptr : &log, [&](const trainer::StepLog& s) {
    if (!quiet && (s.step % cfg.log_interval == 0)) std::cerr << s.to_json().dump() << '\n';
  });
  std::cout << json{{"checkpoint", out}, {"step", t->step()}, {"fingerprint", t->model().fingerprint()}}.dump()
            << '\n';
  return 0;
}

std::string fmt_index(const std::string& prefix, std::size_t i, const std::string& suffix) {
  std::ostringstream s;
  s << prefix;
  if (suffix == ".png") s << std::setw(2) << std::setfill('0');
  s << i << suffix;
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path);
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
}

int run_eval(const std::string& ckpt, const evaluation::EvalConfig& cfg, const std::string& out,
             const std::string& csv) {
  const auto model = trainer::load_model(ckpt);
  const auto report = evaluation::evaluate(model, cfg);
  const auto text = report.to_json().dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  if (!csv.empty()) write_text(csv, report.to_csv());
  return 0;
}

int run_bench(const std::string& ckpt, int queries) {
  const auto model = trainer::load_model(ckpt);
  const auto report = evaluation::efficiency_bench(model, model.config().num_sources, queries);
  std::cout << report.to_json().dump(2) << '\n';
  return 0;
}

/// Every *.png in `dir`, sorted by file name. The first is the reference view.
std::vector<ImageF> load_images(const std::string& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::kIo, "not a directory: " + dir);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageF> images;
  for (const auto& f : files) images.push_back(io::load_png(f.string()));
  return images;
}

geometry::CameraPose load_pose(const std::string& path, const model::RnG<float>& model) {
  auto j = read_json_file(path);
  if (j.contains("pose")) j = j["pose"];
  const auto [r, c] = service::pose_from_json(j);
  const int res = model.config().resolution;
  auto pose = geometry::canonical_pose(geometry::default_intrinsics(res, res), res, res);
  pose.rotation = r;
  pose.center = c;
  geometry::validate(pose);
  return pose;
}

int run_render(const std::string& ckpt, const std::string& images_dir, const std::string& pose_path,
               const std::string& out, const std::string& pointmap_out) {
  const auto model = trainer::load_model(ckpt);
  const auto images = load_images(images_dir);
  const auto pose = load_pose(pose_path, model);
  const auto stage1 = model.run_stage1(images);
  const auto maps = model.run_stage2(std::span(&pose, 1), stage1.cache).front();
  io::save_png(out, maps.rgb);
  if (!pointmap_out.empty()) {
    service::maps_container(maps, geometry::pointmap_to_depth(maps.pointmap, pose)).save(pointmap_out);
  }
  json poses = json::array();
  for (const auto& p : stage1.poses) poses.push_back(service::pose_to_json(p));
  std::cout << json{{"rgb", out}, {"source_poses", poses}}.dump() << '\n';
  return 0;
}

int run_scan(const std::string& ckpt, const std::string& images_dir, int views, double quantile, double radius,
             const std::string& out) {
  const auto model = trainer::load_model(ckpt);
  const auto images = load_images(images_dir);
  const auto stage1 = model.run_stage1(images);
  evaluation::ScanOptions opt;
  opt.conf_quantile = quantile;
  const auto poses = evaluation::sphere_poses(views, radius, model.config().resolution);
  const auto cloud = evaluation::scan(model, stage1.cache, poses, opt);
  geometry::save_ply(out, cloud);
  std::cout << json{{"ply", out}, {"views", views}, {"points", cloud.size()}}.dump() << '\n';
  return 0;
}

int run_gendata(std::uint64_t scene_seed, int resolution, const std::string& out_dir) {
  require(resolution > 0, ErrorCode::kInvalidArgument, "resolution must be positive");
  std::filesystem::create_directories(std::filesystem::path(out_dir) / "targets");
  const evaluation::EvalConfig ec;
  const auto s = evaluation::make_eval_scene(scene_seed, resolution, ec);
  json sources = json::array(), targets = json::array();
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    io::save_png((std::filesystem::path(out_dir) / fmt_index("source_", i, ".png")).string(), s.sources[i].rgb);
    sources.push_back(service::pose_to_json(s.sources[i].pose));
  }
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    io::save_png((std::filesystem::path(out_dir) / "targets" / fmt_index("target_", i, ".png")).string(),
                 s.targets[i].rgb);
    targets.push_back(service::pose_to_json(s.targets[i].pose));
  }
  write_text((std::filesystem::path(out_dir) / "poses.json").string(),
             json{{"scene_seed", scene_seed}, {"sources", sources}, {"targets", targets}}.dump(2) + "\n");
  std::cout << json{{"dir", out_dir}, {"sources", s.sources.size()}, {"targets", s.targets.size()}}.dump() << '\n';
  return 0;
}

service::HttpServer* g_server = nullptr;

int run_serve(const std::string& ckpt, const std::string& host, int port, const std::string& static_dir,
              std::size_t max_sessions) {
  auto model = std::make_shared<const model::RnG<float>>(trainer::load_model(ckpt));
  service::ServiceOptions sopt;
  sopt.max_sessions = max_sessions;
  auto svc = std::make_shared<service::InferenceService>(model, sopt);
  service::HttpOptions hopt;
  hopt.static_dir = static_dir;
  service::HttpServer server(svc, hopt);
  const int bound = server.bind(host, port);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  std::cout << json{{"listening", fmt_index(host + ":", static_cast<std::size_t>(bound), "")},
                    {"model_fingerprint", model->fingerprint()}}
                   .dump()
            << std::endl;
  server.listen();
  g_server = nullptr;
  return 0;
}

int report_error(const std::string& code, const std::string& message, int status) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstruction-and-generation transformer at desk scale"};
  app.require_subcommand(1);

  std::string config_path, out, log_path;
  bool resume = false, quiet = false;
  auto* train = app.add_subcommand("train", "Train a model on procedural scenes");
  train->add_option("--config", config_path, "Training config JSON");
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--log", log_path, "JSON-lines training log");
  train->add_flag("--resume", resume, "Continue from --out when it exists");
  train->add_flag("--quiet", quiet, "No progress on stderr");

  std::string ckpt, eval_out, eval_csv;
  evaluation::EvalConfig eval_cfg;
  auto* eval = app.add_subcommand("eval", "Evaluate on held-out procedural scenes");
  eval->add_option("--ckpt", ckpt, "Checkpoint or weights")->required();
  eval->add_option("--scenes", eval_cfg.scenes, "Number of held-out scenes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_cfg.seed, "Held-out scene seed");
  eval->add_option("--conf-quantile", eval_cfg.scan.conf_quantile, "Confidence quantile for the Chamfer cloud")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--out", eval_out, "Report JSON (stdout when omitted)");
  eval->add_option("--csv", eval_csv, "Also write a one-row CSV table");

  int bench_queries = 20;
  auto* bench = app.add_subcommand("bench", "Joint forward versus cached stage-2 queries");
  bench->add_option("--ckpt", ckpt, "Checkpoint or weights")->required();
  bench->add_option("--queries", bench_queries, "Timed queries per mode")->check(CLI::PositiveNumber);

  std::string images_dir, pose_path, render_out, pointmap_out;
  auto* render = app.add_subcommand("render", "Render a novel view from source images");
  render->add_option("--ckpt", ckpt, "Checkpoint or weights")->required();
  render->add_option("--images", images_dir, "Directory of source PNGs, sorted by name")->required();
  render->add_option("--pose", pose_path, "Camera-to-world pose JSON in the normalized frame")->required();
  render->add_option("--out", render_out, "Output PNG")->required();
  render->add_option("--pointmap", pointmap_out, "Also write depth, point map and confidence as RNGT");

  int scan_views = 32;
  double scan_quantile = 0.2, scan_radius = 1.0;
  std::string scan_out;
  auto* scan = app.add_subcommand("scan", "Accumulate a point cloud from sphere-uniform queries");
  scan->add_option("--ckpt", ckpt, "Checkpoint or weights")->required();
  scan->add_option("--images", images_dir, "Directory of source PNGs, sorted by name")->required();
  scan->add_option("--views", scan_views, "Number of query views")->check(CLI::PositiveNumber);
  scan->add_option("--conf-quantile", scan_quantile, "Fraction of foreground points dropped per view")
      ->check(CLI::Range(0.0, 1.0));
  scan->add_option("--radius", scan_radius, "Query sphere radius")->check(CLI::PositiveNumber);
  scan->add_option("--out", scan_out, "Output PLY")->required();

  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  std::size_t max_sessions = 16;
  auto* serve = app.add_subcommand("serve", "HTTP inference service");
  serve->add_option("--ckpt", ckpt, "Checkpoint or weights")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--static", static_dir, "Directory served at /");
  serve->add_option("--max-sessions", max_sessions, "Sessions kept before LRU eviction")->check(CLI::PositiveNumber);

  std::uint64_t gen_seed = 1'000'000;
  int gen_resolution = 64;
  std::string gen_out;
  auto* gendata = app.add_subcommand("gendata", "Write source images and poses of one procedural scene");
  gendata->add_option("--scene-seed", gen_seed, "Scene seed");
  gendata->add_option("--resolution", gen_resolution, "Image size")->check(CLI::PositiveNumber);
  gendata->add_option("--out", gen_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }
  try {
    if (train->parsed()) return run_train(config_path, out, log_path, resume, quiet);
    if (eval->parsed()) return run_eval(ckpt, eval_cfg, eval_out, eval_csv);
    if (bench->parsed()) return run_bench(ckpt, bench_queries);
    if (render->parsed()) return run_render(ckpt, images_dir, pose_path, render_out, pointmap_out);
    if (scan->parsed()) return run_scan(ckpt, images_dir, scan_views, scan_quantile, scan_radius, scan_out);
    if (serve->parsed()) return run_serve(ckpt, host, port, static_dir, max_sessions);
    if (gendata->parsed()) return run_gendata(gen_seed, gen_resolution, gen_out);
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.code())), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
