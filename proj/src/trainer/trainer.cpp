// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/trainer/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>

#include "rng/common/error.hpp"

namespace rng::trainer {

using losses::LossReport;
using losses::Matd;
using nn::Mat;

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::kInvalidArgument, "train config: " + what); };
  check(steps >= 1, "steps must be positive");
  check(warmup >= 0 && warmup < steps, "warmup must be in [0, steps)");
  check(lr > 0 && std::isfinite(lr), "lr must be positive");
  check(accumulation >= 1, "accumulation must be at least 1");
  check(groups_per_forward >= 1, "groups_per_forward must be at least 1");
  check(checkpoint_interval >= 0 && log_interval >= 1, "intervals must be positive");
  check(dataset_size >= 1, "dataset_size must be positive");
  check(clip > 0, "clip must be positive");
  check(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0, "invalid Adam hyperparameters");
  check(data.views_per_scene >= scenegen::kViewsPerGroup, "views_per_scene must be at least 7");
  check(model.num_sources == scenegen::kSourceViews, "training groups provide exactly 4 source views");
  loss.validate();
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps},
          {"warmup", warmup},
          {"lr", lr},
          {"accumulation", accumulation},
          {"groups_per_forward", groups_per_forward},
          {"seed", seed},
          {"checkpoint_interval", checkpoint_interval},
          {"log_interval", log_interval},
          {"dataset_size", dataset_size},
          {"clip", clip},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"loss", loss.to_json()},
          {"model", model.to_json()},
          {"data",
           {{"views_per_scene", data.views_per_scene},
            {"radius_min", data.radius_min},
            {"radius_max", data.radius_max},
            {"antialias", data.antialias}}}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kInvalidArgument, "train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "steps") c.steps = value.get<int>();
      else if (key == "warmup") c.warmup = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "accumulation") c.accumulation = value.get<int>();
      else if (key == "groups_per_forward") c.groups_per_forward = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "checkpoint_interval") c.checkpoint_interval = value.get<int>();
      else if (key == "log_interval") c.log_interval = value.get<int>();
      else if (key == "dataset_size") c.dataset_size = value.get<int>();
      else if (key == "clip") c.clip = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "adam_eps") c.adam_eps = value.get<double>();
      else if (key == "loss") c.loss = losses::LossWeights::from_json(value);
      else if (key == "model") c.model = model::ModelConfig::from_json(value);
      else if (key == "data") {
        for (const auto& [dk, dv] : value.items()) {
          if (dk == "views_per_scene") c.data.views_per_scene = dv.get<int>();
          else if (dk == "radius_min") c.data.radius_min = dv.get<double>();
          else if (dk == "radius_max") c.data.radius_max = dv.get<double>();
          else if (dk == "antialias") c.data.antialias = dv.get<bool>();
          else fail(ErrorCode::kInvalidArgument, "unknown data config key '" + dk + "'");
        }
      } else {
        fail(ErrorCode::kInvalidArgument, "unknown train config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_schedule(int step, const TrainConfig& cfg) {
  require(step >= 0 && step < cfg.steps, ErrorCode::kInvalidArgument,
          "step " + std::to_string(step) + " outside [0, " + std::to_string(cfg.steps) + ")");
  if (step < cfg.warmup) return cfg.lr * static_cast<double>(step) / cfg.warmup;
  const double progress = static_cast<double>(step - cfg.warmup) / static_cast<double>(cfg.steps - cfg.warmup);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
AdamState<T> AdamState<T>::zeros(const model::ModelWeights<T>& w) {
  AdamState<T> s;
  for (const auto& [name, p] : w.named()) {
    s.m.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    s.v.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
  }
  return s;
}

namespace {

void accumulate(LossReport& into, const LossReport& r) {
  into.total += r.total;
  into.rgb_mse += r.rgb_mse;
  into.rgb_perceptual += r.rgb_perceptual;
  into.pmap += r.pmap;
  into.cam += r.cam;
}

LossReport scaled(LossReport r, double s) {
  r.total *= s;
  r.rgb_mse *= s;
  r.rgb_perceptual *= s;
  r.pmap *= s;
  r.cam *= s;
  return r;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

template <typename T>
LossReport compute_gradients(const model::RnG<T>& model, std::span<const MicroBatch> window,
                             const losses::LossWeights& weights, const losses::PerceptualBank& bank) {
  model.weights().zero_grad();
  std::size_t total = 0;
  for (const auto& mb : window) total += mb.size();
  require(total > 0, ErrorCode::kEmptyInput, "empty training window");
  const double inv = 1.0 / static_cast<double>(total);
  const int res = model.config().resolution;
  const Eigen::Index hw = static_cast<Eigen::Index>(res) * res;

  LossReport sum;
  for (const auto& mb : window) {
    // Examples sharing one source set become one multi-target forward.
    std::vector<std::vector<const scenegen::TrainingExample*>> groups;
    std::map<const void*, std::size_t> index;
    for (const auto& ex : mb) {
      const void* key = ex.sources.get();
      auto [it, inserted] = index.emplace(key, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(&ex);
    }
    for (const auto& group : groups) {
      std::vector<ImageF> images;
      for (const auto& v : *group.front()->sources) images.push_back(v.rgb);
      std::vector<geometry::CameraPose> targets;
      for (const auto* ex : group) targets.push_back(ex->target.pose);
      const auto nt = static_cast<Eigen::Index>(targets.size());

      nn::Graph<T> g(true);
      const auto vars = model.forward_joint(g, images, targets, model::JointOptions{nt > 1});
      const Matd rgb = g.value(vars.targets.rgb).template cast<double>();
      const Matd xyz = g.value(vars.targets.xyz).template cast<double>();
      const Matd conf = g.value(vars.targets.confidence).template cast<double>();
      const Matd cam = g.value(vars.camera).template cast<double>();
      Matd d_rgb(rgb.rows(), 3), d_xyz(xyz.rows(), 3), d_conf(conf.rows(), 1);
      Matd d_cam = Matd::Zero(cam.rows(), cam.cols());
      for (Eigen::Index t = 0; t < nt; ++t) {
        losses::LossGradients lg;
        const auto report = losses::total_loss(rgb.middleRows(t * hw, hw), xyz.middleRows(t * hw, hw),
                                               conf.middleRows(t * hw, hw), cam, *group[static_cast<std::size_t>(t)],
                                               weights, bank, &lg);
        accumulate(sum, report);
        d_rgb.middleRows(t * hw, hw) = lg.rgb * inv;
        d_xyz.middleRows(t * hw, hw) = lg.xyz * inv;
        d_conf.middleRows(t * hw, hw) = lg.confidence * inv;
        d_cam += lg.camera * inv;
      }
      g.backward({{vars.targets.rgb, d_rgb.cast<T>()},
                  {vars.targets.xyz, d_xyz.cast<T>()},
                  {vars.targets.confidence, d_conf.cast<T>()},
                  {vars.camera, d_cam.cast<T>()}});
    }
  }
  return scaled(sum, inv);
}

template <typename T>
double clip_gradients(const model::ModelWeights<T>& w, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : w.named()) {
    if (p->grad.size() != 0) sq += p->grad.template cast<double>().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  require(std::isfinite(norm), ErrorCode::kNonFinite, "gradient norm is not finite");
  if (norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (const auto& [name, p] : w.named()) {
      if (p->grad.size() != 0) p->grad *= s;
    }
  }
  return norm;
}

template <typename T>
void adam_update(model::ModelWeights<T>& w, AdamState<T>& state, double lr, const TrainConfig& cfg) {
  auto params = w.named();
  require(state.m.size() == params.size() && state.v.size() == params.size(), ErrorCode::kShapeMismatch,
          "optimizer state does not match the weights");
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg.adam_eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].second;
    if (p.grad.size() == 0) p.zero_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (T(1) - b1) * p.grad;
    v = b2 * v + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= step * m.array() / ((v.array() * inv_c2).sqrt() + eps);
  }
}

template <typename T>
LossReport train_step(model::RnG<T>& model, std::span<const MicroBatch> window, AdamState<T>& state,
                      const TrainConfig& cfg, double lr, const losses::PerceptualBank& bank) {
  const auto report = compute_gradients(model, window, cfg.loss, bank);
  clip_gradients(model.weights(), cfg.clip);
  adam_update(model.mutable_weights(), state, lr, cfg);
  return report;
}

MicroBatch training_batch(const TrainConfig& cfg, int step, int micro) {
  auto data = cfg.data;
  data.width = data.height = cfg.model.resolution;
  MicroBatch batch;
  for (int k = 0; k < cfg.groups_per_forward; ++k) {
    const std::uint64_t key = splitmix(cfg.seed ^ splitmix(static_cast<std::uint64_t>(step) * 1000003ULL +
                                                           static_cast<std::uint64_t>(micro) * 1009ULL +
                                                           static_cast<std::uint64_t>(k)));
    const std::uint64_t scene = key % static_cast<std::uint64_t>(cfg.dataset_size);
    auto group = scenegen::sample_scene_group(scene, splitmix(key + 1), data);
    for (auto& ex : group) batch.push_back(std::move(ex));
  }
  return batch;
}

nlohmann::json StepLog::to_json() const {
  auto j = loss.to_json();
  j["step"] = step;
  j["lr"] = lr;
  j["grad_norm"] = grad_norm;
  return j;
}

Trainer::Trainer(TrainConfig cfg) : Trainer(cfg, model::ModelWeights<float>::initialize(cfg.model)) {}

Trainer::Trainer(TrainConfig cfg, model::ModelWeights<float> weights)
    : cfg_(std::move(cfg)), model_(std::move(weights)), bank_(cfg_.loss.feature_seed) {
  cfg_.validate();
  require(model_.config() == cfg_.model, ErrorCode::kConfigMismatch, "weights do not match the train config");
  adam_ = AdamState<float>::zeros(model_.weights());
}

StepLog Trainer::step_once() {
  require(step_ < cfg_.steps, ErrorCode::kInvalidArgument, "training already finished");
  StepLog log;
  log.step = step_;
  log.lr = lr_schedule(step_, cfg_);
  std::vector<MicroBatch> window;
  for (int k = 0; k < cfg_.accumulation; ++k) window.push_back(training_batch(cfg_, step_, k));
  try {
    log.loss = compute_gradients(model_, window, cfg_.loss, bank_);
    log.grad_norm = clip_gradients(model_.weights(), cfg_.clip);
  } catch (const Error& e) {
    fail(e.code(), "step " + std::to_string(step_) + ": " + e.what());
  }
  adam_update(model_.mutable_weights(), adam_, log.lr, cfg_);
  ++step_;
  return log;
}

void Trainer::run(const std::string& checkpoint_path, std::ostream* log,
                  const std::function<void(const StepLog&)>& on_step) {
  while (step_ < cfg_.steps) {
    const auto entry = step_once();
    if (on_step) on_step(entry);
    if (log != nullptr && (entry.step % cfg_.log_interval == 0 || step_ == cfg_.steps)) {
      *log << entry.to_json().dump() << '\n';
      log->flush();
    }
    const bool periodic = cfg_.checkpoint_interval > 0 && step_ % cfg_.checkpoint_interval == 0;
    if (!checkpoint_path.empty() && (periodic || step_ == cfg_.steps)) save_checkpoint(checkpoint_path);
  }
}

io::RngtContainer Trainer::to_container() const {
  io::RngtContainer c;
  model_.weights().write_to(c);
  const auto named = model_.weights().named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto dims = std::vector<std::uint32_t>{static_cast<std::uint32_t>(adam_.m[i].rows()),
                                                 static_cast<std::uint32_t>(adam_.m[i].cols())};
    c.add("adam.m." + named[i].first, dims, std::vector<float>(adam_.m[i].data(), adam_.m[i].data() + adam_.m[i].size()));
    c.add("adam.v." + named[i].first, dims, std::vector<float>(adam_.v[i].data(), adam_.v[i].data() + adam_.v[i].size()));
  }
  c.metadata()["kind"] = "checkpoint";
  c.metadata()["step"] = step_;
  c.metadata()["adam_t"] = adam_.t;
  c.metadata()["train_config"] = cfg_.to_json();
  return c;
}

void Trainer::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  to_container().save(tmp);
  require(std::rename(tmp.c_str(), path.c_str()) == 0, ErrorCode::kIo, "cannot move checkpoint into place: " + path);
}

Trainer Trainer::from_container(const io::RngtContainer& c, const model::ModelConfig* expected_model) {
  const auto& meta = c.metadata();
  require(meta.value("kind", "") == "checkpoint", ErrorCode::kCorruptFile, "container is not a training checkpoint");
  auto weights = model::ModelWeights<float>::read_from(c, expected_model);
  TrainConfig cfg;
  try {
    cfg = TrainConfig::from_json(meta.at("train_config"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptFile, std::string("checkpoint train config: ") + e.what());
  }
  Trainer t(cfg, std::move(weights));
  const auto named = t.model_.weights().named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    for (auto* which : {"m", "v"}) {
      const auto& tensor = c.get(std::string("adam.") + which + "." + named[i].first);
      auto& dst = which[0] == 'm' ? t.adam_.m[i] : t.adam_.v[i];
      require(tensor.data.size() == static_cast<std::size_t>(dst.size()), ErrorCode::kCorruptFile,
              "optimizer state for '" + named[i].first + "' has the wrong size");
      dst = Eigen::Map<const Mat<float>>(tensor.data.data(), dst.rows(), dst.cols());
    }
  }
  t.adam_.t = meta.at("adam_t").get<std::int64_t>();
  t.step_ = meta.at("step").get<int>();
  return t;
}

Trainer Trainer::load_checkpoint(const std::string& path, const model::ModelConfig* expected_model) {
  return from_container(io::RngtContainer::load(path), expected_model);
}

model::RnG<float> load_model(const std::string& path, const model::ModelConfig* expected) {
  return model::RnG<float>(model::ModelWeights<float>::read_from(io::RngtContainer::load(path), expected));
}

#define RNG_TRAINER_INSTANTIATE(T)                                                                                \
  template struct AdamState<T>;                                                                                   \
  template LossReport compute_gradients<T>(const model::RnG<T>&, std::span<const MicroBatch>,                     \
                                           const losses::LossWeights&, const losses::PerceptualBank&);            \
  template double clip_gradients<T>(const model::ModelWeights<T>&, double);                                       \
  template void adam_update<T>(model::ModelWeights<T>&, AdamState<T>&, double, const TrainConfig&);               \
  template LossReport train_step<T>(model::RnG<T>&, std::span<const MicroBatch>, AdamState<T>&, const TrainConfig&, \
                                    double, const losses::PerceptualBank&);

RNG_TRAINER_INSTANTIATE(float)
RNG_TRAINER_INSTANTIATE(double)

}  // namespace rng::trainer
