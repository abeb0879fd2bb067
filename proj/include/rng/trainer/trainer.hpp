// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rng/losses/losses.hpp"
#include "rng/model/model.hpp"
#include "rng/scenegen/dataset.hpp"

namespace rng::trainer {

struct TrainConfig {
  int steps = 5000;  // optimizer updates
  int warmup = 300;
  double lr = 6e-4;
  int accumulation = 2;     // forward passes per update
  int groups_per_forward = 1;  // scene groups (4 sources + 3 targets) per forward
  std::uint64_t seed = 0;
  int checkpoint_interval = 500;
  int log_interval = 10;
  int dataset_size = 500;  // training scenes use seeds [0, dataset_size)
  double clip = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  losses::LossWeights loss;
  model::ModelConfig model;
  scenegen::DataConfig data;  // width/height follow model.resolution

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Linear warmup from 0 to the peak, then half-cosine decay to 0 at `steps`.
double lr_schedule(int step, const TrainConfig& cfg);

template <typename T>
struct AdamState {
  std::vector<nn::Mat<T>> m;
  std::vector<nn::Mat<T>> v;
  std::int64_t t = 0;

  static AdamState zeros(const model::ModelWeights<T>& w);
};

/// Examples of one forward pass. Examples that share a source set run as a
/// single multi-target forward.
using MicroBatch = std::vector<scenegen::TrainingExample>;

/// Mean loss over every example of the window; parameter gradients of that
/// mean are left in the weights' grad buffers.
template <typename T>
losses::LossReport compute_gradients(const model::RnG<T>& model, std::span<const MicroBatch> window,
                                     const losses::LossWeights& weights, const losses::PerceptualBank& bank);

/// Global gradient norm before clipping.
template <typename T>
double clip_gradients(const model::ModelWeights<T>& w, double max_norm);

template <typename T>
void adam_update(model::ModelWeights<T>& w, AdamState<T>& state, double lr, const TrainConfig& cfg);

/// One optimizer update over an accumulation window.
template <typename T>
losses::LossReport train_step(model::RnG<T>& model, std::span<const MicroBatch> window, AdamState<T>& state,
                              const TrainConfig& cfg, double lr, const losses::PerceptualBank& bank);

/// The deterministic training stream: scene and view draws for forward
/// `micro` of update `step` depend only on (cfg.seed, step, micro).
MicroBatch training_batch(const TrainConfig& cfg, int step, int micro);

struct StepLog {
  int step = 0;
  double lr = 0.0;
  double grad_norm = 0.0;
  losses::LossReport loss;

  nlohmann::json to_json() const;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const model::RnG<float>& model() const { return model_; }
  model::RnG<float>& mutable_model() { return model_; }
  const AdamState<float>& optimizer() const { return adam_; }
  int step() const { return step_; }

  /// Runs update `step()` on the training stream and advances.
  StepLog step_once();

  /// Trains until `cfg.steps`, appending one JSON line per log interval and
  /// writing `checkpoint_path` every checkpoint interval and at the end.
  void run(const std::string& checkpoint_path, std::ostream* log,
           const std::function<void(const StepLog&)>& on_step = {});

  void save_checkpoint(const std::string& path) const;
  io::RngtContainer to_container() const;
  /// Restores weights, optimizer state and step. Throws kConfigMismatch when
  /// the stored model config differs from `expected_model`.
  static Trainer load_checkpoint(const std::string& path, const model::ModelConfig* expected_model = nullptr);
  static Trainer from_container(const io::RngtContainer& c, const model::ModelConfig* expected_model = nullptr);

 private:
  Trainer(TrainConfig cfg, model::ModelWeights<float> weights);

  TrainConfig cfg_;
  model::RnG<float> model_;
  AdamState<float> adam_;
  losses::PerceptualBank bank_;
  int step_ = 0;
};

/// Trained weights saved by `Trainer` or written directly.
model::RnG<float> load_model(const std::string& path, const model::ModelConfig* expected = nullptr);

}  // namespace rng::trainer
