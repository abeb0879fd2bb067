// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rng/attention/attention.hpp"
#include "rng/interface/rngt.hpp"
#include "rng/model/config.hpp"
#include "rng/nn/graph.hpp"

namespace rng::model {

template <typename T>
struct NormParams {
  nn::Param<T> gamma;
  nn::Param<T> beta;
};

template <typename T>
struct MlpParams {
  nn::Param<T> fc1_w, fc1_b;
  nn::Param<T> fc2_w, fc2_b;
};

/// One pre-norm transformer block: attention and MLP sub-layers.
template <typename T>
struct BlockParams {
  NormParams<T> ln1;
  attention::AttentionParams<T> attn;
  NormParams<T> ln2;
  MlpParams<T> mlp;
};

/// Token grid -> full-resolution map decoder.
template <typename T>
struct DecoderParams {
  nn::Param<T> proj_w, proj_b;
  std::vector<nn::Param<T>> conv_w, conv_b;
  nn::Param<T> out_w, out_b;
  /// Bias-free linear unpatchify path straight from the tokens.
  nn::Param<T> skip_w;
};

template <typename T>
struct ModelWeights {
  ModelConfig config;

  nn::Param<T> patch_w, patch_b;  // 3*p*p -> D
  nn::Param<T> ray_w, ray_b;      // 6*p*p -> D
  nn::Param<T> camera_special, camera_shared;
  nn::Param<T> register_special, register_shared;
  std::vector<BlockParams<T>> frame;
  std::vector<BlockParams<T>> global;
  NormParams<T> final_norm;
  MlpParams<T> camera_head;
  DecoderParams<T> rgb_head;
  DecoderParams<T> point_head;

  /// Zero-filled tensors of the right shape for `config`.
  static ModelWeights allocate(const ModelConfig& config);
  /// Deterministic random initialization from config.seed.
  static ModelWeights initialize(const ModelConfig& config);

  /// Every tensor under a stable name, in a fixed order.
  std::vector<std::pair<std::string, nn::Param<T>*>> named();
  std::vector<std::pair<std::string, const nn::Param<T>*>> named() const;

  std::size_t num_parameters() const;
  /// Throws kShapeMismatch or kNonFinite when a tensor does not fit the config.
  void validate() const;
  void zero_grad() const;

  template <typename U>
  ModelWeights<U> cast() const;

  /// SHA-256 over the config and every tensor's name, shape and float32 bytes.
  std::string compute_fingerprint() const;

  /// Float32 tensors plus {"kind": "weights", "config": ...} metadata.
  void write_to(io::RngtContainer& c) const;
  /// Throws kConfigMismatch when `expected` is given and differs, kCorruptFile
  /// when tensors are missing or misshaped.
  static ModelWeights read_from(const io::RngtContainer& c, const ModelConfig* expected = nullptr);
};

extern template struct ModelWeights<float>;
extern template struct ModelWeights<double>;

}  // namespace rng::model
