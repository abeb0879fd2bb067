// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/model/weights.hpp"

#include <cmath>
#include <random>

#include "rng/common/error.hpp"
#include "rng/common/hash.hpp"

namespace rng::model {

using nn::Mat;
using nn::Param;

namespace {

template <typename P, typename Fn>
void visit_norm(const std::string& prefix, P& p, Fn& fn) {
  fn(prefix + ".gamma", p.gamma);
  fn(prefix + ".beta", p.beta);
}

template <typename P, typename Fn>
void visit_mlp(const std::string& prefix, P& p, Fn& fn) {
  fn(prefix + ".fc1.w", p.fc1_w);
  fn(prefix + ".fc1.b", p.fc1_b);
  fn(prefix + ".fc2.w", p.fc2_w);
  fn(prefix + ".fc2.b", p.fc2_b);
}

template <typename P, typename Fn>
void visit_block(const std::string& prefix, P& b, Fn& fn) {
  visit_norm(prefix + ".ln1", b.ln1, fn);
  fn(prefix + ".attn.qkv.w", b.attn.qkv_w);
  fn(prefix + ".attn.qkv.b", b.attn.qkv_b);
  fn(prefix + ".attn.out.w", b.attn.out_w);
  fn(prefix + ".attn.out.b", b.attn.out_b);
  visit_norm(prefix + ".ln2", b.ln2, fn);
  visit_mlp(prefix + ".mlp", b.mlp, fn);
}

template <typename P, typename Fn>
void visit_decoder(const std::string& prefix, P& d, Fn& fn) {
  fn(prefix + ".proj.w", d.proj_w);
  fn(prefix + ".proj.b", d.proj_b);
  for (std::size_t i = 0; i < d.conv_w.size(); ++i) {
    fn(prefix + ".conv" + std::to_string(i) + ".w", d.conv_w[i]);
    fn(prefix + ".conv" + std::to_string(i) + ".b", d.conv_b[i]);
  }
  fn(prefix + ".out.w", d.out_w);
  fn(prefix + ".out.b", d.out_b);
  fn(prefix + ".skip.w", d.skip_w);
}

template <typename W, typename Fn>
void visit(W& w, Fn&& fn) {
  fn("patch_embed.w", w.patch_w);
  fn("patch_embed.b", w.patch_b);
  fn("ray_embed.w", w.ray_w);
  fn("ray_embed.b", w.ray_b);
  fn("tokens.camera.special", w.camera_special);
  fn("tokens.camera.shared", w.camera_shared);
  fn("tokens.register.special", w.register_special);
  fn("tokens.register.shared", w.register_shared);
  for (std::size_t l = 0; l < w.frame.size(); ++l) {
    visit_block("blocks." + std::to_string(l) + ".frame", w.frame[l], fn);
    visit_block("blocks." + std::to_string(l) + ".global", w.global[l], fn);
  }
  visit_norm("final_norm", w.final_norm, fn);
  visit_mlp("camera_head", w.camera_head, fn);
  visit_decoder("rgb_head", w.rgb_head, fn);
  visit_decoder("point_head", w.point_head, fn);
}

template <typename T>
void shape(Param<T>& p, int rows, int cols) {
  p.value = Mat<T>::Zero(rows, cols);
  p.grad.resize(0, 0);
}

template <typename T>
void shape_decoder(DecoderParams<T>& d, const ModelConfig& c, int out_channels) {
  shape(d.proj_w, c.dim, c.head_width);
  shape(d.proj_b, 1, c.head_width);
  d.conv_w.resize(c.head_channels.size());
  d.conv_b.resize(c.head_channels.size());
  int cin = c.head_width;
  for (std::size_t i = 0; i < c.head_channels.size(); ++i) {
    shape(d.conv_w[i], 9 * cin, c.head_channels[i]);
    shape(d.conv_b[i], 1, c.head_channels[i]);
    cin = c.head_channels[i];
  }
  shape(d.out_w, cin, out_channels);
  shape(d.out_b, 1, out_channels);
  shape(d.skip_w, c.dim, c.patch * c.patch * out_channels);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename T>
ModelWeights<T> ModelWeights<T>::allocate(const ModelConfig& config) {
  config.validate();
  const int d = config.dim;
  const int pp = config.patch * config.patch;
  const int hidden = config.mlp_ratio * d;
  ModelWeights<T> w;
  w.config = config;
  shape(w.patch_w, 3 * pp, d);
  shape(w.patch_b, 1, d);
  shape(w.ray_w, 6 * pp, d);
  shape(w.ray_b, 1, d);
  shape(w.camera_special, 1, d);
  shape(w.camera_shared, 1, d);
  shape(w.register_special, config.registers, d);
  shape(w.register_shared, config.registers, d);
  auto block = [&](BlockParams<T>& b) {
    shape(b.ln1.gamma, 1, d);
    shape(b.ln1.beta, 1, d);
    shape(b.attn.qkv_w, d, 3 * d);
    shape(b.attn.qkv_b, 1, 3 * d);
    shape(b.attn.out_w, d, d);
    shape(b.attn.out_b, 1, d);
    shape(b.ln2.gamma, 1, d);
    shape(b.ln2.beta, 1, d);
    shape(b.mlp.fc1_w, d, hidden);
    shape(b.mlp.fc1_b, 1, hidden);
    shape(b.mlp.fc2_w, hidden, d);
    shape(b.mlp.fc2_b, 1, d);
  };
  w.frame.resize(static_cast<std::size_t>(config.layers));
  w.global.resize(static_cast<std::size_t>(config.layers));
  for (auto& b : w.frame) block(b);
  for (auto& b : w.global) block(b);
  shape(w.final_norm.gamma, 1, d);
  shape(w.final_norm.beta, 1, d);
  shape(w.camera_head.fc1_w, d, config.camera_hidden);
  shape(w.camera_head.fc1_b, 1, config.camera_hidden);
  shape(w.camera_head.fc2_w, config.camera_hidden, 9);
  shape(w.camera_head.fc2_b, 1, 9);
  shape_decoder(w.rgb_head, config, 3);
  shape_decoder(w.point_head, config, 4);
  return w;
}

template <typename T>
ModelWeights<T> ModelWeights<T>::initialize(const ModelConfig& config) {
  ModelWeights<T> w = allocate(config);
  std::mt19937_64 rng(config.seed ^ 0x5EEDC0FFEE123457ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double residual_scale = 1.0 / std::sqrt(4.0 * config.layers);
  auto fill = [&](Param<T>& p, double stddev) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(stddev * normal(rng));
  };
  for (auto& [name, p] : w.named()) {
    const double fan_in = static_cast<double>(p->value.rows());
    if (ends_with(name, ".gamma")) {
      p->value.setOnes();
    } else if (ends_with(name, ".b") || ends_with(name, ".beta")) {
      p->value.setZero();
    } else if (name.rfind("tokens.", 0) == 0) {
      fill(*p, 0.5);
    } else if (ends_with(name, "attn.out.w") || ends_with(name, "mlp.fc2.w")) {
      fill(*p, residual_scale / std::sqrt(fan_in));
    } else if (name == "camera_head.fc2.w") {
      fill(*p, 0.1 / std::sqrt(fan_in));
    } else if (name.find(".conv") != std::string::npos) {
      fill(*p, std::sqrt(2.0 / fan_in));
    } else if (ends_with(name, "skip.w")) {
      fill(*p, 0.1 / std::sqrt(fan_in));
    } else {
      fill(*p, 1.0 / std::sqrt(fan_in));
    }
  }
  // Start the camera head at the canonical pose: 6D rotation of I, center (0, 0, -1).
  const T canonical[9] = {1, 0, 0, 0, 1, 0, 0, 0, -1};
  for (int i = 0; i < 9; ++i) w.camera_head.fc2_b.value(0, i) = canonical[i];
  return w;
}

template <typename T>
std::vector<std::pair<std::string, Param<T>*>> ModelWeights<T>::named() {
  std::vector<std::pair<std::string, Param<T>*>> out;
  visit(*this, [&](const std::string& name, Param<T>& p) { out.emplace_back(name, &p); });
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Param<T>*>> ModelWeights<T>::named() const {
  std::vector<std::pair<std::string, const Param<T>*>> out;
  visit(*this, [&](const std::string& name, const Param<T>& p) { out.emplace_back(name, &p); });
  return out;
}

template <typename T>
std::size_t ModelWeights<T>::num_parameters() const {
  std::size_t n = 0;
  for (const auto& [name, p] : named()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

template <typename T>
void ModelWeights<T>::validate() const {
  const auto reference = allocate(config);
  const auto expected = reference.named();
  const auto actual = named();
  require(expected.size() == actual.size(), ErrorCode::kShapeMismatch, "weights do not match the config");
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const auto& v = actual[i].second->value;
    const auto& e = expected[i].second->value;
    require(v.rows() == e.rows() && v.cols() == e.cols(), ErrorCode::kShapeMismatch,
            "weight '" + actual[i].first + "' has the wrong shape");
    require(v.allFinite(), ErrorCode::kNonFinite, "weight '" + actual[i].first + "' is not finite");
  }
}

template <typename T>
void ModelWeights<T>::zero_grad() const {
  for (const auto& [name, p] : named()) p->zero_grad();
}

template <typename T>
template <typename U>
ModelWeights<U> ModelWeights<T>::cast() const {
  ModelWeights<U> out = ModelWeights<U>::allocate(config);
  auto dst = out.named();
  const auto src = named();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].second->value = src[i].second->value.template cast<U>();
  return out;
}

template <typename T>
std::string ModelWeights<T>::compute_fingerprint() const {
  Sha256 h;
  h.update(config.to_json().dump());
  for (const auto& [name, p] : named()) {
    h.update(name);
    const std::int64_t dims[2] = {p->value.rows(), p->value.cols()};
    h.update(dims, sizeof(dims));
    if constexpr (std::is_same_v<T, float>) {
      h.update(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(float));
    } else {
      const Mat<float> f = p->value.template cast<float>();
      h.update(f.data(), static_cast<std::size_t>(f.size()) * sizeof(float));
    }
  }
  return h.hex_digest();
}

template <typename T>
void ModelWeights<T>::write_to(io::RngtContainer& c) const {
  for (const auto& [name, p] : named()) {
    const Mat<float> f = p->value.template cast<float>();
    c.add(name, {static_cast<std::uint32_t>(f.rows()), static_cast<std::uint32_t>(f.cols())},
          std::vector<float>(f.data(), f.data() + f.size()));
  }
  c.metadata()["model_config"] = config.to_json();
}

template <typename T>
ModelWeights<T> ModelWeights<T>::read_from(const io::RngtContainer& c, const ModelConfig* expected) {
  const auto& meta = c.metadata();
  require(meta.contains("model_config"), ErrorCode::kCorruptFile, "container holds no model config");
  ModelConfig config;
  try {
    config = ModelConfig::from_json(meta.at("model_config"));
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptFile, std::string("stored model config is invalid: ") + e.what());
  }
  if (expected != nullptr) {
    require(config == *expected, ErrorCode::kConfigMismatch,
            "checkpoint config " + config.to_json().dump() + " differs from " + expected->to_json().dump());
  }
  ModelWeights<T> w = allocate(config);
  for (auto& [name, p] : w.named()) {
    require(c.contains(name), ErrorCode::kCorruptFile, "checkpoint is missing weight '" + name + "'");
    const auto& t = c.get(name);
    require(t.dims.size() == 2 && t.dims[0] == p->value.rows() && t.dims[1] == p->value.cols(),
            ErrorCode::kCorruptFile, "checkpoint weight '" + name + "' has the wrong shape");
    p->value = Eigen::Map<const Mat<float>>(t.data.data(), p->value.rows(), p->value.cols()).template cast<T>();
  }
  w.validate();
  return w;
}

template struct ModelWeights<float>;
template struct ModelWeights<double>;
template ModelWeights<double> ModelWeights<float>::cast<double>() const;
template ModelWeights<float> ModelWeights<double>::cast<float>() const;
template ModelWeights<float> ModelWeights<float>::cast<float>() const;
template ModelWeights<double> ModelWeights<double>::cast<double>() const;

}  // namespace rng::model
