// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/model/model.hpp"

#include <cmath>

#include "rng/common/error.hpp"
#include "rng/nn/ops.hpp"

namespace rng::model {

using attention::SceneCache;
using attention::TokenLayout;
using geometry::CameraPose;
using nn::Graph;
using nn::Mat;
using nn::RowRange;
using nn::Var;

Mat<double> positional_encoding(int grid, int dim) {
  require(grid > 0 && dim > 0 && dim % 4 == 0, ErrorCode::kInvalidArgument, "positional encoding needs dim % 4 == 0");
  const int quarter = dim / 4;
  Mat<double> pe(grid * grid, dim);
  for (int y = 0; y < grid; ++y) {
    for (int x = 0; x < grid; ++x) {
      const int row = y * grid + x;
      for (int i = 0; i < quarter; ++i) {
        const double omega = std::pow(10000.0, -static_cast<double>(i) / quarter);
        pe(row, i) = std::sin(y * omega);
        pe(row, quarter + i) = std::cos(y * omega);
        pe(row, 2 * quarter + i) = std::sin(x * omega);
        pe(row, 3 * quarter + i) = std::cos(x * omega);
      }
    }
  }
  return pe;
}

template <typename T>
RnG<T>::RnG(ModelWeights<T> weights) : weights_(std::move(weights)) {
  weights_.validate();
  positional_ = positional_encoding(config().grid(), config().dim).template cast<T>();
}

template <typename T>
RnG<T>::RnG(const RnG& other) : weights_(other.weights_), positional_(other.positional_) {}

template <typename T>
RnG<T>& RnG<T>::operator=(const RnG& other) {
  if (this != &other) {
    weights_ = other.weights_;
    positional_ = other.positional_;
    std::lock_guard lock(fingerprint_mutex_);
    fingerprint_.clear();
  }
  return *this;
}

template <typename T>
ModelWeights<T>& RnG<T>::mutable_weights() {
  std::lock_guard lock(fingerprint_mutex_);
  fingerprint_.clear();
  return weights_;
}

template <typename T>
std::string RnG<T>::fingerprint() const {
  std::lock_guard lock(fingerprint_mutex_);
  if (fingerprint_.empty()) fingerprint_ = weights_.compute_fingerprint();
  return fingerprint_;
}

template <typename T>
Var RnG<T>::add_positional(Graph<T>& g, Var patch_tokens, int views) const {
  const auto p = positional_.rows();
  Mat<T> tiled(views * p, positional_.cols());
  for (int v = 0; v < views; ++v) tiled.middleRows(v * p, p) = positional_;
  return nn::add(g, patch_tokens, g.constant(std::move(tiled)));
}

template <typename T>
Var RnG<T>::assemble(Graph<T>& g, Var patch_tokens, int views, bool first_is_special) const {
  const auto& w = weights_;
  const int p = config().patches();
  const bool registers = config().registers > 0;
  const Var cam_shared = g.parameter(w.camera_shared);
  const Var reg_shared = registers ? g.parameter(w.register_shared) : Var{};
  Var cam_special, reg_special;
  if (first_is_special) {
    cam_special = g.parameter(w.camera_special);
    if (registers) reg_special = g.parameter(w.register_special);
  }
  std::vector<Var> parts;
  for (int v = 0; v < views; ++v) {
    const bool special = first_is_special && v == 0;
    parts.push_back(special ? cam_special : cam_shared);
    if (registers) parts.push_back(special ? reg_special : reg_shared);
    parts.push_back(nn::slice_rows(g, patch_tokens, v * p, (v + 1) * p));
  }
  return nn::concat_rows(g, parts);
}

template <typename T>
Var RnG<T>::tokenize_sources(Graph<T>& g, std::span<const ImageF> images) const {
  const auto& c = config();
  require(!images.empty(), ErrorCode::kEmptyInput, "no source images");
  const int n = static_cast<int>(images.size());
  const int p = c.patches();
  const int width = 3 * c.patch * c.patch;
  Mat<T> patches(n * p, width);
  for (int i = 0; i < n; ++i) {
    const auto& img = images[static_cast<std::size_t>(i)];
    require(img.height == c.resolution && img.width == c.resolution && img.channels == 3, ErrorCode::kShapeMismatch,
            "source image " + std::to_string(i) + " is " + std::to_string(img.height) + "x" +
                std::to_string(img.width) + "x" + std::to_string(img.channels) + ", model expects " +
                std::to_string(c.resolution) + "x" + std::to_string(c.resolution) + "x3");
    patches.middleRows(i * p, p) =
        (nn::patchify<T>(img.data, c.resolution, c.resolution, 3, c.patch).array() * T(2) - T(1)).matrix();
  }
  const Var e = nn::linear(g, g.constant(std::move(patches)), g.parameter(weights_.patch_w),
                           g.parameter(weights_.patch_b));
  return assemble(g, add_positional(g, e, n), n, true);
}

template <typename T>
void RnG<T>::check_target(const CameraPose& pose) const {
  geometry::validate(pose);
  require(pose.width == config().resolution && pose.height == config().resolution, ErrorCode::kShapeMismatch,
          "target pose resolution does not match the model");
}

template <typename T>
Var RnG<T>::embed_targets(Graph<T>& g, std::span<const CameraPose> poses) const {
  const auto& c = config();
  const int n = static_cast<int>(poses.size());
  const int p = c.patches();
  const int res = c.resolution;
  Mat<T> rays(n * p, 6 * c.patch * c.patch);
  std::vector<RowRange> segments;
  std::vector<float> buffer(static_cast<std::size_t>(res) * res * 6);
  for (int i = 0; i < n; ++i) {
    const auto& pose = poses[static_cast<std::size_t>(i)];
    check_target(pose);
    const auto pm = geometry::plucker_map(pose);
    for (std::size_t px = 0; px < pm.directions.pixels(); ++px) {
      for (int k = 0; k < 3; ++k) {
        buffer[px * 6 + k] = static_cast<float>(pm.directions.data[px * 3 + k]);
        buffer[px * 6 + 3 + k] = static_cast<float>(pm.moments.data[px * 3 + k]);
      }
    }
    rays.middleRows(i * p, p) = nn::patchify<T>(buffer, res, res, 6, c.patch);
    segments.push_back({i * p, (i + 1) * p});
  }
  const Var e = nn::linear(g, g.constant(std::move(rays)), g.parameter(weights_.ray_w), g.parameter(weights_.ray_b),
                           segments);
  return assemble(g, add_positional(g, e, n), n, false);
}

template <typename T>
Var RnG<T>::mlp_block(Graph<T>& g, const BlockParams<T>& b, Var x, std::span<const RowRange> segments) const {
  Var h = nn::layernorm(g, x, g.parameter(b.ln2.gamma), g.parameter(b.ln2.beta));
  h = nn::gelu(g, nn::linear(g, h, g.parameter(b.mlp.fc1_w), g.parameter(b.mlp.fc1_b), segments));
  h = nn::linear(g, h, g.parameter(b.mlp.fc2_w), g.parameter(b.mlp.fc2_b), segments);
  return nn::add(g, x, h);
}

template <typename T>
Var RnG<T>::run_trunk(Graph<T>& g, Var x, const TokenLayout& layout, bool multi_target, SceneCache* record,
                      const SceneCache* read) const {
  const int heads = config().heads;
  const auto segments = layout.row_segments();
  for (int l = 0; l < config().layers; ++l) {
    const auto& f = weights_.frame[static_cast<std::size_t>(l)];
    Var h = nn::layernorm(g, x, g.parameter(f.ln1.gamma), g.parameter(f.ln1.beta));
    x = nn::add(g, x, attention::frame_attention(g, h, f.attn, heads, layout));
    x = mlp_block(g, f, x, segments);

    const auto& b = weights_.global[static_cast<std::size_t>(l)];
    h = nn::layernorm(g, x, g.parameter(b.ln1.gamma), g.parameter(b.ln1.beta));
    Var a;
    if (read != nullptr) {
      a = attention::query_with_cache(g, h, b.attn, heads, *read, l, layout);
    } else {
      const auto out = attention::masked_global_attention(g, h, b.attn, heads, layout, multi_target);
      if (record != nullptr) {
        record->add_block(g.value(out.k).template cast<float>(), g.value(out.v).template cast<float>());
      }
      a = out.out;
    }
    x = nn::add(g, x, a);
    x = mlp_block(g, b, x, segments);
  }
  return nn::layernorm(g, x, g.parameter(weights_.final_norm.gamma), g.parameter(weights_.final_norm.beta));
}

template <typename T>
Var RnG<T>::gather_rows(Graph<T>& g, Var x, const std::vector<RowRange>& ranges) const {
  std::vector<Var> parts;
  for (const auto& r : ranges) parts.push_back(nn::slice_rows(g, x, r.begin, r.end));
  return nn::concat_rows(g, parts);
}

template <typename T>
Var RnG<T>::camera_head(Graph<T>& g, Var camera_tokens) const {
  const auto& h = weights_.camera_head;
  Var y = nn::gelu(g, nn::linear(g, camera_tokens, g.parameter(h.fc1_w), g.parameter(h.fc1_b)));
  return nn::linear(g, y, g.parameter(h.fc2_w), g.parameter(h.fc2_b));
}

template <typename T>
TargetVars RnG<T>::decode_heads(Graph<T>& g, Var ray_tokens, int count) const {
  const auto& c = config();
  const int p = c.patches();
  const int hw = c.resolution * c.resolution;
  std::vector<RowRange> token_segments, pixel_segments;
  for (int i = 0; i < count; ++i) {
    token_segments.push_back({i * p, (i + 1) * p});
    pixel_segments.push_back({i * hw, (i + 1) * hw});
  }
  auto decode = [&](const DecoderParams<T>& d, int channels) {
    Var f = nn::gelu(g, nn::linear(g, ray_tokens, g.parameter(d.proj_w), g.parameter(d.proj_b), token_segments));
    int size = c.grid();
    for (std::size_t s = 0; s < d.conv_w.size(); ++s) {
      f = nn::upsample2x(g, f, count, size, size);
      size *= 2;
      f = nn::gelu(g, nn::conv3x3(g, f, g.parameter(d.conv_w[s]), g.parameter(d.conv_b[s]), count, size, size));
    }
    const Var y = nn::linear(g, f, g.parameter(d.out_w), g.parameter(d.out_b), pixel_segments);
    const Var skip = nn::unpatchify(g, nn::linear(g, ray_tokens, g.parameter(d.skip_w), Var{}, token_segments),
                                    count, c.grid(), c.grid(), c.patch, channels);
    return nn::add(g, y, skip);
  };
  TargetVars out;
  out.count = count;
  out.rgb = nn::sigmoid(g, decode(weights_.rgb_head, 3));
  const Var point = decode(weights_.point_head, 4);
  out.xyz = nn::slice_cols(g, point, 0, 3);
  out.confidence = nn::exp_clamp(g, nn::slice_cols(g, point, 3, 4), T(-8), T(8));
  return out;
}

template <typename T>
JointVars RnG<T>::forward_joint(Graph<T>& g, std::span<const ImageF> sources, std::span<const CameraPose> targets,
                                const JointOptions& options) const {
  const auto& c = config();
  require(static_cast<int>(sources.size()) == c.num_sources, ErrorCode::kShapeMismatch,
          "model expects " + std::to_string(c.num_sources) + " source views, got " + std::to_string(sources.size()));
  const int nt = static_cast<int>(targets.size());
  JointVars out;
  out.layout = TokenLayout(c.num_sources, nt, c.registers, c.patches());
  out.layout.validate(options.multi_target);
  Var x = tokenize_sources(g, sources);
  if (nt > 0) x = nn::concat_rows(g, {x, embed_targets(g, targets)});
  out.tokens = run_trunk(g, x, out.layout, options.multi_target, nullptr, nullptr);
  std::vector<RowRange> cams, rays;
  for (int v = 0; v < c.num_sources; ++v) cams.push_back({out.layout.camera_row(v), out.layout.camera_row(v) + 1});
  for (int t = 0; t < nt; ++t) rays.push_back(out.layout.patch_rows(c.num_sources + t));
  out.camera = camera_head(g, gather_rows(g, out.tokens, cams));
  if (nt > 0) out.targets = decode_heads(g, gather_rows(g, out.tokens, rays), nt);
  return out;
}

template <typename T>
Stage1Vars RnG<T>::forward_stage1(Graph<T>& g, std::span<const ImageF> sources) const {
  const auto& c = config();
  require(static_cast<int>(sources.size()) == c.num_sources, ErrorCode::kShapeMismatch,
          "model expects " + std::to_string(c.num_sources) + " source views, got " + std::to_string(sources.size()));
  const auto layout = TokenLayout::sources_only(c.num_sources, c.registers, c.patches());
  Stage1Vars out{SceneCache(layout, fingerprint()), {}, {}};
  out.tokens = run_trunk(g, tokenize_sources(g, sources), layout, false, &out.cache, nullptr);
  std::vector<RowRange> cams;
  for (int v = 0; v < c.num_sources; ++v) cams.push_back({layout.camera_row(v), layout.camera_row(v) + 1});
  out.camera = camera_head(g, gather_rows(g, out.tokens, cams));
  out.cache.set_poses(poses_from_head(g.value(out.camera)));
  out.cache.seal(c.layers);
  return out;
}

template <typename T>
TargetVars RnG<T>::forward_stage2(Graph<T>& g, std::span<const CameraPose> targets, const SceneCache& cache) const {
  const auto& c = config();
  cache.check_usable(fingerprint());
  const auto& cl = cache.layout();
  require(cl.num_sources() == c.num_sources && cl.registers() == c.registers && cl.patches() == c.patches(),
          ErrorCode::kConfigMismatch, "scene cache layout does not match the model");
  const int nt = static_cast<int>(targets.size());
  if (nt == 0) return TargetVars{};
  const TokenLayout layout(0, nt, c.registers, c.patches());
  const Var tokens = run_trunk(g, embed_targets(g, targets), layout, true, nullptr, &cache);
  std::vector<RowRange> rays;
  for (int t = 0; t < nt; ++t) rays.push_back(layout.patch_rows(t));
  return decode_heads(g, gather_rows(g, tokens, rays), nt);
}

template <typename T>
std::vector<CameraPose> RnG<T>::poses_from_head(const Mat<T>& raw) const {
  require(raw.cols() == 9, ErrorCode::kShapeMismatch, "camera head output must have 9 columns");
  const int res = config().resolution;
  std::vector<CameraPose> poses;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const Eigen::Matrix<double, 1, 9> r = raw.row(i).template cast<double>();
    CameraPose pose;
    pose.rotation = geometry::rotation_from_6d(r.segment<3>(0).transpose(), r.segment<3>(3).transpose());
    pose.center = r.segment<3>(6).transpose();
    pose.intrinsics = geometry::default_intrinsics(res, res);
    pose.width = res;
    pose.height = res;
    poses.push_back(pose);
  }
  return poses;
}

template <typename T>
std::vector<TargetMaps> RnG<T>::maps_from(const Graph<T>& g, const TargetVars& vars) const {
  const int res = config().resolution;
  const auto hw = static_cast<Eigen::Index>(res) * res;
  std::vector<TargetMaps> maps;
  for (int t = 0; t < vars.count; ++t) {
    TargetMaps m{ImageF(res, res, 3), ImageF(res, res, 3), ImageF(res, res, 1)};
    const auto& rgb = g.value(vars.rgb);
    const auto& xyz = g.value(vars.xyz);
    const auto& conf = g.value(vars.confidence);
    for (Eigen::Index px = 0; px < hw; ++px) {
      const auto row = t * hw + px;
      for (int k = 0; k < 3; ++k) {
        m.rgb.data[static_cast<std::size_t>(px * 3 + k)] = static_cast<float>(rgb(row, k));
        m.pointmap.data[static_cast<std::size_t>(px * 3 + k)] = static_cast<float>(xyz(row, k));
      }
      m.confidence.data[static_cast<std::size_t>(px)] = static_cast<float>(conf(row, 0));
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

template <typename T>
ModelOutputs RnG<T>::run_joint(std::span<const ImageF> sources, std::span<const CameraPose> targets,
                               const JointOptions& options) const {
  Graph<T> g(false);
  const auto vars = forward_joint(g, sources, targets, options);
  ModelOutputs out;
  out.poses = poses_from_head(g.value(vars.camera));
  out.targets = maps_from(g, vars.targets);
  return out;
}

template <typename T>
Stage1Result RnG<T>::run_stage1(std::span<const ImageF> sources) const {
  Graph<T> g(false);
  auto vars = forward_stage1(g, sources);
  auto poses = vars.cache.poses();
  return {std::move(vars.cache), std::move(poses)};
}

template <typename T>
std::vector<TargetMaps> RnG<T>::run_stage2(std::span<const CameraPose> targets, const SceneCache& cache) const {
  Graph<T> g(false);
  return maps_from(g, forward_stage2(g, targets, cache));
}

template class RnG<float>;
template class RnG<double>;

namespace {

std::uint64_t lin(std::uint64_t rows, std::uint64_t in, std::uint64_t out) { return 2 * rows * in * out; }

}  // namespace

FlopBreakdown analytic_flops(const ModelConfig& c, ForwardMode mode, int num_sources, int num_targets) {
  c.validate();
  require(num_sources >= 0 && num_targets >= 0, ErrorCode::kInvalidArgument, "negative view count");
  const std::uint64_t d = c.dim;
  const std::uint64_t p = c.patches();
  const std::uint64_t tpv = c.tokens_per_view();
  const std::uint64_t pp = static_cast<std::uint64_t>(c.patch) * c.patch;
  const std::uint64_t hidden = static_cast<std::uint64_t>(c.mlp_ratio) * d;
  const std::uint64_t ns = num_sources;
  const std::uint64_t nt = mode == ForwardMode::kStage1 ? 0 : num_targets;
  const auto attn = [&](std::uint64_t nq, std::uint64_t nk) { return 4 * nq * nk * d; };
  const auto sublayer = [&](std::uint64_t rows) {
    return lin(rows, d, 3 * d) + lin(rows, d, d) + lin(rows, d, hidden) + lin(rows, hidden, d);
  };
  const auto decoder = [&](std::uint64_t batch, std::uint64_t channels) {
    std::uint64_t f = lin(p, d, c.head_width);
    std::uint64_t size = c.grid();
    std::uint64_t cin = c.head_width;
    for (int cout : c.head_channels) {
      size *= 2;
      f += lin(size * size, 9 * cin, static_cast<std::uint64_t>(cout));
      cin = static_cast<std::uint64_t>(cout);
    }
    f += lin(size * size, cin, channels) + lin(p, d, pp * channels);
    return batch * f;
  };

  FlopBreakdown out;
  const bool with_sources = mode != ForwardMode::kStage2;
  const std::uint64_t rows = (with_sources ? ns * tpv : 0) + nt * tpv;
  out.embed = (with_sources ? lin(ns * p, 3 * pp, d) : 0) + lin(nt * p, 6 * pp, d);
  out.trunk_linear = static_cast<std::uint64_t>(c.layers) * 2 * sublayer(rows);
  std::uint64_t per_layer = nt * attn(tpv, tpv) + nt * attn(tpv, ns * tpv + tpv);
  if (with_sources) per_layer += ns * attn(tpv, tpv) + attn(ns * tpv, ns * tpv);
  out.trunk_attention = static_cast<std::uint64_t>(c.layers) * per_layer;
  if (with_sources) out.camera_head = lin(ns, d, c.camera_hidden) + lin(ns, c.camera_hidden, 9);
  out.decode = decoder(nt, 3) + decoder(nt, 4);
  return out;
}

}  // namespace rng::model
