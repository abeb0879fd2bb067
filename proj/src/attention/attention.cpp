// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/attention/attention.hpp"

#include "rng/common/error.hpp"
#include "rng/common/hash.hpp"

namespace rng::attention {

using nn::Graph;
using nn::Mat;
using nn::Var;

template <typename T>
AttentionOutput multi_head_attention(Graph<T>& g, Var x, const AttentionParams<T>& p, int heads, const nn::BlockMask& mask,
                                     std::span<const nn::RowRange> segments) {
  const int d = static_cast<int>(g.value(x).cols());
  const Var qkv = nn::linear(g, x, g.parameter(p.qkv_w), g.parameter(p.qkv_b), segments);
  const Var q = nn::slice_cols(g, qkv, 0, d);
  const Var k = nn::slice_cols(g, qkv, d, 2 * d);
  const Var v = nn::slice_cols(g, qkv, 2 * d, 3 * d);
  const Var att = nn::block_attention(g, q, k, v, heads, mask);
  const Var out = nn::linear(g, att, g.parameter(p.out_w), g.parameter(p.out_b), segments);
  return {out, k, v};
}

template <typename T>
AttentionOutput masked_global_attention(Graph<T>& g, Var x, const AttentionParams<T>& p, int heads,
                                        const TokenLayout& layout, bool allow_multi_target) {
  require(g.value(x).rows() == layout.total_tokens(), ErrorCode::kShapeMismatch,
          "token count does not match the layout");
  const auto segments = layout.row_segments();
  return multi_head_attention(g, x, p, heads, global_mask(layout, allow_multi_target), segments);
}

template <typename T>
Var frame_attention(Graph<T>& g, Var x, const AttentionParams<T>& p, int heads, const TokenLayout& layout) {
  require(g.value(x).rows() == layout.total_tokens(), ErrorCode::kShapeMismatch,
          "token count does not match the layout");
  const auto segments = layout.row_segments();
  return multi_head_attention(g, x, p, heads, frame_mask(layout), segments).out;
}

SceneCache::SceneCache(TokenLayout source_layout, std::string model_fingerprint)
    : layout_(std::move(source_layout)), fingerprint_(std::move(model_fingerprint)) {
  require(layout_.num_targets() == 0, ErrorCode::kStructural, "a scene cache holds source views only");
}

void SceneCache::require_mutable() const {
  require(!sealed_, ErrorCode::kStructural, "scene cache is sealed");
}

void SceneCache::add_block(Mat<float> k, Mat<float> v) {
  require_mutable();
  require(k.rows() == tokens() && v.rows() == tokens() && k.cols() == v.cols(), ErrorCode::kShapeMismatch,
          "cached block does not match the source layout");
  if (!blocks_.empty()) {
    require(k.cols() == blocks_.front().k.cols(), ErrorCode::kShapeMismatch, "cached block width changed");
  }
  blocks_.push_back({std::move(k), std::move(v)});
}

void SceneCache::set_poses(std::vector<geometry::CameraPose> poses) {
  require_mutable();
  poses_ = std::move(poses);
}

void SceneCache::seal(int expected_blocks) {
  require_mutable();
  require(num_blocks() == expected_blocks, ErrorCode::kStructural,
          "scene cache has " + std::to_string(num_blocks()) + " blocks, model depth is " +
              std::to_string(expected_blocks));
  sealed_ = true;
}

const SceneCache::Block& SceneCache::block(int i) const {
  require(i >= 0 && i < num_blocks(), ErrorCode::kShapeMismatch, "cache block index out of range");
  return blocks_[static_cast<std::size_t>(i)];
}

void SceneCache::check_usable(const std::string& fingerprint) const {
  require(sealed_, ErrorCode::kUnsealedCache, "scene cache is not sealed");
  require(fingerprint == fingerprint_, ErrorCode::kStaleCache, "scene cache was built by different model weights");
}

std::string SceneCache::content_hash() const {
  Sha256 h;
  h.update(fingerprint_);
  const int dims[4] = {layout_.num_sources(), layout_.registers(), layout_.patches(), num_blocks()};
  h.update(dims, sizeof(dims));
  for (const auto& b : blocks_) {
    h.update(b.k.data(), static_cast<std::size_t>(b.k.size()) * sizeof(float));
    h.update(b.v.data(), static_cast<std::size_t>(b.v.size()) * sizeof(float));
  }
  for (const auto& p : poses_) {
    h.update(p.rotation.data(), 9 * sizeof(double));
    h.update(p.center.data(), 3 * sizeof(double));
  }
  return h.hex_digest();
}

io::RngtContainer SceneCache::to_container() const {
  io::RngtContainer c;
  for (int i = 0; i < num_blocks(); ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    const auto rows = static_cast<std::uint32_t>(b.k.rows());
    const auto cols = static_cast<std::uint32_t>(b.k.cols());
    c.add("k." + std::to_string(i), {rows, cols}, std::vector<float>(b.k.data(), b.k.data() + b.k.size()));
    c.add("v." + std::to_string(i), {rows, cols}, std::vector<float>(b.v.data(), b.v.data() + b.v.size()));
  }
  nlohmann::json poses = nlohmann::json::array();
  for (const auto& p : poses_) {
    nlohmann::json j;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) j["rotation"].push_back(p.rotation(r, col));
    }
    for (int i = 0; i < 3; ++i) j["center"].push_back(p.center[i]);
    j["intrinsics"] = {p.intrinsics.fx, p.intrinsics.fy, p.intrinsics.cx, p.intrinsics.cy};
    j["size"] = {p.width, p.height};
    poses.push_back(j);
  }
  c.metadata() = {{"kind", "scene_cache"},
                  {"layout", {{"sources", layout_.num_sources()},
                              {"registers", layout_.registers()},
                              {"patches", layout_.patches()}}},
                  {"fingerprint", fingerprint_},
                  {"sealed", sealed_},
                  {"poses", poses}};
  return c;
}

SceneCache SceneCache::from_container(const io::RngtContainer& c) {
  const auto& meta = c.metadata();
  require(meta.value("kind", "") == "scene_cache", ErrorCode::kCorruptFile, "container is not a scene cache");
  const auto& l = meta.at("layout");
  SceneCache cache(TokenLayout::sources_only(l.at("sources").get<int>(), l.at("registers").get<int>(),
                                             l.at("patches").get<int>()),
                   meta.at("fingerprint").get<std::string>());
  for (int i = 0; c.contains("k." + std::to_string(i)); ++i) {
    const auto& k = c.get("k." + std::to_string(i));
    const auto& v = c.get("v." + std::to_string(i));
    require(k.dims.size() == 2 && v.dims == k.dims, ErrorCode::kCorruptFile, "malformed cached block");
    Mat<float> km = Eigen::Map<const Mat<float>>(k.data.data(), k.dims[0], k.dims[1]);
    Mat<float> vm = Eigen::Map<const Mat<float>>(v.data.data(), v.dims[0], v.dims[1]);
    cache.add_block(std::move(km), std::move(vm));
  }
  std::vector<geometry::CameraPose> poses;
  for (const auto& j : meta.at("poses")) {
    geometry::CameraPose p;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) p.rotation(r, col) = j.at("rotation").at(r * 3 + col).get<double>();
    }
    for (int i = 0; i < 3; ++i) p.center[i] = j.at("center").at(i).get<double>();
    const auto& k = j.at("intrinsics");
    p.intrinsics = {k.at(0).get<double>(), k.at(1).get<double>(), k.at(2).get<double>(), k.at(3).get<double>()};
    p.width = j.at("size").at(0).get<int>();
    p.height = j.at("size").at(1).get<int>();
    poses.push_back(p);
  }
  cache.set_poses(std::move(poses));
  if (meta.value("sealed", false)) cache.seal(cache.num_blocks());
  return cache;
}

template <typename T>
Var query_with_cache(Graph<T>& g, Var target_x, const AttentionParams<T>& p, int heads, const SceneCache& cache, int block,
                     const TokenLayout& targets) {
  require(cache.sealed(), ErrorCode::kUnsealedCache, "scene cache is not sealed");
  require(targets.num_sources() == 0, ErrorCode::kStructural, "stage-2 layout must hold targets only");
  const auto& X = g.value(target_x);
  const int d = static_cast<int>(X.cols());
  if (X.rows() == 0) return g.constant(Mat<T>(0, d));
  require(X.rows() == targets.total_tokens(), ErrorCode::kShapeMismatch, "target tokens do not match the layout");
  const auto& cached = cache.block(block);
  require(cached.k.cols() == d, ErrorCode::kShapeMismatch, "cached keys have a different width");

  const auto segments = targets.row_segments();
  const Var qkv = nn::linear(g, target_x, g.parameter(p.qkv_w), g.parameter(p.qkv_b), segments);
  const Var q = nn::slice_cols(g, qkv, 0, d);
  const Var k = nn::concat_rows(g, {g.constant(cached.k.template cast<T>()), nn::slice_cols(g, qkv, d, 2 * d)});
  const Var v = nn::concat_rows(g, {g.constant(cached.v.template cast<T>()), nn::slice_cols(g, qkv, 2 * d, 3 * d)});
  const int ns = cache.tokens();
  nn::BlockMask mask;
  for (const auto& view : targets.views()) {
    mask.push_back({view.tokens, {{0, ns}, {ns + view.tokens.begin, ns + view.tokens.end}}});
  }
  const Var att = nn::block_attention(g, q, k, v, heads, mask);
  return nn::linear(g, att, g.parameter(p.out_w), g.parameter(p.out_b), segments);
}

#define RNG_ATTENTION_INSTANTIATE(T)                                                                               \
  template AttentionOutput multi_head_attention<T>(Graph<T>&, Var, const AttentionParams<T>&, int, const nn::BlockMask&, \
                                                   std::span<const nn::RowRange>);                                  \
  template AttentionOutput masked_global_attention<T>(Graph<T>&, Var, const AttentionParams<T>&, int, const TokenLayout&, \
                                                      bool);                                                        \
  template Var frame_attention<T>(Graph<T>&, Var, const AttentionParams<T>&, int, const TokenLayout&);                    \
  template Var query_with_cache<T>(Graph<T>&, Var, const AttentionParams<T>&, int, const SceneCache&, int,                \
                                   const TokenLayout&);

RNG_ATTENTION_INSTANTIATE(float)
RNG_ATTENTION_INSTANTIATE(double)

}  // namespace rng::attention
