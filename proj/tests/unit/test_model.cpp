#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rng/common/error.hpp"
#include "rng/model/model.hpp"
#include "rng/nn/ops.hpp"
#include "rng/scenegen/dataset.hpp"

using namespace rng;
using namespace rng::model;
using geometry::CameraPose;
using nn::Graph;
using nn::Mat;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 3) {
  ModelConfig c;
  c.layers = 2;
  c.dim = 16;
  c.heads = 2;
  c.patch = 4;
  c.registers = 2;
  c.resolution = 16;
  c.mlp_ratio = 2;
  c.num_sources = 3;
  c.camera_hidden = 8;
  c.head_width = 8;
  c.head_channels = {6, 4};
  c.seed = seed;
  return c;
}

std::vector<ImageF> random_images(int n, int res, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<ImageF> out;
  for (int i = 0; i < n; ++i) {
    ImageF img(res, res, 3);
    for (auto& v : img.data) v = u(rng);
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<CameraPose> random_poses(int n, int res, std::uint64_t seed) {
  return scenegen::sample_cameras(seed, n, 1.8, 3.2, res, res);
}

double max_abs_diff(const ImageF& a, const ImageF& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(double(a.data[i]) - b.data[i]));
  return m;
}

template <typename T>
double max_abs_diff(const Mat<T>& a, const Mat<T>& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return static_cast<double>((a - b).cwiseAbs().maxCoeff());
}

// Independent Gram-Schmidt on the two 6D columns.
Eigen::Matrix3d gram_schmidt(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d e1 = a / std::sqrt(a.dot(a));
  Eigen::Vector3d u2 = b;
  u2 -= e1 * e1.dot(b);
  const Eigen::Vector3d e2 = u2 / std::sqrt(u2.dot(u2));
  Eigen::Vector3d e3;
  e3 << e1.y() * e2.z() - e1.z() * e2.y(), e1.z() * e2.x() - e1.x() * e2.z(), e1.x() * e2.y() - e1.y() * e2.x();
  Eigen::Matrix3d r;
  r << e1, e2, e3;
  return r;
}

}  // namespace

TEST_CASE("model config validation and JSON round trip") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.tokens_per_view() == 69);
  CHECK(c.upsample_stages() == 3);
  CHECK(ModelConfig::from_json(c.to_json()) == c);

  auto bad = c;
  bad.resolution = 60;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.layers = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.head_channels = {32, 16};
  CHECK_THROWS_AS(bad.validate(), Error);

  auto j = c.to_json();
  j["unknown"] = 1;
  CHECK_THROWS_AS(ModelConfig::from_json(j), Error);
  CHECK(ModelConfig::from_json({{"layers", 2}}).layers == 2);
}

TEST_CASE("weights: naming, init determinism, fingerprint, container round trip") {
  const auto c = tiny_config();
  const auto a = ModelWeights<float>::initialize(c);
  const auto b = ModelWeights<float>::initialize(c);
  CHECK(a.compute_fingerprint() == b.compute_fingerprint());
  CHECK(a.compute_fingerprint().size() == 64);

  auto names = a.named();
  std::vector<std::string> sorted;
  for (auto& [n, p] : names) sorted.push_back(n);
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(a.num_parameters() > 0);

  auto other_seed = tiny_config(4);
  CHECK(ModelWeights<float>::initialize(other_seed).compute_fingerprint() != a.compute_fingerprint());

  auto changed = a;
  changed.global[1].mlp.fc2_b.value(0, 3) += 1e-3f;
  CHECK(changed.compute_fingerprint() != a.compute_fingerprint());

  io::RngtContainer box;
  a.write_to(box);
  const auto back = ModelWeights<float>::read_from(io::RngtContainer::from_bytes(box.to_bytes()), &c);
  CHECK(back.compute_fingerprint() == a.compute_fingerprint());

  auto different = c;
  different.layers = 1;
  CHECK_THROWS_WITH_AS(ModelWeights<float>::read_from(box, &different), doctest::Contains("differs"), Error);
  try {
    ModelWeights<float>::read_from(box, &different);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigMismatch);
  }

  io::RngtContainer partial;
  partial.metadata() = box.metadata();
  for (const auto& t : box.tensors()) {
    if (t.name != "camera_head.fc1.w") partial.add(t.name, t.dims, t.data);
  }
  try {
    ModelWeights<float>::read_from(partial);
    FAIL("missing tensor accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCorruptFile);
  }

  const auto d = a.cast<double>();
  CHECK(d.compute_fingerprint() == a.compute_fingerprint());

  auto nonfinite = a;
  nonfinite.patch_w.value(0, 0) = std::nanf("");
  CHECK_THROWS_AS(nonfinite.validate(), Error);
}

TEST_CASE("model fingerprint is cached and invalidated by mutation") {
  RnG<float> m(ModelWeights<float>::initialize(tiny_config()));
  const auto fp = m.fingerprint();
  CHECK(m.fingerprint() == fp);
  m.mutable_weights().ray_b.value(0, 0) += 0.5f;
  CHECK(m.fingerprint() != fp);
  CHECK(m.fingerprint() == m.weights().compute_fingerprint());
}

TEST_CASE("positional encoding layout") {
  const auto pe = positional_encoding(4, 8);
  CHECK(pe.rows() == 16);
  // Row 0 (y = 0, x = 0): sin = 0, cos = 1 in every frequency.
  for (int i = 0; i < 2; ++i) {
    CHECK(pe(0, i) == 0.0);
    CHECK(pe(0, 2 + i) == 1.0);
    CHECK(pe(0, 4 + i) == 0.0);
    CHECK(pe(0, 6 + i) == 1.0);
  }
  // Token (y = 1, x = 2) at the lowest frequency.
  CHECK(pe(6, 0) == doctest::Approx(std::sin(1.0)));
  CHECK(pe(6, 4) == doctest::Approx(std::sin(2.0)));
  CHECK_THROWS_AS(positional_encoding(4, 6), Error);
}

TEST_CASE("tokenize_sources: sequence length, shared weights and special tokens") {
  ModelConfig c;  // desk configuration
  c.layers = 1;
  RnG<float> m(ModelWeights<float>::initialize(c));
  std::mt19937_64 rng(1);
  auto imgs = random_images(4, 64, rng);
  imgs[2] = imgs[1];
  Graph<float> g(false);
  const auto x = m.tokenize_sources(g, imgs);
  const auto& v = g.value(x);
  CHECK(v.rows() == 276);
  CHECK(v.cols() == 128);
  const int tpv = c.tokens_per_view();
  const int first_patch = 1 + c.registers;
  CHECK(v.block(tpv + first_patch, 0, 64, 128) == v.block(2 * tpv + first_patch, 0, 64, 128));
  CHECK(v.row(0) != v.row(tpv));                      // special vs shared camera token
  CHECK(v.row(tpv) == v.row(2 * tpv));                // shared camera tokens agree
  CHECK(v.block(1, 0, 4, 128) != v.block(tpv + 1, 0, 4, 128));

  auto wrong = random_images(4, 32, rng);
  try {
    m.tokenize_sources(g, wrong);
    FAIL("wrong resolution accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }
}

TEST_CASE("embed_targets: determinism, token count and continuity") {
  ModelConfig c;
  c.layers = 1;
  RnG<float> m(ModelWeights<float>::initialize(c));
  const auto pose = random_poses(1, 64, 5)[0];
  auto nudged = pose;
  nudged.rotation = pose.rotation * Eigen::AngleAxisd(1e-6, Eigen::Vector3d(0.3, 0.8, -0.5).normalized()).matrix();

  Graph<float> g(false);
  std::vector<CameraPose> same{pose, pose};
  const auto& two = g.value(m.embed_targets(g, same));
  CHECK(two.rows() == 2 * (1 + 4 + 64));
  CHECK(two.topRows(69) == two.bottomRows(69));

  std::vector<CameraPose> a{pose}, b{nudged};
  const Mat<float> ea = g.value(m.embed_targets(g, a));
  const Mat<float> eb = g.value(m.embed_targets(g, b));
  CHECK(ea.rows() == 69);
  CHECK(max_abs_diff(ea, eb) < 1e-4);

  auto bad = pose;
  bad.rotation(0, 0) += 0.1;
  std::vector<CameraPose> invalid{bad};
  CHECK_THROWS_AS(m.embed_targets(g, invalid), Error);
}

TEST_CASE("forward_joint output contract") {
  const auto c = tiny_config();
  RnG<float> m(ModelWeights<float>::initialize(c));
  std::mt19937_64 rng(2);
  const auto imgs = random_images(c.num_sources, c.resolution, rng);
  const auto targets = random_poses(1, c.resolution, 9);
  const auto out = m.run_joint(imgs, targets);
  REQUIRE(out.poses.size() == 3);
  REQUIRE(out.targets.size() == 1);
  const auto& t = out.targets[0];
  CHECK(t.rgb.height == 16);
  CHECK(t.rgb.channels == 3);
  CHECK(t.pointmap.channels == 3);
  CHECK(t.confidence.channels == 1);
  for (float v : t.rgb.data) CHECK((v >= 0.0f && v <= 1.0f));
  for (float v : t.confidence.data) CHECK(v > 0.0f);
  for (const auto& p : out.poses) {
    CHECK((p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-6);
    CHECK(p.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
  // Deterministic forward.
  const auto again = m.run_joint(imgs, targets);
  CHECK(again.targets[0].rgb.data == t.rgb.data);
  CHECK(again.poses[1] == out.poses[1]);

  std::vector<CameraPose> two{targets[0], targets[0]};
  CHECK_THROWS_AS(m.run_joint(imgs, two), Error);
  const auto multi = m.run_joint(imgs, two, JointOptions{true});
  CHECK(max_abs_diff(multi.targets[0].rgb, multi.targets[1].rgb) == 0.0);
  CHECK(max_abs_diff(multi.targets[0].rgb, t.rgb) < 1e-6);

  CHECK_THROWS_AS(m.run_joint(std::span(imgs).first(2), targets), Error);
}

TEST_CASE("initial camera head predicts near-canonical poses") {
  RnG<float> m(ModelWeights<float>::initialize(ModelConfig{}));
  std::mt19937_64 rng(7);
  const auto imgs = random_images(4, 64, rng);
  const auto out = m.run_joint(imgs, {});
  for (const auto& p : out.poses) {
    CHECK(geometry::rotation_angle_deg(p.rotation) < 30.0);
    CHECK((p.center - Eigen::Vector3d(0, 0, -1)).norm() < 0.5);
  }
}

TEST_CASE("camera head rotations match an independent Gram-Schmidt") {
  const auto c = tiny_config();
  RnG<double> m(ModelWeights<double>::initialize(c));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat<double> raw(20, 9);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = n(rng);
  raw.row(0) << 1, 0, 0, 0, 1, 0, 0, 0, -1;
  const auto poses = m.poses_from_head(raw);
  CHECK(poses[0].rotation == Eigen::Matrix3d::Identity());
  CHECK(poses[0].center == Eigen::Vector3d(0, 0, -1));
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d a = raw.row(i).segment<3>(0).transpose();
    const Eigen::Vector3d b = raw.row(i).segment<3>(3).transpose();
    CHECK((poses[static_cast<std::size_t>(i)].rotation - gram_schmidt(a, b)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(poses[static_cast<std::size_t>(i)].intrinsics == geometry::default_intrinsics(16, 16));
  }
}

TEST_CASE("zero head weights give spatially constant maps") {
  const auto c = tiny_config();
  auto w = ModelWeights<float>::initialize(c);
  for (auto* d : {&w.rgb_head, &w.point_head}) {
    d->proj_w.value.setZero();
    d->skip_w.value.setZero();
  }
  RnG<float> m(std::move(w));
  std::mt19937_64 rng(3);
  const auto out = m.run_joint(random_images(3, 16, rng), random_poses(1, 16, 4));
  const auto& t = out.targets[0];
  for (std::size_t px = 1; px < t.rgb.pixels(); ++px) {
    for (int k = 0; k < 3; ++k) {
      CHECK(t.rgb.data[px * 3 + k] == t.rgb.data[k]);
      CHECK(t.pointmap.data[px * 3 + k] == t.pointmap.data[k]);
    }
    CHECK(t.confidence.data[px] == t.confidence.data[0]);
  }
}

TEST_CASE("permuting non-reference sources permutes poses") {
  const auto c = tiny_config();
  RnG<float> m(ModelWeights<float>::initialize(c));
  std::mt19937_64 rng(5);
  auto imgs = random_images(3, 16, rng);
  const auto targets = random_poses(1, 16, 6);
  const auto base = m.run_joint(imgs, targets);
  std::swap(imgs[1], imgs[2]);
  const auto perm = m.run_joint(imgs, targets);
  CHECK((perm.poses[1].rotation - base.poses[2].rotation).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((perm.poses[2].center - base.poses[1].center).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((perm.poses[0].center - base.poses[0].center).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(max_abs_diff(perm.targets[0].rgb, base.targets[0].rgb) <= 1e-5);
}

TEST_CASE("source tokens and poses do not depend on the target") {
  const auto c = tiny_config();
  RnG<float> m(ModelWeights<float>::initialize(c));
  std::mt19937_64 rng(8);
  const auto imgs = random_images(3, 16, rng);
  const int ns_tokens = 3 * c.tokens_per_view();
  Graph<float> g0(false);
  const auto none = m.forward_joint(g0, imgs, {});
  const Mat<float> ref_tokens = g0.value(none.tokens);
  const Mat<float> ref_camera = g0.value(none.camera);
  for (std::uint64_t s = 0; s < 4; ++s) {
    Graph<float> g(false);
    const auto vars = m.forward_joint(g, imgs, random_poses(1, 16, 100 + s));
    CHECK(g.value(vars.tokens).topRows(ns_tokens) == ref_tokens);
    CHECK(g.value(vars.camera) == ref_camera);
  }
  Graph<float> g1(false);
  const auto st = m.forward_stage1(g1, imgs);
  CHECK(g1.value(st.tokens) == ref_tokens);
  CHECK(g1.value(st.camera) == ref_camera);
}

TEST_CASE("stage 1 + stage 2 reproduce the joint forward") {
  ModelConfig c;  // desk configuration
  RnG<float> m(ModelWeights<float>::initialize(c));
  std::mt19937_64 rng(12);
  const auto imgs = random_images(4, 64, rng);
  const auto s1 = m.run_stage1(imgs);
  CHECK(s1.cache.sealed());
  CHECK(s1.cache.num_blocks() == c.layers);
  CHECK(m.run_stage1(imgs).cache.content_hash() == s1.cache.content_hash());

  const auto poses = random_poses(3, 64, 77);
  for (const auto& pose : poses) {
    std::vector<CameraPose> one{pose};
    const auto joint = m.run_joint(imgs, one);
    const auto staged = m.run_stage2(one, s1.cache);
    CHECK(max_abs_diff(joint.targets[0].rgb, staged[0].rgb) <= 1e-4);
    CHECK(max_abs_diff(joint.targets[0].pointmap, staged[0].pointmap) <= 1e-4);
    CHECK(max_abs_diff(joint.targets[0].confidence, staged[0].confidence) <= 1e-4);
    for (std::size_t v = 0; v < 4; ++v) CHECK(joint.poses[v] == s1.poses[v]);
  }
  // Several targets in one stage-2 call are isolated from each other.
  const auto batch = m.run_stage2(poses, s1.cache);
  std::vector<CameraPose> last{poses[2]};
  CHECK(max_abs_diff(batch[2].rgb, m.run_stage2(last, s1.cache)[0].rgb) <= 1e-5);
}

TEST_CASE("stage 2 rejects stale or unsealed caches") {
  const auto c = tiny_config();
  RnG<float> m(ModelWeights<float>::initialize(c));
  std::mt19937_64 rng(13);
  const auto s1 = m.run_stage1(random_images(3, 16, rng));
  const auto pose = random_poses(1, 16, 1);
  CHECK_NOTHROW(m.run_stage2(pose, s1.cache));
  m.mutable_weights().final_norm.beta.value(0, 0) += 0.1f;
  try {
    m.run_stage2(pose, s1.cache);
    FAIL("stale cache accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStaleCache);
  }
  attention::SceneCache open(attention::TokenLayout::sources_only(3, c.registers, c.patches()), m.fingerprint());
  try {
    m.run_stage2(pose, open);
    FAIL("unsealed cache accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsealedCache);
  }
}

TEST_CASE("analytic FLOPs match the runtime counter") {
  for (const auto& c : {tiny_config(), ModelConfig{}}) {
    RnG<float> m(ModelWeights<float>::initialize(c));
    std::mt19937_64 rng(14);
    const auto imgs = random_images(c.num_sources, c.resolution, rng);
    const auto poses = random_poses(3, c.resolution, 15);
    std::vector<CameraPose> one{poses[0]};

    nn::FlopCounter::reset();
    m.run_joint(imgs, one);
    CHECK(nn::FlopCounter::get() == analytic_flops(c, ForwardMode::kJoint, c.num_sources, 1).total());

    nn::FlopCounter::reset();
    m.run_joint(imgs, poses, JointOptions{true});
    CHECK(nn::FlopCounter::get() == analytic_flops(c, ForwardMode::kJoint, c.num_sources, 3).total());

    nn::FlopCounter::reset();
    const auto s1 = m.run_stage1(imgs);
    CHECK(nn::FlopCounter::get() == analytic_flops(c, ForwardMode::kStage1, c.num_sources, 0).total());

    const auto per_query = analytic_flops(c, ForwardMode::kStage2, c.num_sources, 1);
    CHECK(per_query.camera_head == 0);
    nn::FlopCounter::reset();
    for (int q = 0; q < 10; ++q) m.run_stage2(one, s1.cache);
    CHECK(nn::FlopCounter::get() == 10 * per_query.total());
  }
  const ModelConfig desk;
  const double ratio = double(analytic_flops(desk, ForwardMode::kStage2, 4, 1).total()) /
                       double(analytic_flops(desk, ForwardMode::kJoint, 4, 1).total());
  CHECK(ratio < 0.33);
}

TEST_CASE("end-to-end parameter gradients match finite differences (float64)") {
  auto c = tiny_config(21);
  c.layers = 1;
  c.resolution = 8;
  c.head_channels = {4, 4};
  c.num_sources = 2;
  RnG<double> m(ModelWeights<double>::initialize(c));
  std::mt19937_64 rng(22);
  const auto imgs = random_images(2, 8, rng);
  const auto poses = random_poses(1, 8, 23);

  std::normal_distribution<double> n(0.0, 1.0);
  Mat<double> w_rgb(64, 3), w_xyz(64, 3), w_conf(64, 1), w_cam(2, 9);
  for (auto* mat : {&w_rgb, &w_xyz, &w_conf, &w_cam}) {
    for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = n(rng);
  }
  auto objective = [&](const RnG<double>& model, bool backward) {
    Graph<double> g(backward);
    const auto v = model.forward_joint(g, imgs, poses);
    const double f = (g.value(v.targets.rgb).array() * w_rgb.array()).sum() +
                     (g.value(v.targets.xyz).array() * w_xyz.array()).sum() +
                     (g.value(v.targets.confidence).array() * w_conf.array()).sum() +
                     (g.value(v.camera).array() * w_cam.array()).sum();
    if (backward) {
      g.backward({{v.targets.rgb, w_rgb}, {v.targets.xyz, w_xyz}, {v.targets.confidence, w_conf}, {v.camera, w_cam}});
    }
    return f;
  };
  m.weights().zero_grad();
  objective(m, true);

  RnG<double> probe = m;
  const double h = 1e-6;
  int checked = 0;
  for (auto& [name, p] : probe.mutable_weights().named()) {
    const auto* analytic = &m.weights().named()[static_cast<std::size_t>(checked)].second->grad;
    ++checked;
    std::uniform_int_distribution<Eigen::Index> pick(0, p->value.size() - 1);
    for (int trial = 0; trial < 2; ++trial) {
      const auto i = pick(rng);
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      const double fp = objective(probe, false);
      p->value.data()[i] = orig - h;
      const double fm = objective(probe, false);
      p->value.data()[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic->size() ? analytic->data()[i] : 0.0;
      INFO(name << "[" << i << "] analytic " << a << " numeric " << numeric);
      CHECK(std::abs(a - numeric) <= 1e-5 + 1e-4 * std::abs(numeric));
    }
  }
  CHECK(checked == static_cast<int>(m.weights().named().size()));
}
