#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rng/common/error.hpp"
#include "rng/trainer/trainer.hpp"

using namespace rng;
using namespace rng::trainer;

namespace {

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.steps = 40;
  c.warmup = 5;
  c.lr = 2e-3;
  c.accumulation = 2;
  c.dataset_size = 8;
  c.checkpoint_interval = 0;
  c.model.layers = 1;
  c.model.dim = 16;
  c.model.heads = 2;
  c.model.patch = 4;
  c.model.registers = 1;
  c.model.resolution = 16;
  c.model.mlp_ratio = 2;
  c.model.camera_hidden = 16;
  c.model.head_width = 8;
  c.model.head_channels = {8, 8};
  c.data.views_per_scene = 10;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rng_trainer_" + name);
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename T>
std::vector<nn::Mat<T>> grads_of(const model::ModelWeights<T>& w) {
  std::vector<nn::Mat<T>> out;
  for (const auto& [n, p] : w.named()) out.push_back(p->grad);
  return out;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  CHECK(lr_schedule(0, c) == 0.0);
  CHECK(lr_schedule(c.warmup, c) == doctest::Approx(6e-4).epsilon(1e-15));
  CHECK(lr_schedule(c.steps - 1, c) <= 1e-6 * c.lr);
  CHECK(lr_schedule(c.warmup / 2, c) == doctest::Approx(3e-4));
  // Continuous at the warmup/cosine junction.
  CHECK(std::abs(lr_schedule(c.warmup - 1, c) - lr_schedule(c.warmup, c)) <= c.lr / c.warmup + 1e-12);
  CHECK(std::abs(lr_schedule(c.warmup + 1, c) - lr_schedule(c.warmup, c)) <= 1e-8);
  double prev = c.lr;
  for (int s = c.warmup; s < c.steps; s += 97) {
    CHECK(lr_schedule(s, c) <= prev);
    prev = lr_schedule(s, c);
  }
  CHECK_THROWS_AS(lr_schedule(-1, c), Error);
  CHECK_THROWS_AS(lr_schedule(c.steps, c), Error);
}

TEST_CASE("train config JSON round trip and validation") {
  const auto c = tiny_train_config();
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.model == c.model);
  auto j = c.to_json();
  j["warmup"] = c.steps;
  CHECK_THROWS_AS(TrainConfig::from_json(j), Error);
  j = c.to_json();
  j["lr"] = 0.0;
  CHECK_THROWS_AS(TrainConfig::from_json(j), Error);
  j = c.to_json();
  j["bogus"] = 1;
  CHECK_THROWS_AS(TrainConfig::from_json(j), Error);
  CHECK(TrainConfig::from_json(nlohmann::json::object()).steps == 5000);
}

TEST_CASE("training stream is a pure function of seed and step") {
  const auto c = tiny_train_config();
  const auto a = training_batch(c, 3, 1);
  const auto b = training_batch(c, 3, 1);
  REQUIRE(a.size() == 3);
  CHECK(a[0].view_indices == b[0].view_indices);
  CHECK(a[2].target.rgb.data == b[2].target.rgb.data);
  CHECK(a[0].sources == a[1].sources);
  const auto other = training_batch(c, 4, 1);
  CHECK((other[0].view_indices != a[0].view_indices || other[0].target.rgb.data != a[0].target.rgb.data));
}

TEST_CASE("two trainers with the same seed produce identical losses") {
  Trainer a(tiny_train_config()), b(tiny_train_config());
  for (int i = 0; i < 4; ++i) CHECK(a.step_once().loss == b.step_once().loss);
  CHECK(a.model().fingerprint() == b.model().fingerprint());
}

TEST_CASE("zero learning rate leaves weights bit-identical") {
  const auto c = tiny_train_config();
  model::RnG<float> m(model::ModelWeights<float>::initialize(c.model));
  const auto before = m.weights().compute_fingerprint();
  auto state = AdamState<float>::zeros(m.weights());
  const losses::PerceptualBank bank(c.loss.feature_seed);
  std::vector<MicroBatch> window{training_batch(c, 0, 0)};
  const auto report = train_step(m, window, state, c, 0.0, bank);
  CHECK(report.total > 0.0);
  CHECK(m.weights().compute_fingerprint() == before);
  CHECK(state.t == 1);
}

TEST_CASE("gradient clipping bounds the global norm") {
  const auto c = tiny_train_config();
  model::RnG<float> m(model::ModelWeights<float>::initialize(c.model));
  const losses::PerceptualBank bank(c.loss.feature_seed);
  std::vector<MicroBatch> window{training_batch(c, 0, 0)};
  compute_gradients(m, window, c.loss, bank);
  const double before = clip_gradients(m.weights(), 1e9);
  REQUIRE(before > 1e-3);
  CHECK(clip_gradients(m.weights(), before / 4) == doctest::Approx(before));
  CHECK(clip_gradients(m.weights(), 1e9) == doctest::Approx(before / 4).epsilon(1e-5));
}

TEST_CASE("accumulation window equals one larger batch (float64)") {
  const auto c = tiny_train_config();
  model::RnG<double> m(model::ModelWeights<float>::initialize(c.model).cast<double>());
  const losses::PerceptualBank bank(c.loss.feature_seed);
  const auto b1 = training_batch(c, 0, 0);
  const auto b2 = training_batch(c, 0, 1);
  std::vector<MicroBatch> two{b1, b2};
  MicroBatch merged = b1;
  merged.insert(merged.end(), b2.begin(), b2.end());
  std::vector<MicroBatch> one{merged};

  const auto r2 = compute_gradients(m, two, c.loss, bank);
  const auto g2 = grads_of(m.weights());
  const auto r1 = compute_gradients(m, one, c.loss, bank);
  const auto g1 = grads_of(m.weights());
  CHECK(r1.total == doctest::Approx(r2.total).epsilon(1e-13));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK((g1[i] - g2[i]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("a multi-target forward equals separate single-target examples (float64)") {
  const auto c = tiny_train_config();
  model::RnG<double> m(model::ModelWeights<float>::initialize(c.model).cast<double>());
  const losses::PerceptualBank bank(c.loss.feature_seed);
  const auto group = training_batch(c, 2, 0);
  MicroBatch separate = group;
  for (auto& ex : separate) ex.sources = std::make_shared<std::vector<scenegen::RenderedView>>(*ex.sources);

  std::vector<MicroBatch> joint_window{group}, separate_window{separate};
  const auto rj = compute_gradients(m, joint_window, c.loss, bank);
  const auto gj = grads_of(m.weights());
  const auto rs = compute_gradients(m, separate_window, c.loss, bank);
  const auto gs = grads_of(m.weights());
  CHECK(rj.total == doctest::Approx(rs.total).epsilon(1e-12));
  CHECK(rj.cam == doctest::Approx(rs.cam).epsilon(1e-12));
  for (std::size_t i = 0; i < gj.size(); ++i) {
    const double scale = std::max(1.0, gs[i].cwiseAbs().maxCoeff());
    CHECK((gj[i] - gs[i]).cwiseAbs().maxCoeff() <= 1e-10 * scale);
  }
}

TEST_CASE("non-finite weights abort the step with diagnostics") {
  Trainer t(tiny_train_config());
  t.mutable_model().mutable_weights().point_head.out_b.value(0, 3) = std::nanf("");
  try {
    t.step_once();
    FAIL("non-finite step accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip and bit-exact resume") {
  const auto c = tiny_train_config();
  const auto path = temp_path("ckpt.rngt");
  const auto path2 = temp_path("ckpt2.rngt");

  Trainer straight(c);
  for (int i = 0; i < 3; ++i) straight.step_once();
  straight.save_checkpoint(path.string());

  auto resumed = Trainer::load_checkpoint(path.string());
  CHECK(resumed.step() == 3);
  resumed.save_checkpoint(path2.string());
  CHECK(read_bytes(path) == read_bytes(path2));

  const auto next_straight = straight.step_once();
  const auto next_resumed = resumed.step_once();
  CHECK(next_straight.loss == next_resumed.loss);
  CHECK(next_straight.grad_norm == next_resumed.grad_norm);
  CHECK(straight.model().fingerprint() == resumed.model().fingerprint());

  auto other = c.model;
  other.dim = 32;
  try {
    Trainer::load_checkpoint(path.string(), &other);
    FAIL("config mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigMismatch);
  }

  const auto bytes = read_bytes(path);
  {
    std::ofstream out(path2, std::ios::binary | std::ios::trunc);
    out << bytes.substr(0, bytes.size() / 2);
  }
  try {
    Trainer::load_checkpoint(path2.string());
    FAIL("truncated checkpoint accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCorruptFile);
  }
  CHECK(load_model(path.string()).fingerprint() == model::RnG<float>(Trainer::load_checkpoint(path.string()).model()).fingerprint());
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("run writes a JSON-lines log and a final checkpoint") {
  auto c = tiny_train_config();
  c.steps = 6;
  c.warmup = 2;
  c.log_interval = 2;
  c.checkpoint_interval = 4;
  const auto path = temp_path("run.rngt");
  std::ostringstream log;
  Trainer t(c);
  t.run(path.string(), &log);
  std::istringstream lines(log.str());
  std::string line;
  std::vector<int> steps;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"step", "lr", "total", "rgb_mse", "rgb_perceptual", "pmap", "cam"}) CHECK(j.contains(key));
    steps.push_back(j["step"].get<int>());
  }
  CHECK(steps == std::vector<int>{0, 2, 4, 5});
  CHECK(Trainer::load_checkpoint(path.string()).step() == 6);
  std::filesystem::remove(path);
}

TEST_CASE("loss decreases on a fixed 8-scene set") {
  auto c = tiny_train_config();
  c.steps = 600;
  c.warmup = 20;
  c.lr = 3e-3;
  c.dataset_size = 8;
  Trainer t(c);
  std::vector<double> windows(3, 0.0);
  t.run("", nullptr, [&](const StepLog& s) { windows[static_cast<std::size_t>(s.step / 200)] += s.loss.total / 200; });
  MESSAGE("window means: " << windows[0] << " " << windows[1] << " " << windows[2]);
  CHECK(windows[1] < windows[0]);
  CHECK(windows[2] < windows[1]);
}
