// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/model/config.hpp"

#include <string>

#include "rng/common/error.hpp"

namespace rng::model {

int ModelConfig::upsample_stages() const {
  int stages = 0;
  for (int p = patch; p > 1; p /= 2) ++stages;
  return stages;
}

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::kInvalidArgument, "model config: " + what); };
  check(layers >= 1, "layers must be at least 1");
  check(dim > 0 && heads > 0 && dim % heads == 0, "dim must be divisible by heads");
  check(dim % 4 == 0, "dim must be divisible by 4 for the 2D positional encoding");
  check(patch >= 2 && (patch & (patch - 1)) == 0, "patch size must be a power of two");
  check(resolution > 0 && resolution % patch == 0, "resolution must be divisible by the patch size");
  check(registers >= 0, "register count must be non-negative");
  check(mlp_ratio >= 1, "mlp_ratio must be positive");
  check(num_sources >= 1, "at least one source view");
  check(camera_hidden > 0 && head_width > 0, "head widths must be positive");
  check(static_cast<int>(head_channels.size()) == upsample_stages(),
        "head_channels needs one entry per 2x upsampling stage (" + std::to_string(upsample_stages()) + ")");
  for (int c : head_channels) check(c > 0, "head channels must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"layers", layers},
          {"dim", dim},
          {"heads", heads},
          {"patch", patch},
          {"registers", registers},
          {"resolution", resolution},
          {"mlp_ratio", mlp_ratio},
          {"num_sources", num_sources},
          {"camera_hidden", camera_hidden},
          {"head_width", head_width},
          {"head_channels", head_channels},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kInvalidArgument, "model config must be a JSON object");
  ModelConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "layers") c.layers = value.get<int>();
      else if (key == "dim") c.dim = value.get<int>();
      else if (key == "heads") c.heads = value.get<int>();
      else if (key == "patch") c.patch = value.get<int>();
      else if (key == "registers") c.registers = value.get<int>();
      else if (key == "resolution") c.resolution = value.get<int>();
      else if (key == "mlp_ratio") c.mlp_ratio = value.get<int>();
      else if (key == "num_sources") c.num_sources = value.get<int>();
      else if (key == "camera_hidden") c.camera_hidden = value.get<int>();
      else if (key == "head_width") c.head_width = value.get<int>();
      else if (key == "head_channels") c.head_channels = value.get<std::vector<int>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else fail(ErrorCode::kInvalidArgument, "unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace rng::model
