// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rng::io {

/// One float32 tensor inside an RNGT container.
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const;
};

/// Binary tensor container:
///
///   "RNGT" | version u32 | count u32 |
///   count x { name_len u16 | name utf8 | dtype u8 (0 = float32) | rank u8 |
///             dims u32[rank] | payload } |
///   meta_len u32 | meta json
///
/// All integers and payloads are little-endian. Tensor order is insertion
/// order, so write -> read -> write is byte identical.
class RngtContainer {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data);
  bool contains(std::string_view name) const;
  const NamedTensor& get(std::string_view name) const;
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  nlohmann::json& metadata() { return metadata_; }
  const nlohmann::json& metadata() const { return metadata_; }

  std::string to_bytes() const;
  static RngtContainer from_bytes(std::string_view bytes);

  void save(const std::string& path) const;
  static RngtContainer load(const std::string& path);

 private:
  std::vector<NamedTensor> tensors_;
  nlohmann::json metadata_ = nlohmann::json::object();
};

}  // namespace rng::io
