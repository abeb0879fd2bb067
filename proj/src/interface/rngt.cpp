// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/interface/rngt.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "rng/common/error.hpp"

namespace rng::io {

static_assert(std::endian::native == std::endian::little, "RNGT codec assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'N', 'G', 'T'};
constexpr std::uint8_t kFloat32 = 0;

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - pos_ >= n, ErrorCode::kCorruptFile, "truncated RNGT container");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t NamedTensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void RngtContainer::add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data) {
  require(!contains(name), ErrorCode::kInvalidArgument, "duplicate RNGT tensor name: " + name);
  require(name.size() <= std::numeric_limits<std::uint16_t>::max(), ErrorCode::kInvalidArgument,
          "RNGT tensor name too long");
  require(dims.size() <= std::numeric_limits<std::uint8_t>::max(), ErrorCode::kInvalidArgument,
          "RNGT tensor rank too large");
  NamedTensor t{std::move(name), std::move(dims), std::move(data)};
  require(t.numel() == t.data.size(), ErrorCode::kShapeMismatch,
          "RNGT tensor '" + t.name + "' payload does not match its dims");
  tensors_.push_back(std::move(t));
}

bool RngtContainer::contains(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const NamedTensor& RngtContainer::get(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  fail(ErrorCode::kNotFound, "RNGT tensor not found: " + std::string(name));
}

std::string RngtContainer::to_bytes() const {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& t : tensors_) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, kFloat32);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  const std::string meta = metadata_.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  return out;
}

RngtContainer RngtContainer::from_bytes(std::string_view bytes) {
  Reader in(bytes);
  require(in.take(4) == std::string_view(kMagic, 4), ErrorCode::kCorruptFile, "bad RNGT magic");
  const auto version = in.get<std::uint32_t>();
  require(version == kVersion, ErrorCode::kCorruptFile, "unsupported RNGT version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  RngtContainer c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint16_t>();
    std::string name(in.take(name_len));
    require(in.get<std::uint8_t>() == kFloat32, ErrorCode::kCorruptFile, "unsupported RNGT dtype");
    const auto rank = in.get<std::uint8_t>();
    std::vector<std::uint32_t> dims(rank);
    std::size_t numel = 1;
    for (auto& d : dims) {
      d = in.get<std::uint32_t>();
      numel *= d;
    }
    require(numel <= bytes.size() / sizeof(float), ErrorCode::kCorruptFile, "RNGT tensor larger than file");
    const auto payload = in.take(numel * sizeof(float));
    std::vector<float> data(numel);
    std::memcpy(data.data(), payload.data(), payload.size());
    require(!c.contains(name), ErrorCode::kCorruptFile, "duplicate RNGT tensor name: " + name);
    c.tensors_.push_back(NamedTensor{std::move(name), std::move(dims), std::move(data)});
  }
  const auto meta_len = in.get<std::uint32_t>();
  const auto meta = in.take(meta_len);
  require(in.done(), ErrorCode::kCorruptFile, "trailing bytes after RNGT metadata");
  try {
    c.metadata_ = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptFile, std::string("bad RNGT metadata: ") + e.what());
  }
  return c;
}

void RngtContainer::save(const std::string& path) const {
  const std::string bytes = to_bytes();
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing " + path);
}

RngtContainer RngtContainer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

}  // namespace rng::io
