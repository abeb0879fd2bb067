// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/interface/codec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <openssl/evp.h>
#include <png.h>

#include "rng/common/error.hpp"

namespace rng::io {

std::string encode_png(const ImageF& image) {
  require(image.channels == 1 || image.channels == 3, ErrorCode::kShapeMismatch, "PNG needs 1 or 3 channels");
  require(!image.empty(), ErrorCode::kEmptyInput, "empty image");
  std::vector<unsigned char> pixels(image.data.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  require(png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr) != 0, ErrorCode::kIo,
          std::string("PNG encoding failed: ") + img.message);
  std::string out(size, '\0');
  require(png_image_write_to_memory(&img, out.data(), &size, 0, pixels.data(), 0, nullptr) != 0, ErrorCode::kIo,
          std::string("PNG encoding failed: ") + img.message);
  out.resize(size);
  return out;
}

ImageF decode_png(std::string_view bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()) == 0) {
    fail(ErrorCode::kInvalidArgument, std::string("not a readable PNG: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(img));
  if (png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr) == 0) {
    png_image_free(&img);
    fail(ErrorCode::kInvalidArgument, std::string("PNG decoding failed: ") + img.message);
  }
  ImageF out(static_cast<int>(img.height), static_cast<int>(img.width), 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) out.data[i] = static_cast<float>(pixels[i]) / 255.0f;
  return out;
}

void save_png(const std::string& path, const ImageF& image) { write_file(path, encode_png(image)); }

ImageF load_png(const std::string& path) {
  try {
    return decode_png(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  require(text.size() % 4 == 0, ErrorCode::kInvalidArgument, "base64 length must be a multiple of 4");
  for (char c : text) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/' || c == '=';
    require(ok, ErrorCode::kInvalidArgument, "invalid base64 character");
  }
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  require(n >= 0, ErrorCode::kInvalidArgument, "malformed base64");
  // EVP_DecodeBlock keeps the bytes encoded by padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
}

}  // namespace rng::io
