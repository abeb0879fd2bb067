// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "rng/common/image.hpp"

namespace rng::io {

/// 8-bit PNG of a 1- or 3-channel image in [0, 1]; values are clamped and
/// rounded.
std::string encode_png(const ImageF& image);
/// Any PNG as an RGB image in [0, 1]; alpha is dropped.
ImageF decode_png(std::string_view bytes);

void save_png(const std::string& path, const ImageF& image);
ImageF load_png(const std::string& path);

std::string base64_encode(std::string_view bytes);
/// Throws kInvalidArgument on malformed input.
std::string base64_decode(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace rng::io
