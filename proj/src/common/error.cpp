// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/common/error.hpp"

namespace rng {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidCamera: return "invalid_camera";
    case ErrorCode::kDegenerateScale: return "degenerate_scale";
    case ErrorCode::kNotApplicable: return "not_applicable";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kStructural: return "structural";
    case ErrorCode::kStaleCache: return "stale_cache";
    case ErrorCode::kUnsealedCache: return "unsealed_cache";
    case ErrorCode::kConfigMismatch: return "config_mismatch";
    case ErrorCode::kCorruptFile: return "corrupt_file";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kNotFound: return "not_found";
  }
  return "unknown";
}

}  // namespace rng
