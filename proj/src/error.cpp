// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/error.hpp"

namespace mawiprep {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::InvalidArgument: return "invalid-argument";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Format: return "format";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Validation: return "validation";
    case ErrorCategory::Conflict: return "conflict";
    case ErrorCategory::Consistency: return "consistency";
    case ErrorCategory::Schema: return "schema";
    case ErrorCategory::Truncated: return "truncated";
    case ErrorCategory::Unsupported: return "unsupported";
    case ErrorCategory::Reorder: return "reorder";
    case ErrorCategory::Contract: return "contract";
    case ErrorCategory::Internal: return "internal";
  }
  return "internal";
}

}  // namespace mawiprep
