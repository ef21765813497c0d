// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mawiprep {

/// Coarse error classes. Each maps 1:1 onto a C API status code and a CLI
/// exit code, so keep the numbering stable.
enum class ErrorCategory {
  InvalidArgument = 1,
  Io = 2,
  Format = 3,
  Parse = 4,
  Validation = 5,
  Conflict = 6,
  Consistency = 7,
  Schema = 8,
  Truncated = 9,
  Unsupported = 10,
  Reorder = 11,
  Contract = 12,
  Internal = 13,
};

std::string_view category_name(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Raised after the last complete packet of a capture whose tail is cut off.
class TruncatedCaptureError : public Error {
 public:
  TruncatedCaptureError(std::size_t packets_read, const std::string& message)
      : Error(ErrorCategory::Truncated, message), packets_read_(packets_read) {}

  std::size_t packets_read() const noexcept { return packets_read_; }

 private:
  std::size_t packets_read_;
};

class ReorderError : public Error {
 public:
  ReorderError(std::size_t packet_index, const std::string& message)
      : Error(ErrorCategory::Reorder, message), packet_index_(packet_index) {}

  std::size_t packet_index() const noexcept { return packet_index_; }

 private:
  std::size_t packet_index_;
};

}  // namespace mawiprep
