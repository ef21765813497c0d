// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/net.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <functional>

namespace mawiprep {

IpAddress IpAddress::v4(std::span<const std::uint8_t, 4> bytes) {
  IpAddress a;
  a.family_ = 4;
  std::copy(bytes.begin(), bytes.end(), a.bytes_.begin());
  return a;
}

IpAddress IpAddress::v6(std::span<const std::uint8_t, 16> bytes) {
  IpAddress a;
  a.family_ = 6;
  std::copy(bytes.begin(), bytes.end(), a.bytes_.begin());
  return a;
}

IpAddress IpAddress::v4(std::uint32_t host_order) {
  const std::array<std::uint8_t, 4> b{static_cast<std::uint8_t>(host_order >> 24),
                                      static_cast<std::uint8_t>(host_order >> 16),
                                      static_cast<std::uint8_t>(host_order >> 8),
                                      static_cast<std::uint8_t>(host_order)};
  return v4(std::span<const std::uint8_t, 4>(b));
}

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
  // inet_pton needs a terminated string; addresses are short.
  if (text.empty() || text.size() > 63) return std::nullopt;
  const std::string s(text);
  std::array<std::uint8_t, 16> buf{};
  if (s.find(':') == std::string::npos) {
    if (inet_pton(AF_INET, s.c_str(), buf.data()) != 1) return std::nullopt;
    return v4(std::span<const std::uint8_t, 4>(buf.data(), 4));
  }
  if (inet_pton(AF_INET6, s.c_str(), buf.data()) != 1) return std::nullopt;
  return v6(std::span<const std::uint8_t, 16>(buf));
}

std::span<const std::uint8_t> IpAddress::bytes() const noexcept {
  switch (family_) {
    case 4: return {bytes_.data(), 4};
    case 6: return {bytes_.data(), 16};
    default: return {};
  }
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (family_ == 4) {
    inet_ntop(AF_INET, bytes_.data(), buf, sizeof(buf));
  } else if (family_ == 6) {
    inet_ntop(AF_INET6, bytes_.data(), buf, sizeof(buf));
  } else {
    return {};
  }
  return buf;
}

std::size_t IpAddress::hash() const noexcept {
  std::size_t h = family_;
  for (std::size_t i = 0; i < bytes_.size(); i += 8) {
    std::uint64_t word = 0;
    for (std::size_t j = 0; j < 8; ++j) word = (word << 8) | bytes_[i + j];
    hash_combine(h, std::hash<std::uint64_t>{}(word));
  }
  return h;
}

}  // namespace mawiprep
