// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the test binaries: frame construction, temp dirs.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mawiprep/annotations.hpp"
#include "mawiprep/capture.hpp"

namespace mawiprep::testing {

#ifndef MAWIPREP_FIXTURE_DIR
#define MAWIPREP_FIXTURE_DIR "tests/fixtures"
#endif

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MAWIPREP_FIXTURE_DIR) / name;
}

struct PacketSpec {
  std::int64_t ts_us = 0;
  std::string src = "10.0.0.1";
  std::string dst = "10.0.0.2";
  std::uint16_t sport = 1000;
  std::uint16_t dport = 2000;
  std::uint8_t proto = capture::kProtoUdp;
  std::uint32_t payload = 0;
  std::uint8_t flags = 0;  // TCP only
  std::uint16_t window = 8192;
  std::uint16_t urgent = 0;
};

inline void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

/// Ethernet + IPv4/IPv6 + TCP (20 bytes) / UDP (8 bytes) / bare payload.
inline std::vector<std::uint8_t> build_frame(const PacketSpec& s) {
  const auto src = *IpAddress::parse(s.src);
  const auto dst = *IpAddress::parse(s.dst);
  std::uint32_t l4 = s.proto == capture::kProtoTcp ? 20 : s.proto == capture::kProtoUdp ? 8 : 0;
  std::vector<std::uint8_t> f{0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0x00, 0x11, 0x22, 0x33, 0x44, 0x55};
  if (src.is_v4()) {
    put16(f, 0x0800);
    const std::uint16_t total = static_cast<std::uint16_t>(20 + l4 + s.payload);
    f.insert(f.end(), {0x45, 0x00});
    put16(f, total);
    f.insert(f.end(), {0x00, 0x01, 0x00, 0x00, 64, s.proto, 0x00, 0x00});
    for (auto b : src.bytes()) f.push_back(b);
    for (auto b : dst.bytes()) f.push_back(b);
  } else {
    put16(f, 0x86dd);
    f.insert(f.end(), {0x60, 0x00, 0x00, 0x00});
    put16(f, static_cast<std::uint16_t>(l4 + s.payload));
    f.push_back(s.proto);
    f.push_back(64);
    for (auto b : src.bytes()) f.push_back(b);
    for (auto b : dst.bytes()) f.push_back(b);
  }
  if (s.proto == capture::kProtoTcp) {
    put16(f, s.sport);
    put16(f, s.dport);
    f.insert(f.end(), {0, 0, 0, 1, 0, 0, 0, 0, 0x50, s.flags});
    put16(f, s.window);
    put16(f, 0);
    put16(f, s.urgent);
  } else if (s.proto == capture::kProtoUdp) {
    put16(f, s.sport);
    put16(f, s.dport);
    put16(f, static_cast<std::uint16_t>(8 + s.payload));
    put16(f, 0);
  }
  f.insert(f.end(), s.payload, 0x5a);
  return f;
}

inline capture::PacketRecord make_packet(const PacketSpec& s) {
  const auto frame = build_frame(s);
  return capture::dissect(frame, capture::LinkType::Ethernet, s.ts_us, static_cast<std::uint32_t>(frame.size()));
}

inline capture::PacketRecord udp(std::int64_t ts, std::string src, std::uint16_t sport, std::string dst,
                                 std::uint16_t dport, std::uint32_t payload) {
  PacketSpec s;
  s.ts_us = ts;
  s.src = std::move(src);
  s.sport = sport;
  s.dst = std::move(dst);
  s.dport = dport;
  s.payload = payload;
  return make_packet(s);
}

inline capture::PacketRecord tcp(std::int64_t ts, std::string src, std::uint16_t sport, std::string dst,
                                 std::uint16_t dport, std::uint8_t flags, std::uint32_t payload = 0,
                                 std::uint16_t window = 8192) {
  PacketSpec s;
  s.ts_us = ts;
  s.src = std::move(src);
  s.sport = sport;
  s.dst = std::move(dst);
  s.dport = dport;
  s.proto = capture::kProtoTcp;
  s.flags = flags;
  s.payload = payload;
  s.window = window;
  return make_packet(s);
}

/// An ARP frame (non-IP).
inline capture::PacketRecord arp(std::int64_t ts) {
  std::vector<std::uint8_t> f(42, 0);
  f[12] = 0x08;
  f[13] = 0x06;
  return capture::dissect(f, capture::LinkType::Ethernet, ts, 42);
}

inline annotations::AnomalyFilter filter(std::optional<std::string> src, std::optional<std::uint16_t> sport,
                                         std::optional<std::string> dst, std::optional<std::uint16_t> dport,
                                         std::optional<std::uint8_t> proto = std::nullopt,
                                         std::optional<annotations::TimeWindow> window = std::nullopt) {
  annotations::AnomalyFilter f;
  if (src) f.src_ip = IpAddress::parse(*src);
  if (dst) f.dst_ip = IpAddress::parse(*dst);
  f.src_port = sport;
  f.dst_port = dport;
  f.protocol = proto;
  f.window = window;
  return f;
}

inline annotations::AnomalyRecord anomaly(std::string id, annotations::Label label,
                                          std::vector<annotations::AnomalyFilter> filters) {
  annotations::AnomalyRecord r;
  r.anomaly_id = std::move(id);
  r.label = label;
  r.taxonomy = "unk";
  r.heuristic = 999;
  r.nb_detectors = 1;
  r.filters = std::move(filters);
  return r;
}

/// Removes the directory on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "mawiprep-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mawiprep::testing
