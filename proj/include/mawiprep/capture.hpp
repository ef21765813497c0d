// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mawiprep/net.hpp"

namespace mawiprep::capture {

enum class LinkType : std::uint32_t {
  Null = 0,
  Ethernet = 1,
  Raw = 101,
  LinuxSll = 113,
  Ipv4 = 228,
  Ipv6 = 229,
};

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
inline constexpr std::uint8_t kEce = 0x40;
inline constexpr std::uint8_t kCwr = 0x80;
}  // namespace tcp_flag

inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

/// One parsed packet. Lengths are taken from the IP header, so they describe
/// the packet as sent even when the capture kept only a snapshot of it.
/// `ip_version == 0` marks a non-IP frame (ARP, LLDP, ...), which downstream
/// stages ignore.
struct PacketRecord {
  std::int64_t ts_us = 0;
  std::uint8_t ip_version = 0;
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  std::uint32_t ip_header_len = 0;
  std::uint32_t transport_header_len = 0;
  std::uint32_t payload_len = 0;
  std::uint32_t wire_len = 0;
  std::optional<std::uint8_t> tcp_flags;
  std::optional<std::uint16_t> tcp_window;
  std::vector<std::uint8_t> raw_frame;

  bool is_ip() const noexcept { return ip_version != 0; }
  bool has_flag(std::uint8_t flag) const noexcept { return tcp_flags && (*tcp_flags & flag); }

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

/// Decodes link, network and transport headers of one captured frame.
/// Never throws: anything it cannot decode becomes a non-IP record.
PacketRecord dissect(std::span<const std::uint8_t> frame, LinkType link, std::int64_t ts_us,
                     std::uint32_t wire_len);

/// Sequential reader for classic pcap files, optionally gzip-compressed.
class CaptureReader {
 public:
  explicit CaptureReader(const std::filesystem::path& path);
  ~CaptureReader();
  CaptureReader(CaptureReader&&) noexcept;
  CaptureReader& operator=(CaptureReader&&) noexcept;
  CaptureReader(const CaptureReader&) = delete;
  CaptureReader& operator=(const CaptureReader&) = delete;

  LinkType link_type() const noexcept;
  bool nanosecond_resolution() const noexcept;
  bool compressed() const noexcept;
  std::uint32_t snaplen() const noexcept;

  /// Fills `out` with the next packet. Returns false at a clean end of file;
  /// throws TruncatedCaptureError when the file ends inside a packet.
  bool next(PacketRecord& out);
  std::size_t packets_read() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<PacketRecord> read_capture(const std::filesystem::path& path);

/// Writes a little-endian, microsecond-resolution pcap. The file is created
/// (truncating) unless `append` is set, in which case an existing file is
/// extended and a missing one is created with a fresh global header.
class CaptureWriter {
 public:
  CaptureWriter(const std::filesystem::path& path, LinkType link, bool append = false);
  ~CaptureWriter();
  CaptureWriter(CaptureWriter&&) noexcept;
  CaptureWriter& operator=(CaptureWriter&&) noexcept;
  CaptureWriter(const CaptureWriter&) = delete;
  CaptureWriter& operator=(const CaptureWriter&) = delete;

  void write(const PacketRecord& record);
  void close();
  std::size_t packets_written() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::size_t write_capture(std::span<const PacketRecord> records, const std::filesystem::path& path,
                          LinkType link = LinkType::Ethernet);

/// Serialized pcap bytes for one record (16-byte header + frame), for
/// callers that buffer output themselves.
void append_packet_bytes(std::vector<std::uint8_t>& buffer, const PacketRecord& record);
std::vector<std::uint8_t> global_header_bytes(LinkType link);

}  // namespace mawiprep::capture
