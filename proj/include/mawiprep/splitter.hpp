// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mawiprep/annotations.hpp"
#include "mawiprep/capture.hpp"

namespace mawiprep::splitter {

/// Destination of a packet: one anomaly of the day, or the benign remainder.
class PartitionId {
 public:
  static PartitionId benign() { return PartitionId(); }
  static PartitionId anomaly(std::string anomaly_id) { return PartitionId(std::move(anomaly_id)); }
  /// Inverse of key().
  static PartitionId from_key(std::string_view key);

  bool is_benign() const noexcept { return !anomaly_id_; }
  const std::string& anomaly_id() const;
  /// "benign" or "anomaly=<id>"; orders benign before every anomaly.
  std::string key() const;
  /// File-name-safe stem ("benign", "anomaly=<escaped id>").
  std::string file_stem() const;

  friend bool operator==(const PartitionId&, const PartitionId&) = default;
  friend auto operator<=>(const PartitionId&, const PartitionId&) = default;

 private:
  PartitionId() = default;
  explicit PartitionId(std::string id) : anomaly_id_(std::move(id)) {}
  std::optional<std::string> anomaly_id_;
};

/// True iff every present filter field equals the packet's field and the
/// packet time lies inside the window (when one is given). Non-IP packets
/// never match.
bool matches(const capture::PacketRecord& packet, const annotations::AnomalyFilter& filter);

struct SplitOptions {
  /// Also try each filter with source and destination swapped.
  bool symmetric_filters = false;
  /// Ignore notice-class anomalies; their packets fall through to benign.
  bool exclude_notice = false;
  /// Emit the per-packet metadata byproduct table next to the captures.
  bool packet_metadata = true;
};

struct RouteDecision {
  PartitionId partition = PartitionId::benign();
  std::size_t matched_anomalies = 0;
};

/// Precomputed filter index for one day. Filters are bucketed by their most
/// selective exact field (src IP, dst IP, dst port, src port); filters with
/// none of those (protocol-only) are scanned linearly.
class Router {
 public:
  Router(const annotations::DayAnnotations& day, SplitOptions options = {});

  RouteDecision route(const capture::PacketRecord& packet) const;
  const annotations::AnomalyRecord* anomaly(const PartitionId& partition) const;

 private:
  struct Entry {
    std::size_t anomaly_rank;  // position in precedence order
    annotations::AnomalyFilter filter;
  };
  void collect(const capture::PacketRecord& p, std::vector<std::size_t>& ranks, bool swapped) const;

  SplitOptions options_;
  std::vector<const annotations::AnomalyRecord*> ranked_;
  std::vector<Entry> entries_;
  std::unordered_map<IpAddress, std::vector<std::size_t>, IpAddressHash> by_src_ip_;
  std::unordered_map<IpAddress, std::vector<std::size_t>, IpAddressHash> by_dst_ip_;
  std::unordered_map<std::uint16_t, std::vector<std::size_t>> by_dst_port_;
  std::unordered_map<std::uint16_t, std::vector<std::size_t>> by_src_port_;
  std::vector<std::size_t> scan_;
};

/// Anomalous > suspicious > notice, ties to the smallest anomaly_id.
PartitionId route_packet(const capture::PacketRecord& packet, const annotations::DayAnnotations& day,
                         const SplitOptions& options = {});

struct SplitReport {
  std::map<std::string, std::uint64_t> partition_counts;  // by PartitionId::key()
  std::uint64_t total_packets = 0;
  std::uint64_t multi_match_packets = 0;
  std::uint64_t non_ip_packets = 0;

  bool consistent() const;
  std::string to_json() const;
  static SplitReport from_json(std::string_view text);

  friend bool operator==(const SplitReport&, const SplitReport&) = default;
};

inline constexpr const char* kSplitReportFile = "split_report.json";
inline constexpr const char* kPacketMetadataStem = "packets";

/// Routes every packet of `capture_path` into `<out_dir>/<file_stem>.pcap`
/// (one file per non-empty partition, relative order preserved) and writes
/// the report plus the packet metadata table. Output is staged in a sibling
/// temp directory and renamed over `out_dir` only on success.
SplitReport split_capture(const std::filesystem::path& capture_path, const annotations::DayAnnotations& day,
                          const std::filesystem::path& out_dir, const SplitOptions& options = {});

/// Packet metadata byproduct columns.
const TypeHints& packet_metadata_hints();

}  // namespace mawiprep::splitter
