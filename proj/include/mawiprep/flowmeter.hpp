// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mawiprep/capture.hpp"
#include "mawiprep/table.hpp"

namespace mawiprep::flowmeter {

inline constexpr std::int64_t kDefaultFlowTimeoutUs = 120'000'000;
inline constexpr std::int64_t kDefaultActivityTimeoutUs = 5'000'000;
/// An inter-arrival gap longer than this starts a new subflow.
inline constexpr std::int64_t kSubflowGapUs = 1'000'000;
/// Bulk transfer: at least kBulkMinPackets consecutive payload packets in one
/// direction, each within kBulkGapUs of the previous, with no payload from the
/// other direction in between.
inline constexpr std::int64_t kBulkGapUs = 1'000'000;
inline constexpr std::size_t kBulkMinPackets = 4;
/// Init Win Bytes value for a direction without an observed TCP window.
inline constexpr double kNoWindow = -1.0;

/// Running min/max/mean and sample standard deviation (Welford).
class RunningStats {
 public:
  void add(double x) noexcept;
  std::size_t count() const noexcept { return n_; }
  double sum() const noexcept { return sum_; }
  double min() const noexcept { return n_ ? min_ : 0.0; }
  double max() const noexcept { return n_ ? max_ : 0.0; }
  double mean() const noexcept { return n_ ? mean_ : 0.0; }
  /// n-1 denominator; 0 for fewer than two samples.
  double variance() const noexcept;
  double stddev() const noexcept;

 private:
  std::size_t n_ = 0;
  double sum_ = 0.0;
  double min_ = 0.0;
  double max_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct StatSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;

  friend bool operator==(const StatSummary&, const StatSummary&) = default;
};

StatSummary running_stats(std::span<const double> values);

/// Numeric flow features in output column order.
enum class Feature : std::size_t {
  FlowDuration,
  TotalFwdPackets,
  TotalBwdPackets,
  TotalLengthFwd,
  TotalLengthBwd,
  FwdPacketLengthMax,
  FwdPacketLengthMin,
  FwdPacketLengthMean,
  FwdPacketLengthStd,
  BwdPacketLengthMax,
  BwdPacketLengthMin,
  BwdPacketLengthMean,
  BwdPacketLengthStd,
  FlowBytesPerSec,
  FlowPacketsPerSec,
  FlowIatMean,
  FlowIatStd,
  FlowIatMax,
  FlowIatMin,
  FwdIatTotal,
  FwdIatMean,
  FwdIatStd,
  FwdIatMax,
  FwdIatMin,
  BwdIatTotal,
  BwdIatMean,
  BwdIatStd,
  BwdIatMax,
  BwdIatMin,
  FwdPshFlags,
  BwdPshFlags,
  FwdUrgFlags,
  BwdUrgFlags,
  FwdHeaderLength,
  BwdHeaderLength,
  FwdPacketsPerSec,
  BwdPacketsPerSec,
  PacketLengthMin,
  PacketLengthMax,
  PacketLengthMean,
  PacketLengthStd,
  PacketLengthVariance,
  FinFlagCount,
  SynFlagCount,
  RstFlagCount,
  PshFlagCount,
  AckFlagCount,
  UrgFlagCount,
  CwrFlagCount,
  EceFlagCount,
  DownUpRatio,
  AveragePacketSize,
  FwdSegmentSizeAvg,
  BwdSegmentSizeAvg,
  FwdBytesPerBulkAvg,
  FwdPacketsPerBulkAvg,
  FwdBulkRateAvg,
  BwdBytesPerBulkAvg,
  BwdPacketsPerBulkAvg,
  BwdBulkRateAvg,
  SubflowFwdPackets,
  SubflowFwdBytes,
  SubflowBwdPackets,
  SubflowBwdBytes,
  FwdInitWinBytes,
  BwdInitWinBytes,
  FwdActDataPackets,
  FwdSegSizeMin,
  ActiveMean,
  ActiveStd,
  ActiveMax,
  ActiveMin,
  IdleMean,
  IdleStd,
  IdleMax,
  IdleMin,
  Count_,
};

inline constexpr std::size_t kFeatureCount = static_cast<std::size_t>(Feature::Count_);

std::string_view feature_name(Feature f) noexcept;
const std::vector<std::string>& feature_names();

/// Full output header: identification columns, features, "Label".
const std::vector<std::string>& emit_schema();
inline constexpr std::array<std::string_view, 7> kIdentifierColumns{
    "Flow ID", "Src IP", "Src Port", "Dst IP", "Dst Port", "Protocol", "Timestamp"};
inline constexpr std::string_view kLabelColumn = "Label";
/// Label written by the flow exporter before label propagation.
inline constexpr std::string_view kUnlabeled = "NeedManualLabel";

/// Column types of a flow table (features are reals, ports/protocol integers).
const TypeHints& flow_table_hints();

/// Directional 5-tuple of a flow's first packet.
struct FlowKey {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;

  static FlowKey of(const capture::PacketRecord& p);
  FlowKey reversed() const { return {dst_ip, src_ip, dst_port, src_port, protocol}; }
  /// Orientation-insensitive form: the lexicographically smaller endpoint first.
  FlowKey canonical() const;
  /// "srcIP-dstIP-srcPort-dstPort-protocol"
  std::string flow_id() const;

  friend bool operator==(const FlowKey&, const FlowKey&) = default;
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept;
};

/// Renders a microsecond epoch timestamp as "YYYY-MM-DD HH:MM:SS.ffffff" (UTC).
std::string format_timestamp(std::int64_t ts_us);
/// Inverse of format_timestamp.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

struct FlowRecord {
  FlowKey key;
  std::int64_t first_ts_us = 0;
  std::array<double, kFeatureCount> features{};
  std::string label{kUnlabeled};

  double operator[](Feature f) const { return features[static_cast<std::size_t>(f)]; }
  double& operator[](Feature f) { return features[static_cast<std::size_t>(f)]; }
};

enum class CloseReason { FlowTimeout, TcpFin, TcpRst, EndOfStream };

struct FlowOptions {
  std::int64_t flow_timeout_us = kDefaultFlowTimeoutUs;
  std::int64_t activity_timeout_us = kDefaultActivityTimeoutUs;
  /// How far a packet may precede the latest timestamp seen so far.
  std::int64_t reorder_slack_us = 0;
};

/// Per-flow running state. Forward is the direction of the first packet.
class FlowAccumulator {
 public:
  FlowAccumulator(const capture::PacketRecord& first, std::int64_t activity_timeout_us);

  bool is_forward(const capture::PacketRecord& p) const;
  void add(const capture::PacketRecord& p);

  const FlowKey& key() const noexcept { return key_; }
  std::int64_t first_ts() const noexcept { return first_ts_; }
  std::int64_t last_ts() const noexcept { return last_ts_; }
  std::uint64_t packet_count() const noexcept { return fwd_.packets + bwd_.packets; }
  bool fin_both_directions() const noexcept { return fwd_.fin_seen && bwd_.fin_seen; }
  bool rst_seen() const noexcept { return rst_seen_; }

  FlowRecord compute_features() const;

 private:
  struct Bulk {
    std::int64_t run_start = 0;
    std::int64_t run_last = 0;
    std::size_t run_packets = 0;
    double run_bytes = 0;
    std::uint64_t bulks = 0;
    std::uint64_t packets = 0;
    double bytes = 0;
    std::int64_t duration_us = 0;
  };
  struct Direction {
    std::uint64_t packets = 0;
    double bytes = 0;
    RunningStats length;
    RunningStats iat;
    std::int64_t last_ts = 0;
    std::int64_t header_bytes = 0;
    std::uint64_t psh = 0;
    std::uint64_t urg = 0;
    std::optional<std::uint16_t> init_window;
    bool fin_seen = false;
    Bulk bulk;
  };

  void update_bulk(Direction& self, Direction& other, const capture::PacketRecord& p);

  FlowKey key_;
  std::int64_t activity_timeout_us_;
  std::int64_t first_ts_;
  std::int64_t last_ts_;
  Direction fwd_;
  Direction bwd_;
  RunningStats length_;
  RunningStats flow_iat_;
  std::array<std::uint64_t, 8> flags_{};  // FIN SYN RST PSH ACK URG CWR ECE
  std::uint64_t subflow_gaps_ = 0;
  RunningStats active_;
  RunningStats idle_;
  std::int64_t active_start_;
  std::uint64_t fwd_act_data_ = 0;
  std::int64_t fwd_min_header_ = 0;
  bool rst_seen_ = false;
};

/// Streams packets into flows. Closed flows are handed to the sink in
/// closing order; flows still open at finish() close in creation order.
class FlowAssembler {
 public:
  using Sink = std::function<void(FlowRecord&&, CloseReason)>;

  FlowAssembler(FlowOptions options, Sink sink);

  /// Non-IP packets are counted and skipped.
  void push(const capture::PacketRecord& p);
  void finish();

  std::size_t packets_seen() const noexcept { return index_; }
  std::size_t non_ip_skipped() const noexcept { return non_ip_; }
  std::size_t open_flows() const noexcept { return open_.size(); }

 private:
  struct Open {
    FlowAccumulator acc;
    bool closing = false;  // FIN seen both ways; waiting for the final ACK
  };
  void close(std::uint64_t seq, CloseReason reason);

  FlowOptions options_;
  Sink sink_;
  std::unordered_map<FlowKey, std::uint64_t, FlowKeyHash> lookup_;
  std::map<std::uint64_t, Open> open_;
  std::uint64_t next_seq_ = 0;
  std::size_t index_ = 0;
  std::size_t non_ip_ = 0;
  std::optional<std::int64_t> max_ts_;
};

std::vector<FlowRecord> assemble_flows(std::span<const capture::PacketRecord> packets,
                                       const FlowOptions& options = {});
std::vector<FlowRecord> flows_from_capture(const std::filesystem::path& capture_path,
                                           const FlowOptions& options = {});

Table to_table(std::span<const FlowRecord> flows);
/// Header line plus rows, exactly emit_schema() columns.
std::string to_csv(std::span<const FlowRecord> flows);

}  // namespace mawiprep::flowmeter
