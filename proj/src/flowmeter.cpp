// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/flowmeter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>

#include "mawiprep/error.hpp"

namespace mawiprep::flowmeter {

using capture::PacketRecord;
namespace tf = capture::tcp_flag;

// --- statistics --------------------------------------------------------------

void RunningStats::add(double x) noexcept {
  ++n_;
  sum_ += x;
  if (n_ == 1) {
    min_ = max_ = mean_ = x;
    m2_ = 0.0;
    return;
  }
  min_ = std::min(min_, x);
  max_ = std::max(max_, x);
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningStats::variance() const noexcept {
  return n_ < 2 ? 0.0 : std::max(0.0, m2_ / static_cast<double>(n_ - 1));
}

double RunningStats::stddev() const noexcept { return std::sqrt(variance()); }

StatSummary running_stats(std::span<const double> values) {
  RunningStats s;
  for (const double v : values) s.add(v);
  return {s.min(), s.max(), s.mean(), s.stddev()};
}

// --- schema ------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "Flow Duration",
    "Total Fwd Packet",
    "Total Bwd packets",
    "Total Length of Fwd Packet",
    "Total Length of Bwd Packet",
    "Fwd Packet Length Max",
    "Fwd Packet Length Min",
    "Fwd Packet Length Mean",
    "Fwd Packet Length Std",
    "Bwd Packet Length Max",
    "Bwd Packet Length Min",
    "Bwd Packet Length Mean",
    "Bwd Packet Length Std",
    "Flow Bytes/s",
    "Flow Packets/s",
    "Flow IAT Mean",
    "Flow IAT Std",
    "Flow IAT Max",
    "Flow IAT Min",
    "Fwd IAT Total",
    "Fwd IAT Mean",
    "Fwd IAT Std",
    "Fwd IAT Max",
    "Fwd IAT Min",
    "Bwd IAT Total",
    "Bwd IAT Mean",
    "Bwd IAT Std",
    "Bwd IAT Max",
    "Bwd IAT Min",
    "Fwd PSH Flags",
    "Bwd PSH Flags",
    "Fwd URG Flags",
    "Bwd URG Flags",
    "Fwd Header Length",
    "Bwd Header Length",
    "Fwd Packets/s",
    "Bwd Packets/s",
    "Packet Length Min",
    "Packet Length Max",
    "Packet Length Mean",
    "Packet Length Std",
    "Packet Length Variance",
    "FIN Flag Count",
    "SYN Flag Count",
    "RST Flag Count",
    "PSH Flag Count",
    "ACK Flag Count",
    "URG Flag Count",
    "CWR Flag Count",
    "ECE Flag Count",
    "Down/Up Ratio",
    "Average Packet Size",
    "Fwd Segment Size Avg",
    "Bwd Segment Size Avg",
    "Fwd Bytes/Bulk Avg",
    "Fwd Packet/Bulk Avg",
    "Fwd Bulk Rate Avg",
    "Bwd Bytes/Bulk Avg",
    "Bwd Packet/Bulk Avg",
    "Bwd Bulk Rate Avg",
    "Subflow Fwd Packets",
    "Subflow Fwd Bytes",
    "Subflow Bwd Packets",
    "Subflow Bwd Bytes",
    "FWD Init Win Bytes",
    "Bwd Init Win Bytes",
    "Fwd Act Data Pkts",
    "Fwd Seg Size Min",
    "Active Mean",
    "Active Std",
    "Active Max",
    "Active Min",
    "Idle Mean",
    "Idle Std",
    "Idle Max",
    "Idle Min",
};

double per_second(double amount, std::int64_t duration_us) {
  return duration_us > 0 ? amount / (static_cast<double>(duration_us) / 1e6) : 0.0;
}

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace

std::string_view feature_name(Feature f) noexcept { return kFeatureNames[static_cast<std::size_t>(f)]; }

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names(kFeatureNames.begin(), kFeatureNames.end());
  return names;
}

const std::vector<std::string>& emit_schema() {
  static const std::vector<std::string> schema = [] {
    std::vector<std::string> s(kIdentifierColumns.begin(), kIdentifierColumns.end());
    s.insert(s.end(), kFeatureNames.begin(), kFeatureNames.end());
    s.emplace_back(kLabelColumn);
    return s;
  }();
  return schema;
}

const TypeHints& flow_table_hints() {
  static const TypeHints hints = [] {
    TypeHints h{{"Flow ID", ColumnType::String},  {"Src IP", ColumnType::String},
                {"Src Port", ColumnType::Int64},  {"Dst IP", ColumnType::String},
                {"Dst Port", ColumnType::Int64},  {"Protocol", ColumnType::Int64},
                {"Timestamp", ColumnType::String}, {"Label", ColumnType::String}};
    for (const auto n : kFeatureNames) h.emplace(std::string(n), ColumnType::Double);
    return h;
  }();
  return hints;
}

// --- keys ----------------------------------------------------------------------

FlowKey FlowKey::of(const PacketRecord& p) { return {p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol}; }

FlowKey FlowKey::canonical() const {
  if (std::tie(dst_ip, dst_port) < std::tie(src_ip, src_port)) return reversed();
  return *this;
}

std::string FlowKey::flow_id() const {
  return src_ip.to_string() + "-" + dst_ip.to_string() + "-" + std::to_string(src_port) + "-" +
         std::to_string(dst_port) + "-" + std::to_string(protocol);
}

std::size_t FlowKeyHash::operator()(const FlowKey& k) const noexcept {
  std::size_t h = k.src_ip.hash();
  hash_combine(h, k.dst_ip.hash());
  hash_combine(h, (static_cast<std::size_t>(k.src_port) << 24) | (static_cast<std::size_t>(k.dst_port) << 8) |
                      k.protocol);
  return h;
}

std::string format_timestamp(std::int64_t ts_us) {
  std::int64_t sec = ts_us / 1'000'000;
  std::int64_t frac = ts_us % 1'000'000;
  if (frac < 0) {
    frac += 1'000'000;
    --sec;
  }
  const std::time_t t = static_cast<std::time_t>(sec);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d.%06lld", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(frac));
  return buf;
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  std::tm tm{};
  long long frac = 0;
  int consumed = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d %2d:%2d:%2d.%6lld%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &frac, &consumed) != 7 ||
      static_cast<std::size_t>(consumed) != s.size()) {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return static_cast<std::int64_t>(timegm(&tm)) * 1'000'000 + frac;
}

// --- accumulator -----------------------------------------------------------------

FlowAccumulator::FlowAccumulator(const PacketRecord& first, std::int64_t activity_timeout_us)
    : key_(FlowKey::of(first)),
      activity_timeout_us_(activity_timeout_us),
      first_ts_(first.ts_us),
      last_ts_(first.ts_us),
      active_start_(first.ts_us) {
  add(first);
}

bool FlowAccumulator::is_forward(const PacketRecord& p) const {
  return p.src_ip == key_.src_ip && p.src_port == key_.src_port && p.dst_ip == key_.dst_ip &&
         p.dst_port == key_.dst_port;
}

void FlowAccumulator::update_bulk(Direction& self, Direction& other, const PacketRecord& p) {
  if (p.payload_len == 0) return;
  other.bulk.run_packets = 0;
  Bulk& b = self.bulk;
  const double size = p.payload_len;
  if (b.run_packets > 0 && p.ts_us - b.run_last <= kBulkGapUs) {
    ++b.run_packets;
    b.run_bytes += size;
    if (b.run_packets == kBulkMinPackets) {
      ++b.bulks;
      b.packets += b.run_packets;
      b.bytes += b.run_bytes;
      b.duration_us += p.ts_us - b.run_start;
    } else if (b.run_packets > kBulkMinPackets) {
      ++b.packets;
      b.bytes += size;
      b.duration_us += p.ts_us - b.run_last;
    }
  } else {
    b.run_start = p.ts_us;
    b.run_packets = 1;
    b.run_bytes = size;
  }
  b.run_last = p.ts_us;
}

void FlowAccumulator::add(const PacketRecord& p) {
  const bool forward = is_forward(p);
  Direction& self = forward ? fwd_ : bwd_;
  Direction& other = forward ? bwd_ : fwd_;
  const std::int64_t ts = p.ts_us;

  if (packet_count() > 0) {
    const std::int64_t gap = std::max<std::int64_t>(0, ts - last_ts_);
    flow_iat_.add(static_cast<double>(gap));
    if (gap > kSubflowGapUs) ++subflow_gaps_;
    if (gap > activity_timeout_us_) {
      active_.add(static_cast<double>(last_ts_ - active_start_));
      idle_.add(static_cast<double>(gap));
      active_start_ = ts;
    }
  }
  if (self.packets > 0) self.iat.add(static_cast<double>(std::max<std::int64_t>(0, ts - self.last_ts)));
  else self.init_window = p.tcp_window;
  self.last_ts = ts;
  ++self.packets;
  self.bytes += p.payload_len;
  self.length.add(p.payload_len);
  length_.add(p.payload_len);
  self.header_bytes += p.transport_header_len;
  if (forward) {
    if (p.payload_len >= 1) ++fwd_act_data_;
    fwd_min_header_ = fwd_.packets == 1 ? p.transport_header_len
                                        : std::min<std::int64_t>(fwd_min_header_, p.transport_header_len);
  }
  if (p.tcp_flags) {
    const std::uint8_t f = *p.tcp_flags;
    constexpr std::array<std::uint8_t, 8> order{tf::kFin, tf::kSyn, tf::kRst, tf::kPsh,
                                                tf::kAck, tf::kUrg, tf::kCwr, tf::kEce};
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (f & order[i]) ++flags_[i];
    }
    if (f & tf::kPsh) ++self.psh;
    if (f & tf::kUrg) ++self.urg;
    if (f & tf::kFin) self.fin_seen = true;
    if (f & tf::kRst) rst_seen_ = true;
  }
  update_bulk(self, other, p);
  last_ts_ = std::max(last_ts_, ts);
}

FlowRecord FlowAccumulator::compute_features() const {
  FlowRecord r;
  r.key = key_;
  r.first_ts_us = first_ts_;
  auto set = [&r](Feature f, double v) { r[f] = v; };

  const std::int64_t duration = last_ts_ - first_ts_;
  const double fwd_n = static_cast<double>(fwd_.packets);
  const double bwd_n = static_cast<double>(bwd_.packets);
  const double total_n = fwd_n + bwd_n;
  const double total_bytes = fwd_.bytes + bwd_.bytes;

  set(Feature::FlowDuration, static_cast<double>(duration));
  set(Feature::TotalFwdPackets, fwd_n);
  set(Feature::TotalBwdPackets, bwd_n);
  set(Feature::TotalLengthFwd, fwd_.bytes);
  set(Feature::TotalLengthBwd, bwd_.bytes);
  set(Feature::FwdPacketLengthMax, fwd_.length.max());
  set(Feature::FwdPacketLengthMin, fwd_.length.min());
  set(Feature::FwdPacketLengthMean, fwd_.length.mean());
  set(Feature::FwdPacketLengthStd, fwd_.length.stddev());
  set(Feature::BwdPacketLengthMax, bwd_.length.max());
  set(Feature::BwdPacketLengthMin, bwd_.length.min());
  set(Feature::BwdPacketLengthMean, bwd_.length.mean());
  set(Feature::BwdPacketLengthStd, bwd_.length.stddev());
  set(Feature::FlowBytesPerSec, per_second(total_bytes, duration));
  set(Feature::FlowPacketsPerSec, per_second(total_n, duration));
  set(Feature::FlowIatMean, flow_iat_.mean());
  set(Feature::FlowIatStd, flow_iat_.stddev());
  set(Feature::FlowIatMax, flow_iat_.max());
  set(Feature::FlowIatMin, flow_iat_.min());
  set(Feature::FwdIatTotal, fwd_.iat.sum());
  set(Feature::FwdIatMean, fwd_.iat.mean());
  set(Feature::FwdIatStd, fwd_.iat.stddev());
  set(Feature::FwdIatMax, fwd_.iat.max());
  set(Feature::FwdIatMin, fwd_.iat.min());
  set(Feature::BwdIatTotal, bwd_.iat.sum());
  set(Feature::BwdIatMean, bwd_.iat.mean());
  set(Feature::BwdIatStd, bwd_.iat.stddev());
  set(Feature::BwdIatMax, bwd_.iat.max());
  set(Feature::BwdIatMin, bwd_.iat.min());
  set(Feature::FwdPshFlags, static_cast<double>(fwd_.psh));
  set(Feature::BwdPshFlags, static_cast<double>(bwd_.psh));
  set(Feature::FwdUrgFlags, static_cast<double>(fwd_.urg));
  set(Feature::BwdUrgFlags, static_cast<double>(bwd_.urg));
  set(Feature::FwdHeaderLength, static_cast<double>(fwd_.header_bytes));
  set(Feature::BwdHeaderLength, static_cast<double>(bwd_.header_bytes));
  set(Feature::FwdPacketsPerSec, per_second(fwd_n, duration));
  set(Feature::BwdPacketsPerSec, per_second(bwd_n, duration));
  const double len_std = length_.stddev();
  set(Feature::PacketLengthMin, length_.min());
  set(Feature::PacketLengthMax, length_.max());
  set(Feature::PacketLengthMean, length_.mean());
  set(Feature::PacketLengthStd, len_std);
  set(Feature::PacketLengthVariance, len_std * len_std);
  for (std::size_t i = 0; i < flags_.size(); ++i) {
    r.features[static_cast<std::size_t>(Feature::FinFlagCount) + i] = static_cast<double>(flags_[i]);
  }
  set(Feature::DownUpRatio, ratio(bwd_n, fwd_n));
  set(Feature::AveragePacketSize, ratio(total_bytes, total_n));
  set(Feature::FwdSegmentSizeAvg, ratio(fwd_.bytes, fwd_n));
  set(Feature::BwdSegmentSizeAvg, ratio(bwd_.bytes, bwd_n));
  const auto bulk = [&](const Bulk& b, Feature bytes, Feature packets, Feature rate) {
    set(bytes, ratio(b.bytes, static_cast<double>(b.bulks)));
    set(packets, ratio(static_cast<double>(b.packets), static_cast<double>(b.bulks)));
    set(rate, per_second(b.bytes, b.duration_us));
  };
  bulk(fwd_.bulk, Feature::FwdBytesPerBulkAvg, Feature::FwdPacketsPerBulkAvg, Feature::FwdBulkRateAvg);
  bulk(bwd_.bulk, Feature::BwdBytesPerBulkAvg, Feature::BwdPacketsPerBulkAvg, Feature::BwdBulkRateAvg);
  const double subflows = static_cast<double>(subflow_gaps_ + 1);
  set(Feature::SubflowFwdPackets, fwd_n / subflows);
  set(Feature::SubflowFwdBytes, fwd_.bytes / subflows);
  set(Feature::SubflowBwdPackets, bwd_n / subflows);
  set(Feature::SubflowBwdBytes, bwd_.bytes / subflows);
  set(Feature::FwdInitWinBytes, fwd_.init_window ? static_cast<double>(*fwd_.init_window) : kNoWindow);
  set(Feature::BwdInitWinBytes, bwd_.init_window ? static_cast<double>(*bwd_.init_window) : kNoWindow);
  set(Feature::FwdActDataPackets, static_cast<double>(fwd_act_data_));
  set(Feature::FwdSegSizeMin, static_cast<double>(fwd_min_header_));

  RunningStats active = active_;
  active.add(static_cast<double>(last_ts_ - active_start_));
  set(Feature::ActiveMean, active.mean());
  set(Feature::ActiveStd, active.stddev());
  set(Feature::ActiveMax, active.max());
  set(Feature::ActiveMin, active.min());
  set(Feature::IdleMean, idle_.mean());
  set(Feature::IdleStd, idle_.stddev());
  set(Feature::IdleMax, idle_.max());
  set(Feature::IdleMin, idle_.min());
  return r;
}

// --- assembler -------------------------------------------------------------------

FlowAssembler::FlowAssembler(FlowOptions options, Sink sink) : options_(options), sink_(std::move(sink)) {
  if (options_.flow_timeout_us <= 0 || options_.activity_timeout_us <= 0 || options_.reorder_slack_us < 0) {
    throw Error(ErrorCategory::InvalidArgument, "flow timeouts must be positive and reorder slack non-negative");
  }
}

void FlowAssembler::close(std::uint64_t seq, CloseReason reason) {
  const auto it = open_.find(seq);
  lookup_.erase(it->second.acc.key().canonical());
  FlowRecord rec = it->second.acc.compute_features();
  open_.erase(it);
  sink_(std::move(rec), reason);
}

void FlowAssembler::push(const PacketRecord& p) {
  const std::size_t index = index_++;
  if (!p.is_ip()) {
    ++non_ip_;
    return;
  }
  if (max_ts_ && p.ts_us < *max_ts_ - options_.reorder_slack_us) {
    throw ReorderError(index, "packet " + std::to_string(index) + " is " + std::to_string(*max_ts_ - p.ts_us) +
                                  " us older than an earlier packet (slack " +
                                  std::to_string(options_.reorder_slack_us) + " us)");
  }
  max_ts_ = max_ts_ ? std::max(*max_ts_, p.ts_us) : p.ts_us;

  const FlowKey key = FlowKey::of(p).canonical();
  if (const auto found = lookup_.find(key); found != lookup_.end()) {
    const std::uint64_t seq = found->second;
    Open& o = open_.at(seq);
    if (p.ts_us - o.acc.first_ts() > options_.flow_timeout_us) {
      close(seq, CloseReason::FlowTimeout);
    } else if (o.closing) {
      // After FINs in both directions only the final bare ACK still belongs here.
      const bool bare_ack = p.has_flag(tf::kAck) && !p.has_flag(tf::kSyn | tf::kFin | tf::kRst) && p.payload_len == 0;
      if (bare_ack) {
        o.acc.add(p);
        close(seq, CloseReason::TcpFin);
        return;
      }
      close(seq, CloseReason::TcpFin);
    } else {
      o.acc.add(p);
      if (p.has_flag(tf::kRst)) {
        close(seq, CloseReason::TcpRst);
      } else if (o.acc.fin_both_directions()) {
        o.closing = true;
      }
      return;
    }
  }
  const std::uint64_t seq = next_seq_++;
  open_.emplace(seq, Open{FlowAccumulator(p, options_.activity_timeout_us)});
  lookup_[key] = seq;
  if (p.has_flag(tf::kRst)) close(seq, CloseReason::TcpRst);
}

void FlowAssembler::finish() {
  while (!open_.empty()) {
    const auto it = open_.begin();
    close(it->first, it->second.closing ? CloseReason::TcpFin : CloseReason::EndOfStream);
  }
}

std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets, const FlowOptions& options) {
  std::vector<FlowRecord> out;
  FlowAssembler assembler(options, [&out](FlowRecord&& r, CloseReason) { out.push_back(std::move(r)); });
  for (const auto& p : packets) assembler.push(p);
  assembler.finish();
  return out;
}

std::vector<FlowRecord> flows_from_capture(const std::filesystem::path& capture_path, const FlowOptions& options) {
  std::vector<FlowRecord> out;
  FlowAssembler assembler(options, [&out](FlowRecord&& r, CloseReason) { out.push_back(std::move(r)); });
  capture::CaptureReader reader(capture_path);
  PacketRecord p;
  while (reader.next(p)) assembler.push(p);
  assembler.finish();
  return out;
}

// --- output ----------------------------------------------------------------------

Table to_table(std::span<const FlowRecord> flows) {
  const auto& hints = flow_table_hints();
  std::vector<Column> cols;
  for (const auto& name : emit_schema()) {
    cols.emplace_back(name, hints.at(name));
    cols.back().reserve(flows.size());
  }
  for (const auto& f : flows) {
    cols[0].push_string(f.key.flow_id());
    cols[1].push_string(f.key.src_ip.to_string());
    cols[2].push_int(f.key.src_port);
    cols[3].push_string(f.key.dst_ip.to_string());
    cols[4].push_int(f.key.dst_port);
    cols[5].push_int(f.key.protocol);
    cols[6].push_string(format_timestamp(f.first_ts_us));
    for (std::size_t i = 0; i < kFeatureCount; ++i) cols[7 + i].push_double(f.features[i]);
    if (f.label.empty()) cols.back().push_null(); else cols.back().push_string(f.label);
  }
  return Table(std::move(cols));
}

std::string to_csv(std::span<const FlowRecord> flows) { return mawiprep::to_csv(to_table(flows)); }

}  // namespace mawiprep::flowmeter
