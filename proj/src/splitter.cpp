// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/splitter.hpp"

#include <unistd.h>

#include <algorithm>
#include <json.hpp>

#include "mawiprep/error.hpp"

namespace mawiprep::splitter {

using annotations::AnomalyFilter;
using annotations::AnomalyRecord;
using annotations::DayAnnotations;
using capture::PacketRecord;

namespace {

bool field_match(std::int64_t ts, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                 std::uint16_t dport, std::uint8_t proto, const AnomalyFilter& f) {
  if (f.src_ip && *f.src_ip != src) return false;
  if (f.dst_ip && *f.dst_ip != dst) return false;
  if (f.src_port && *f.src_port != sport) return false;
  if (f.dst_port && *f.dst_port != dport) return false;
  if (f.protocol && *f.protocol != proto) return false;
  if (f.window && !f.window->contains(ts)) return false;
  return true;
}

std::string escape_id(std::string_view id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (const unsigned char c : id) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0x0f]);
    }
  }
  return out;
}

}  // namespace

PartitionId PartitionId::from_key(std::string_view key) {
  if (key == "benign") return benign();
  constexpr std::string_view prefix = "anomaly=";
  if (key.substr(0, prefix.size()) != prefix || key.size() == prefix.size()) {
    throw Error(ErrorCategory::Parse, "bad partition key '" + std::string(key) + "'");
  }
  return anomaly(std::string(key.substr(prefix.size())));
}

const std::string& PartitionId::anomaly_id() const {
  if (!anomaly_id_) throw Error(ErrorCategory::Contract, "benign partition has no anomaly id");
  return *anomaly_id_;
}

std::string PartitionId::key() const { return anomaly_id_ ? "anomaly=" + *anomaly_id_ : "benign"; }

std::string PartitionId::file_stem() const {
  return anomaly_id_ ? "anomaly=" + escape_id(*anomaly_id_) : "benign";
}

bool matches(const PacketRecord& p, const AnomalyFilter& f) {
  if (!p.is_ip()) return false;
  return field_match(p.ts_us, p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol, f);
}

// ---------------------------------------------------------------------------

Router::Router(const DayAnnotations& day, SplitOptions options) : options_(options) {
  for (const auto& r : day.anomalies) {
    if (options_.exclude_notice && r.label == annotations::Label::Notice) continue;
    ranked_.push_back(&r);
  }
  std::sort(ranked_.begin(), ranked_.end(), [](const AnomalyRecord* a, const AnomalyRecord* b) {
    const int pa = annotations::precedence(a->label);
    const int pb = annotations::precedence(b->label);
    return pa != pb ? pa < pb : a->anomaly_id < b->anomaly_id;
  });
  for (std::size_t rank = 0; rank < ranked_.size(); ++rank) {
    for (const auto& f : ranked_[rank]->filters) {
      const std::size_t idx = entries_.size();
      entries_.push_back({rank, f});
      if (f.src_ip) by_src_ip_[*f.src_ip].push_back(idx);
      else if (f.dst_ip) by_dst_ip_[*f.dst_ip].push_back(idx);
      else if (f.dst_port) by_dst_port_[*f.dst_port].push_back(idx);
      else if (f.src_port) by_src_port_[*f.src_port].push_back(idx);
      else scan_.push_back(idx);
    }
  }
}

void Router::collect(const PacketRecord& p, std::vector<std::size_t>& ranks, bool swapped) const {
  const IpAddress& src = swapped ? p.dst_ip : p.src_ip;
  const IpAddress& dst = swapped ? p.src_ip : p.dst_ip;
  const std::uint16_t sport = swapped ? p.dst_port : p.src_port;
  const std::uint16_t dport = swapped ? p.src_port : p.dst_port;
  auto check = [&](const std::vector<std::size_t>& bucket) {
    for (const std::size_t i : bucket) {
      const Entry& e = entries_[i];
      if (field_match(p.ts_us, src, dst, sport, dport, p.protocol, e.filter)) ranks.push_back(e.anomaly_rank);
    }
  };
  if (const auto it = by_src_ip_.find(src); it != by_src_ip_.end()) check(it->second);
  if (const auto it = by_dst_ip_.find(dst); it != by_dst_ip_.end()) check(it->second);
  if (const auto it = by_dst_port_.find(dport); it != by_dst_port_.end()) check(it->second);
  if (const auto it = by_src_port_.find(sport); it != by_src_port_.end()) check(it->second);
  check(scan_);
}

RouteDecision Router::route(const PacketRecord& p) const {
  RouteDecision d;
  if (!p.is_ip() || entries_.empty()) return d;
  thread_local std::vector<std::size_t> ranks;
  ranks.clear();
  collect(p, ranks, false);
  if (options_.symmetric_filters) collect(p, ranks, true);
  if (ranks.empty()) return d;
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  d.partition = PartitionId::anomaly(ranked_[ranks.front()]->anomaly_id);
  d.matched_anomalies = ranks.size();
  return d;
}

const AnomalyRecord* Router::anomaly(const PartitionId& partition) const {
  if (partition.is_benign()) return nullptr;
  for (const auto* r : ranked_) {
    if (r->anomaly_id == partition.anomaly_id()) return r;
  }
  return nullptr;
}

PartitionId route_packet(const PacketRecord& packet, const DayAnnotations& day, const SplitOptions& options) {
  return Router(day, options).route(packet).partition;
}

// ---------------------------------------------------------------------------

bool SplitReport::consistent() const {
  std::uint64_t sum = 0;
  for (const auto& [k, n] : partition_counts) sum += n;
  return sum == total_packets;
}

std::string SplitReport::to_json() const {
  nlohmann::json j;
  j["total_packets"] = total_packets;
  j["multi_match_packets"] = multi_match_packets;
  j["non_ip_packets"] = non_ip_packets;
  j["partitions"] = nlohmann::json::object();
  for (const auto& [k, n] : partition_counts) j["partitions"][k] = n;
  return j.dump(2) + "\n";
}

SplitReport SplitReport::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitReport r;
    r.total_packets = j.at("total_packets").get<std::uint64_t>();
    r.multi_match_packets = j.at("multi_match_packets").get<std::uint64_t>();
    r.non_ip_packets = j.at("non_ip_packets").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("partitions").items()) r.partition_counts[k] = v.get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("split report: ") + e.what());
  }
}

const TypeHints& packet_metadata_hints() {
  static const TypeHints hints{
      {"packet_index", ColumnType::Int64},  {"ts_us", ColumnType::Int64},
      {"ip_version", ColumnType::Int64},    {"src_ip", ColumnType::String},
      {"dst_ip", ColumnType::String},       {"src_port", ColumnType::Int64},
      {"dst_port", ColumnType::Int64},      {"protocol", ColumnType::Int64},
      {"ip_header_len", ColumnType::Int64}, {"transport_header_len", ColumnType::Int64},
      {"payload_len", ColumnType::Int64},   {"wire_len", ColumnType::Int64},
      {"tcp_flags", ColumnType::Int64},     {"tcp_window", ColumnType::Int64},
      {"partition", ColumnType::String},    {"label", ColumnType::String},
      {"taxonomy", ColumnType::String},     {"heuristic", ColumnType::Int64},
      {"distance", ColumnType::Double},     {"nb_detectors", ColumnType::Int64},
  };
  return hints;
}

namespace {

struct PartitionSink {
  std::filesystem::path path;
  std::vector<std::uint8_t> buffer;
  bool created = false;
  std::uint64_t packets = 0;
};

void flush_sink(PartitionSink& sink, capture::LinkType link) {
  if (!sink.created) {
    auto header = capture::global_header_bytes(link);
    sink.buffer.insert(sink.buffer.begin(), header.begin(), header.end());
  }
  std::FILE* f = std::fopen(sink.path.c_str(), sink.created ? "ab" : "wb");
  if (!f) throw Error(ErrorCategory::Io, sink.path.string() + ": cannot open for writing");
  const std::size_t n = std::fwrite(sink.buffer.data(), 1, sink.buffer.size(), f);
  const bool ok = n == sink.buffer.size() && std::fclose(f) == 0;
  if (!ok) throw Error(ErrorCategory::Io, sink.path.string() + ": write failed");
  sink.created = true;
  sink.buffer.clear();
}

class PacketMetadataTable {
 public:
  PacketMetadataTable() {
    for (const char* name : {"packet_index", "ts_us", "ip_version", "src_ip", "dst_ip", "src_port", "dst_port",
                             "protocol", "ip_header_len", "transport_header_len", "payload_len", "wire_len",
                             "tcp_flags", "tcp_window", "partition", "label", "taxonomy", "heuristic", "distance",
                             "nb_detectors"}) {
      table_.add_column(name, packet_metadata_hints().at(name));
    }
  }

  void add(std::uint64_t index, const PacketRecord& p, const PartitionId& part, const AnomalyRecord* a) {
    auto& c = table_.columns();
    c[0].push_int(static_cast<std::int64_t>(index));
    c[1].push_int(p.ts_us);
    c[2].push_int(p.ip_version);
    if (p.is_ip()) {
      c[3].push_string(p.src_ip.to_string());
      c[4].push_string(p.dst_ip.to_string());
    } else {
      c[3].push_null();
      c[4].push_null();
    }
    c[5].push_int(p.src_port);
    c[6].push_int(p.dst_port);
    c[7].push_int(p.protocol);
    c[8].push_int(p.ip_header_len);
    c[9].push_int(p.transport_header_len);
    c[10].push_int(p.payload_len);
    c[11].push_int(p.wire_len);
    if (p.tcp_flags) c[12].push_int(*p.tcp_flags); else c[12].push_null();
    if (p.tcp_window) c[13].push_int(*p.tcp_window); else c[13].push_null();
    c[14].push_string(part.key());
    if (a) {
      c[15].push_string(std::string(annotations::to_string(a->label)));
      if (a->taxonomy.empty()) c[16].push_null(); else c[16].push_string(a->taxonomy);
      c[17].push_int(a->heuristic);
      c[18].push_double(a->distance);
      c[19].push_int(a->nb_detectors);
    } else {
      c[15].push_string("benign");
      for (std::size_t k = 16; k < 20; ++k) c[k].push_null();
    }
  }

  const Table& table() const { return table_; }

 private:
  Table table_;
};

}  // namespace

SplitReport split_capture(const std::filesystem::path& capture_path, const DayAnnotations& day,
                          const std::filesystem::path& out_dir, const SplitOptions& options) {
  namespace fs = std::filesystem;
  const Router router(day, options);
  auto staging = out_dir;
  staging += ".tmp-" + std::to_string(::getpid());
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw Error(ErrorCategory::Io, staging.string() + ": cannot create directory");

  try {
    capture::CaptureReader reader(capture_path);
    const auto link = reader.link_type();
    SplitReport report;
    std::map<std::string, PartitionSink> sinks;
    PacketMetadataTable metadata;
    PacketRecord p;
    while (reader.next(p)) {
      const RouteDecision d = router.route(p);
      const std::string key = d.partition.key();
      auto [it, inserted] = sinks.try_emplace(key);
      PartitionSink& sink = it->second;
      if (inserted) sink.path = staging / (d.partition.file_stem() + ".pcap");
      capture::append_packet_bytes(sink.buffer, p);
      ++sink.packets;
      if (sink.buffer.size() >= (4u << 20)) flush_sink(sink, link);
      if (options.packet_metadata) metadata.add(report.total_packets, p, d.partition, router.anomaly(d.partition));
      ++report.total_packets;
      ++report.partition_counts[key];
      if (d.matched_anomalies > 1) ++report.multi_match_packets;
      if (!p.is_ip()) ++report.non_ip_packets;
    }
    for (auto& [k, sink] : sinks) flush_sink(sink, link);
    write_file_atomic(staging / kSplitReportFile, report.to_json());
    if (options.packet_metadata) write_table_pair(metadata.table(), staging / kPacketMetadataStem);

    fs::remove_all(out_dir, ec);
    fs::rename(staging, out_dir, ec);
    if (ec) throw Error(ErrorCategory::Io, out_dir.string() + ": cannot move split outputs into place");
    return report;
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

}  // namespace mawiprep::splitter
