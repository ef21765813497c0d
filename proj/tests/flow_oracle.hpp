// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

// Batch re-derivation of flow assembly and every flow feature. Each flow is
// materialized as a packet list first; features then come from direct
// formulas over that list (two-pass mean/std, explicit segmentation).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "mawiprep/capture.hpp"
#include "mawiprep/flowmeter.hpp"
#include "support.hpp"

namespace mawiprep::testing {

struct OracleFlow {
  std::vector<capture::PacketRecord> packets;
  std::array<double, flowmeter::kFeatureCount> features{};
};

struct Stats4 {
  double min = 0, max = 0, mean = 0, std = 0, sum = 0;
};

inline Stats4 stats_of(const std::vector<double>& v) {
  Stats4 s;
  if (v.empty()) return s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.sum = std::accumulate(v.begin(), v.end(), 0.0);
  s.mean = s.sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

inline bool same_direction(const capture::PacketRecord& a, const capture::PacketRecord& b) {
  return a.src_ip == b.src_ip && a.dst_ip == b.dst_ip && a.src_port == b.src_port && a.dst_port == b.dst_port &&
         a.protocol == b.protocol;
}

inline bool reverse_direction(const capture::PacketRecord& a, const capture::PacketRecord& b) {
  return a.src_ip == b.dst_ip && a.dst_ip == b.src_ip && a.src_port == b.dst_port && a.dst_port == b.src_port &&
         a.protocol == b.protocol;
}

inline std::array<double, flowmeter::kFeatureCount> oracle_features(const std::vector<capture::PacketRecord>& pkts,
                                                                    std::int64_t activity_timeout_us) {
  using F = flowmeter::Feature;
  std::array<double, flowmeter::kFeatureCount> out{};
  auto set = [&](F f, double v) { out[static_cast<std::size_t>(f)] = v; };
  const auto& first = pkts.front();
  std::vector<capture::PacketRecord> fwd, bwd;
  for (const auto& p : pkts) (same_direction(p, first) ? fwd : bwd).push_back(p);

  auto lengths = [](const std::vector<capture::PacketRecord>& v) {
    std::vector<double> out;
    for (const auto& p : v) out.push_back(p.payload_len);
    return out;
  };
  auto gaps = [](const std::vector<capture::PacketRecord>& v) {
    std::vector<double> out;
    for (std::size_t i = 1; i < v.size(); ++i) out.push_back(std::max<double>(0, double(v[i].ts_us - v[i - 1].ts_us)));
    return out;
  };
  std::int64_t last = first.ts_us;
  for (const auto& p : pkts) last = std::max(last, p.ts_us);
  const double duration = double(last - first.ts_us);
  const double secs = duration / 1e6;
  auto rate = [&](double x) { return duration > 0 ? x / secs : 0.0; };
  auto div = [](double a, double b) { return b > 0 ? a / b : 0.0; };

  const auto fl = stats_of(lengths(fwd)), bl = stats_of(lengths(bwd)), al = stats_of(lengths(pkts));
  const auto fi = stats_of(gaps(fwd)), bi = stats_of(gaps(bwd)), ai = stats_of(gaps(pkts));
  const double nf = double(fwd.size()), nb = double(bwd.size());

  set(F::FlowDuration, duration);
  set(F::TotalFwdPackets, nf);
  set(F::TotalBwdPackets, nb);
  set(F::TotalLengthFwd, fl.sum);
  set(F::TotalLengthBwd, bl.sum);
  set(F::FwdPacketLengthMax, fl.max);
  set(F::FwdPacketLengthMin, fl.min);
  set(F::FwdPacketLengthMean, fl.mean);
  set(F::FwdPacketLengthStd, fl.std);
  set(F::BwdPacketLengthMax, bl.max);
  set(F::BwdPacketLengthMin, bl.min);
  set(F::BwdPacketLengthMean, bl.mean);
  set(F::BwdPacketLengthStd, bl.std);
  set(F::FlowBytesPerSec, rate(al.sum));
  set(F::FlowPacketsPerSec, rate(nf + nb));
  set(F::FlowIatMean, ai.mean);
  set(F::FlowIatStd, ai.std);
  set(F::FlowIatMax, ai.max);
  set(F::FlowIatMin, ai.min);
  set(F::FwdIatTotal, fi.sum);
  set(F::FwdIatMean, fi.mean);
  set(F::FwdIatStd, fi.std);
  set(F::FwdIatMax, fi.max);
  set(F::FwdIatMin, fi.min);
  set(F::BwdIatTotal, bi.sum);
  set(F::BwdIatMean, bi.mean);
  set(F::BwdIatStd, bi.std);
  set(F::BwdIatMax, bi.max);
  set(F::BwdIatMin, bi.min);

  auto count_flag = [](const std::vector<capture::PacketRecord>& v, std::uint8_t flag) {
    return double(std::count_if(v.begin(), v.end(), [&](const auto& p) { return p.has_flag(flag); }));
  };
  namespace tf = capture::tcp_flag;
  set(F::FwdPshFlags, count_flag(fwd, tf::kPsh));
  set(F::BwdPshFlags, count_flag(bwd, tf::kPsh));
  set(F::FwdUrgFlags, count_flag(fwd, tf::kUrg));
  set(F::BwdUrgFlags, count_flag(bwd, tf::kUrg));
  auto headers = [](const std::vector<capture::PacketRecord>& v) {
    double s = 0;
    for (const auto& p : v) s += p.transport_header_len;
    return s;
  };
  set(F::FwdHeaderLength, headers(fwd));
  set(F::BwdHeaderLength, headers(bwd));
  set(F::FwdPacketsPerSec, rate(nf));
  set(F::BwdPacketsPerSec, rate(nb));
  set(F::PacketLengthMin, al.min);
  set(F::PacketLengthMax, al.max);
  set(F::PacketLengthMean, al.mean);
  set(F::PacketLengthStd, al.std);
  set(F::PacketLengthVariance, al.std * al.std);
  set(F::FinFlagCount, count_flag(pkts, tf::kFin));
  set(F::SynFlagCount, count_flag(pkts, tf::kSyn));
  set(F::RstFlagCount, count_flag(pkts, tf::kRst));
  set(F::PshFlagCount, count_flag(pkts, tf::kPsh));
  set(F::AckFlagCount, count_flag(pkts, tf::kAck));
  set(F::UrgFlagCount, count_flag(pkts, tf::kUrg));
  set(F::CwrFlagCount, count_flag(pkts, tf::kCwr));
  set(F::EceFlagCount, count_flag(pkts, tf::kEce));
  set(F::DownUpRatio, div(nb, nf));
  set(F::AveragePacketSize, div(al.sum, nf + nb));
  set(F::FwdSegmentSizeAvg, div(fl.sum, nf));
  set(F::BwdSegmentSizeAvg, div(bl.sum, nb));

  // Bulk: maximal runs of same-direction payload packets, consecutive among
  // payload packets, each within 1 s of the previous; runs of 4+ count.
  struct Run {
    bool fwd;
    std::vector<const capture::PacketRecord*> members;
  };
  std::vector<Run> runs;
  for (const auto& p : pkts) {
    if (p.payload_len == 0) continue;
    const bool is_fwd = same_direction(p, first);
    if (!runs.empty() && runs.back().fwd == is_fwd &&
        p.ts_us - runs.back().members.back()->ts_us <= flowmeter::kBulkGapUs) {
      runs.back().members.push_back(&p);
    } else {
      runs.push_back({is_fwd, {&p}});
    }
  }
  for (bool dir : {true, false}) {
    double bulks = 0, bytes = 0, packets = 0, dur = 0;
    for (const auto& r : runs) {
      if (r.fwd != dir || r.members.size() < flowmeter::kBulkMinPackets) continue;
      ++bulks;
      packets += double(r.members.size());
      for (const auto* m : r.members) bytes += m->payload_len;
      dur += double(r.members.back()->ts_us - r.members.front()->ts_us);
    }
    set(dir ? F::FwdBytesPerBulkAvg : F::BwdBytesPerBulkAvg, div(bytes, bulks));
    set(dir ? F::FwdPacketsPerBulkAvg : F::BwdPacketsPerBulkAvg, div(packets, bulks));
    set(dir ? F::FwdBulkRateAvg : F::BwdBulkRateAvg, dur > 0 ? bytes / (dur / 1e6) : 0.0);
  }

  double subflows = 1;
  for (double g : gaps(pkts)) subflows += g > double(flowmeter::kSubflowGapUs) ? 1 : 0;
  set(F::SubflowFwdPackets, nf / subflows);
  set(F::SubflowFwdBytes, fl.sum / subflows);
  set(F::SubflowBwdPackets, nb / subflows);
  set(F::SubflowBwdBytes, bl.sum / subflows);
  auto init_win = [](const std::vector<capture::PacketRecord>& v) {
    return !v.empty() && v.front().tcp_window ? double(*v.front().tcp_window) : -1.0;
  };
  set(F::FwdInitWinBytes, init_win(fwd));
  set(F::BwdInitWinBytes, init_win(bwd));
  set(F::FwdActDataPackets, double(std::count_if(fwd.begin(), fwd.end(), [](auto& p) { return p.payload_len > 0; })));
  double min_hdr = fwd.front().transport_header_len;
  for (const auto& p : fwd) min_hdr = std::min<double>(min_hdr, p.transport_header_len);
  set(F::FwdSegSizeMin, min_hdr);

  // Segment the timeline at gaps above the activity timeout.
  std::vector<double> active, idle;
  std::int64_t seg_start = pkts.front().ts_us, prev = pkts.front().ts_us;
  for (std::size_t i = 1; i < pkts.size(); ++i) {
    const std::int64_t gap = pkts[i].ts_us - prev;
    if (gap > activity_timeout_us) {
      active.push_back(double(prev - seg_start));
      idle.push_back(double(gap));
      seg_start = pkts[i].ts_us;
    }
    prev = std::max(prev, pkts[i].ts_us);
  }
  active.push_back(double(prev - seg_start));
  const auto as = stats_of(active), is = stats_of(idle);
  set(F::ActiveMean, as.mean);
  set(F::ActiveStd, as.std);
  set(F::ActiveMax, as.max);
  set(F::ActiveMin, as.min);
  set(F::IdleMean, is.mean);
  set(F::IdleStd, is.std);
  set(F::IdleMax, is.max);
  set(F::IdleMin, is.min);
  return out;
}

/// Linear-scan flow assembly with the same closing rules as the exporter:
/// timeout from the first packet, RST closes after the packet, FINs from both
/// sides close after one trailing bare ACK (or before any other packet).
inline std::vector<OracleFlow> oracle_flows(const std::vector<capture::PacketRecord>& packets,
                                            std::int64_t flow_timeout_us = flowmeter::kDefaultFlowTimeoutUs,
                                            std::int64_t activity_timeout_us = flowmeter::kDefaultActivityTimeoutUs) {
  namespace tf = capture::tcp_flag;
  struct Open {
    std::vector<capture::PacketRecord> pkts;
    bool closing = false;
  };
  std::vector<Open> open;
  std::vector<OracleFlow> done;
  auto emit = [&](std::size_t i) {
    done.push_back({open[i].pkts, oracle_features(open[i].pkts, activity_timeout_us)});
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(i));
  };
  auto fins_both_ways = [](const std::vector<capture::PacketRecord>& v) {
    bool f = false, b = false;
    for (const auto& p : v) {
      if (!p.has_flag(tf::kFin)) continue;
      (same_direction(p, v.front()) ? f : b) = true;
    }
    return f && b;
  };
  for (const auto& p : packets) {
    if (!p.is_ip()) continue;
    std::size_t idx = open.size();
    for (std::size_t i = 0; i < open.size(); ++i) {
      if (same_direction(p, open[i].pkts.front()) || reverse_direction(p, open[i].pkts.front())) idx = i;
    }
    if (idx < open.size()) {
      auto& o = open[idx];
      if (p.ts_us - o.pkts.front().ts_us > flow_timeout_us) {
        emit(idx);
      } else if (o.closing) {
        const bool bare_ack = p.has_flag(tf::kAck) && !p.has_flag(tf::kSyn) && !p.has_flag(tf::kFin) &&
                              !p.has_flag(tf::kRst) && p.payload_len == 0;
        if (bare_ack) o.pkts.push_back(p);
        emit(idx);
        if (bare_ack) continue;
      } else {
        o.pkts.push_back(p);
        if (p.has_flag(tf::kRst)) emit(idx);
        else if (fins_both_ways(o.pkts)) o.closing = true;
        continue;
      }
    }
    open.push_back({{p}, false});
    if (p.has_flag(tf::kRst)) emit(open.size() - 1);
  }
  while (!open.empty()) emit(0);
  return done;
}

/// Features whose values are counts, sums, extremes, flags or window sizes.
inline bool exact_feature(flowmeter::Feature f) {
  using F = flowmeter::Feature;
  static const std::set<F> approx{
      F::FwdPacketLengthMean, F::FwdPacketLengthStd, F::BwdPacketLengthMean, F::BwdPacketLengthStd,
      F::FlowBytesPerSec,     F::FlowPacketsPerSec,  F::FlowIatMean,         F::FlowIatStd,
      F::FwdIatMean,          F::FwdIatStd,          F::BwdIatMean,          F::BwdIatStd,
      F::FwdPacketsPerSec,    F::BwdPacketsPerSec,   F::PacketLengthMean,    F::PacketLengthStd,
      F::PacketLengthVariance, F::DownUpRatio,       F::AveragePacketSize,   F::FwdSegmentSizeAvg,
      F::BwdSegmentSizeAvg,   F::FwdBytesPerBulkAvg, F::FwdPacketsPerBulkAvg, F::FwdBulkRateAvg,
      F::BwdBytesPerBulkAvg,  F::BwdPacketsPerBulkAvg, F::BwdBulkRateAvg,   F::SubflowFwdPackets,
      F::SubflowFwdBytes,     F::SubflowBwdPackets,  F::SubflowBwdBytes,     F::ActiveMean,
      F::ActiveStd,           F::IdleMean,           F::IdleStd};
  return !approx.count(f);
}

/// Empty when equal; otherwise a description of the first mismatch.
inline std::string compare_features(const std::array<double, flowmeter::kFeatureCount>& got,
                                    const std::array<double, flowmeter::kFeatureCount>& want) {
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto f = static_cast<flowmeter::Feature>(i);
    const bool ok = exact_feature(f)
                        ? got[i] == want[i]
                        : std::abs(got[i] - want[i]) <= 1e-6 * std::max(1.0, std::max(std::abs(got[i]), std::abs(want[i])));
    if (!ok) {
      return std::string(flowmeter::feature_name(f)) + ": got " + std::to_string(got[i]) + " want " +
             std::to_string(want[i]);
    }
  }
  return {};
}

struct FlowFixture {
  std::string name;
  std::vector<capture::PacketRecord> packets;
  std::int64_t flow_timeout_us = flowmeter::kDefaultFlowTimeoutUs;
  std::int64_t activity_timeout_us = flowmeter::kDefaultActivityTimeoutUs;
};

/// Hand-built captures covering the assembly and feature edge cases.
inline std::vector<FlowFixture> flow_fixtures() {
  namespace tf = capture::tcp_flag;
  constexpr std::int64_t s = 1'000'000;
  const std::int64_t t0 = 1'300'000'000'000'000;
  const std::string c = "10.0.0.1", v = "10.0.0.2";
  auto fwd = [&](std::int64_t t, std::uint8_t flags, std::uint32_t pay = 0, std::uint16_t win = 8192) {
    return tcp(t0 + t, c, 40000, v, 80, flags, pay, win);
  };
  auto bwd = [&](std::int64_t t, std::uint8_t flags, std::uint32_t pay = 0, std::uint16_t win = 29200) {
    return tcp(t0 + t, v, 80, c, 40000, flags, pay, win);
  };
  auto u = [&](std::int64_t t, std::uint32_t pay, bool forward = true) {
    return forward ? udp(t0 + t, c, 5000, v, 53, pay) : udp(t0 + t, v, 53, c, 5000, pay);
  };
  const std::uint8_t A = tf::kAck, S = tf::kSyn, F = tf::kFin, R = tf::kRst, P = tf::kPsh;

  std::vector<FlowFixture> out;
  out.push_back({"single-udp", {u(0, 60)}});
  out.push_back({"two-forward-udp", {u(0, 100), u(s, 200)}});
  out.push_back({"udp-request-response", {u(0, 40), u(1500, 300, false), u(2 * s, 40), u(2 * s + 900, 280, false)}});
  out.push_back({"tcp-handshake-teardown",
                 {fwd(0, S), bwd(100, S | A), fwd(200, A), fwd(300, F | A), bwd(400, F | A), fwd(500, A)}});
  out.push_back({"tcp-with-data",
                 {fwd(0, S), bwd(50, S | A), fwd(100, A), fwd(150, P | A, 120), bwd(300, A, 1448), bwd(310, A, 1448),
                  bwd(320, P | A, 600), fwd(400, A), fwd(500, F | A), bwd(600, F | A), fwd(700, A)}});
  out.push_back({"rst-close", {fwd(0, S), bwd(100, R | A), fwd(200, S)}});
  out.push_back({"rst-first-packet", {fwd(0, R), fwd(10, R)}});
  out.push_back({"flow-timeout-split", {u(0, 10), u(60 * s, 10), u(121 * s, 10), u(130 * s, 10)}, 120 * s});
  out.push_back({"short-timeout", {u(0, 1), u(2 * s, 2), u(4 * s, 3), u(6 * s, 4)}, 3 * s, s});
  out.push_back({"idle-gap", {u(0, 10), u(s, 10), u(8 * s, 10), u(9 * s, 10)}, 120 * s, 5 * s});
  out.push_back({"two-idle-gaps", {u(0, 5), u(6 * s, 5), u(6 * s + 10, 5), u(20 * s, 5)}, 120 * s, 5 * s});
  out.push_back({"fwd-bulk", {u(0, 500), u(100, 500), u(200, 500), u(300, 500), u(400, 500), u(2 * s, 50, false)}});
  out.push_back({"bulk-broken-by-reply", {u(0, 500), u(100, 500), u(150, 10, false), u(200, 500), u(300, 500),
                                          u(400, 500), u(500, 500)}});
  out.push_back({"bulk-broken-by-gap", {u(0, 500), u(100, 500), u(200, 500), u(2 * s, 500), u(2 * s + 1, 500)}});
  out.push_back({"bwd-bulk-with-acks",
                 {fwd(0, A, 10), bwd(10, A, 1000), fwd(20, A), bwd(30, A, 1000), bwd(40, A, 1000), fwd(50, A),
                  bwd(60, A, 1000), bwd(70, A, 1000)}});
  out.push_back({"two-bulks", {u(0, 100), u(10, 100), u(20, 100), u(30, 100), u(3 * s, 200), u(3 * s + 10, 200),
                               u(3 * s + 20, 200), u(3 * s + 30, 200), u(3 * s + 40, 200)}});
  out.push_back({"subflows", {u(0, 1), u(2 * s, 1, false), u(2 * s + 10, 1), u(4 * s, 1), u(4 * s + 1, 1, false)}});
  out.push_back({"simultaneous-packets", {u(0, 7), u(0, 8, false), u(0, 9), u(5, 1)}});
  out.push_back({"three-fwd-six-bwd", {u(0, 1), u(1, 2, false), u(2, 3, false), u(3, 4), u(4, 5, false),
                                       u(5, 6, false), u(6, 7), u(7, 8, false), u(8, 9, false)}});
  out.push_back({"flags-mix", {fwd(0, S | tf::kEce | tf::kCwr), bwd(10, S | A | tf::kEce), fwd(20, A | tf::kUrg, 5),
                               bwd(30, A | P | tf::kUrg, 6), fwd(40, A | tf::kCwr)}});
  out.push_back({"data-after-fin-both", {fwd(0, F | A), bwd(10, F | A), bwd(20, A, 30), fwd(30, A)}});
  out.push_back({"fin-one-side-only", {fwd(0, A, 10), fwd(10, F | A), bwd(20, A), bwd(30, A, 5)}});
  out.push_back({"interleaved-flows", {u(0, 10), fwd(5, S), udp(t0 + 7, "10.0.0.9", 1, v, 2, 3), bwd(9, S | A),
                                       u(11, 20, false), fwd(13, A), arp(t0 + 14), udp(t0 + 20, "10.0.0.9", 1, v, 2, 4)}});
  out.push_back({"port-reuse-after-fin", {fwd(0, S), bwd(10, S | A), fwd(20, F | A), bwd(30, F | A), fwd(40, A),
                                          fwd(50, S), bwd(60, S | A)}});
  out.push_back({"window-only-first-direction", {fwd(0, S, 0, 1024), fwd(10, A, 0, 2048)}});
  out.push_back({"ipv6-udp", {udp(t0, "2001:db8::1", 1000, "2001:db8::2", 2000, 77),
                              udp(t0 + 3 * s, "2001:db8::2", 2000, "2001:db8::1", 1000, 11)}});
  return out;
}

}  // namespace mawiprep::testing
