// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

// Writes synthetic MAWILab-style days (capture + CSV and ADMD annotations)
// and a manifest listing them.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mawiprep/capture.hpp"
#include "mawiprep/flowmeter.hpp"
#include "mawiprep/hashing.hpp"
#include "mawiprep/pipeline.hpp"
#include "oracles.hpp"

namespace mawiprep::testing {

inline std::int64_t midnight_us(const std::string& date) {
  return *flowmeter::parse_timestamp(date + " 00:00:00.000000");
}

inline std::string opt_text(const std::optional<IpAddress>& ip) { return ip ? ip->to_string() : ""; }
template <typename T>
std::string opt_text(const std::optional<T>& v) {
  return v ? std::to_string(static_cast<unsigned>(*v)) : "";
}

/// Window-less filters go to a CSV file, windowed ones to an ADMD file.
inline pipeline::ManifestEntry write_synthetic_day(const std::filesystem::path& dir, const std::string& date,
                                                   std::size_t packets, std::size_t anomalies, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const auto syn = synthetic_day(seed, packets, anomalies, midnight_us(date) + 3'600'000'000);
  const auto cap = dir / (date + ".pcap");
  capture::write_capture(syn.packets, cap);

  std::string csv = "anomalyID,label,taxonomy,heuristic,distance,nbDetectors,srcIP,srcPort,dstIP,dstPort,protocol\n";
  std::string xml = "<?xml version=\"1.0\"?>\n<admd>\n";
  for (const auto& a : syn.day.anomalies) {
    const std::string meta_attrs = "id=\"" + a.anomaly_id + "\" type=\"" + std::string(annotations::to_string(a.label)) +
                                   "\" taxonomy=\"" + a.taxonomy + "\" heuristic=\"" + std::to_string(a.heuristic) +
                                   "\" distance=\"0\" nbDetectors=\"" + std::to_string(a.nb_detectors) + "\"";
    std::string slices;
    for (const auto& f : a.filters) {
      if (f.window) {
        auto sec = [](std::int64_t us) { return std::to_string(us / 1'000'000); };
        auto usec = [](std::int64_t us) { return std::to_string(us % 1'000'000); };
        slices += "    <slice>\n      <from sec=\"" + sec(f.window->start_us) + "\" usec=\"" + usec(f.window->start_us) +
                  "\"/>\n      <to sec=\"" + sec(f.window->stop_us) + "\" usec=\"" + usec(f.window->stop_us) +
                  "\"/>\n      <filter";
        if (f.src_ip) slices += " src_ip=\"" + f.src_ip->to_string() + "\"";
        if (f.src_port) slices += " src_port=\"" + std::to_string(*f.src_port) + "\"";
        if (f.dst_ip) slices += " dst_ip=\"" + f.dst_ip->to_string() + "\"";
        if (f.dst_port) slices += " dst_port=\"" + std::to_string(*f.dst_port) + "\"";
        if (f.protocol) slices += " proto=\"" + std::to_string(*f.protocol) + "\"";
        slices += "/>\n    </slice>\n";
      } else {
        csv += a.anomaly_id + "," + std::string(annotations::to_string(a.label)) + "," + a.taxonomy + "," +
               std::to_string(a.heuristic) + ",0," + std::to_string(a.nb_detectors) + "," + opt_text(f.src_ip) + "," +
               opt_text(f.src_port) + "," + opt_text(f.dst_ip) + "," + opt_text(f.dst_port) + "," +
               opt_text(f.protocol) + "\n";
      }
    }
    if (!slices.empty()) xml += "  <anomaly " + meta_attrs + ">\n" + slices + "  </anomaly>\n";
  }
  xml += "</admd>\n";
  const auto csv_path = dir / (date + "_anomalous_suspicious.csv");
  const auto xml_path = dir / (date + "_anomaly.xml");
  std::ofstream(csv_path) << csv;
  std::ofstream(xml_path) << xml;
  return {date, cap.string(), {csv_path.string(), xml_path.string()}};
}

inline std::filesystem::path write_manifest(const std::filesystem::path& path,
                                            const std::vector<pipeline::ManifestEntry>& entries) {
  pipeline::Manifest m;
  m.entries = entries;
  std::ofstream(path) << m.to_csv();
  return path;
}

/// Relative path -> sha256 of every regular file below `root`.
inline std::map<std::string, std::string> tree_digest(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = sha256_file(e.path());
  }
  return out;
}

}  // namespace mawiprep::testing
