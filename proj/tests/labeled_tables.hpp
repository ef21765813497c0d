// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "mawiprep/dataset.hpp"
#include "mawiprep/flowmeter.hpp"

namespace mawiprep::testing {

/// A labeled flow table with random feature values. Every `anomaly_every`-th
/// row is anomalous; protocols alternate between TCP and UDP.
inline Table random_labeled_table(std::size_t rows, std::uint64_t seed, std::size_t anomaly_every = 4,
                                  std::int64_t first_ts_us = 1'300'000'000'000'000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> real(0.0, 1e6);
  Table t = dataset::empty_labeled_table();
  for (std::size_t r = 0; r < rows; ++r) {
    const bool anomalous = anomaly_every && r % anomaly_every == anomaly_every - 1;
    for (auto& col : t.columns()) {
      const std::string& n = col.name();
      if (n == "Flow ID") col.push_string("10.0.0." + std::to_string(r % 200) + "-10.0.1.1-" + std::to_string(r) + "-80-6");
      else if (n == "Src IP") col.push_string("10.0.0." + std::to_string(r % 200));
      else if (n == "Dst IP") col.push_string("10.0.1.1");
      else if (n == "Timestamp") col.push_string(flowmeter::format_timestamp(first_ts_us + std::int64_t(r) * 1000));
      else if (n == "Protocol") col.push_int(r % 2 ? 17 : 6);
      else if (n == "Label") col.push_string(anomalous ? "anomalous" : "benign");
      else if (n == "partition") col.push_string(anomalous ? "anomaly=x" : "benign");
      else if (n == "anomaly_id") anomalous ? col.push_string("x") : col.push_null();
      else if (n == "taxonomy") anomalous ? col.push_string("ptmpHTTP") : col.push_null();
      else if (n == "heuristic" || n == "nb_detectors") anomalous ? col.push_int(3) : col.push_null();
      else if (n == "distance") anomalous ? col.push_double(0.25) : col.push_null();
      else if (col.type() == ColumnType::Int64) col.push_int(static_cast<std::int64_t>(rng() % 65536));
      else if (col.type() == ColumnType::Double) col.push_double(std::floor(real(rng)) / 8);
      else col.push_string("s");
    }
  }
  return t;
}

}  // namespace mawiprep::testing
