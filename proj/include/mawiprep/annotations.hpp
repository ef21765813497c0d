// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mawiprep/net.hpp"
#include "mawiprep/table.hpp"

namespace mawiprep::annotations {

/// MAWILab anomaly classes. Benign is never an annotation label: it is
/// whatever no annotation covers.
enum class Label { Anomalous, Suspicious, Notice };

std::string_view to_string(Label label) noexcept;
std::optional<Label> parse_label(std::string_view text);
/// Routing precedence, lower wins: anomalous < suspicious < notice.
int precedence(Label label) noexcept;

/// Inclusive on both ends.
struct TimeWindow {
  std::int64_t start_us = 0;
  std::int64_t stop_us = 0;

  bool contains(std::int64_t ts_us) const noexcept { return start_us <= ts_us && ts_us <= stop_us; }
  friend auto operator<=>(const TimeWindow&, const TimeWindow&) = default;
};

struct AnomalyFilter {
  std::optional<IpAddress> src_ip;
  std::optional<IpAddress> dst_ip;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::optional<std::uint8_t> protocol;
  std::optional<TimeWindow> window;

  bool has_tuple_field() const noexcept { return src_ip || dst_ip || src_port || dst_port || protocol; }
  /// Same 5-tuple predicate, windows ignored.
  bool same_expression(const AnomalyFilter& other) const noexcept;
  /// Human-readable form, e.g. "src=10.0.0.1 sport=* dst=* dport=80 proto=6 [100000000,200000000]".
  std::string to_string() const;

  friend auto operator<=>(const AnomalyFilter&, const AnomalyFilter&) = default;
  friend bool operator==(const AnomalyFilter&, const AnomalyFilter&) = default;
};

struct AnomalyRecord {
  std::string anomaly_id;
  Label label = Label::Anomalous;
  std::string taxonomy;
  std::int64_t heuristic = 0;
  double distance = 0.0;
  std::uint32_t nb_detectors = 0;
  std::vector<AnomalyFilter> filters;

  friend bool operator==(const AnomalyRecord&, const AnomalyRecord&) = default;
};

struct DayAnnotations {
  std::string date;  // YYYY-MM-DD, may be empty for ad-hoc use
  std::vector<AnomalyRecord> anomalies;  // sorted by anomaly_id
  std::vector<std::string> source_files;

  const AnomalyRecord* find(std::string_view anomaly_id) const;
  std::size_t filter_count() const;
  /// Records restricted to window-less filters (records without any are left out).
  std::vector<AnomalyRecord> csv_view() const;
  /// Records restricted to windowed filters (records without any are left out).
  std::vector<AnomalyRecord> admd_view() const;

  friend bool operator==(const DayAnnotations&, const DayAnnotations&) = default;
};

/// Maps canonical column names onto the header names of a concrete CSV file.
/// Canonical names: anomalyID, label, taxonomy, heuristic, distance,
/// nbDetectors, srcIP, srcPort, dstIP, dstPort, protocol. Mapping a name to
/// "-" declares the column absent (every value of it is then a wildcard for
/// filter fields, or a default for metadata).
class CsvColumnMap {
 public:
  CsvColumnMap();
  /// Reads "canonical = actual" lines; '#' starts a comment.
  static CsvColumnMap load(const std::filesystem::path& path);
  static const std::vector<std::string>& canonical_names();

  void set(const std::string& canonical, std::string actual);
  const std::string& get(const std::string& canonical) const;

 private:
  std::map<std::string, std::string> names_;
};

std::vector<AnomalyRecord> parse_csv_annotations_text(std::string_view text, const CsvColumnMap& columns = {});
std::vector<AnomalyRecord> parse_csv_annotations(const std::filesystem::path& path, const CsvColumnMap& columns = {});

struct AdmdParseResult {
  std::vector<AnomalyRecord> anomalies;
  /// Anomalies (or slices) without usable from/to bounds; their filters were
  /// kept without a window.
  std::size_t missing_window_warnings = 0;
};

/// Canonical ADMD layout:
///   <admd>
///     <anomaly id=".." type="anomalous|suspicious|notice" taxonomy=".."
///              heuristic=".." distance=".." nbDetectors="..">
///       <from sec=".." usec=".."/> <to sec=".." usec=".."/>
///       <filter src_ip=".." src_port=".." dst_ip=".." dst_port=".." proto=".."/>
///       <slice> <from/> <to/> <filter/>... </slice>   (optional grouping)
///     </anomaly>
///   </admd>
/// A slice's bounds apply to its filters; otherwise the anomaly's bounds do.
AdmdParseResult parse_admd_text(std::string_view text);
AdmdParseResult parse_admd(const std::filesystem::path& path);

/// Unifies both sources by anomaly_id. Conflicting labels raise a Conflict
/// error. A window-less filter is dropped when a windowed filter with the
/// same expression exists for the same anomaly; exact duplicates collapse.
DayAnnotations merge_annotations(std::vector<AnomalyRecord> csv, std::vector<AnomalyRecord> admd,
                                 std::string date = {});

/// One row per filter.
Table to_table(const DayAnnotations& day);
DayAnnotations from_table(const Table& table, std::string date = {});
const TypeHints& table_hints();

}  // namespace mawiprep::annotations
