// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mawiprep/annotations.hpp"
#include "mawiprep/splitter.hpp"
#include "mawiprep/table.hpp"

namespace mawiprep::dataset {

inline constexpr std::string_view kBenignLabel = "benign";

/// Columns appended after "Label" by label propagation. Null on benign rows.
inline constexpr std::array<std::string_view, 5> kSideColumns{"anomaly_id", "taxonomy", "heuristic", "distance",
                                                               "nb_detectors"};
/// Source partition key ("benign" / "anomaly=<id>"), last column of labeled tables.
inline constexpr std::string_view kPartitionColumn = "partition";

/// Columns never scaled: flow identification, Protocol and Label.
inline constexpr std::array<std::string_view, 8> kExcludedColumns{
    "Flow ID", "Src IP", "Src Port", "Dst IP", "Dst Port", "Timestamp", "Protocol", "Label"};

const TypeHints& labeled_table_hints();
/// Flow schema followed by the side columns and the partition column.
const std::vector<std::string>& labeled_schema();
/// A labeled table with no rows.
Table empty_labeled_table();

/// Seeded generator with a platform-independent bounded draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Replaces the Label column of a flow table with the partition's class and
/// appends the side columns. Throws Consistency for an unknown anomaly.
Table propagate_labels(const Table& flows, const splitter::PartitionId& partition,
                       const annotations::DayAnnotations& day);

/// Stable sort by Timestamp, then Flow ID, then partition (when present).
void sort_flows(Table& table);

/// Concatenates same-schema tables and sorts them with sort_flows.
Table aggregate_day(std::span<const Table> tables);

struct SampleOptions {
  /// Allocate the target across days in proportion to their size.
  bool stratify_by_day = false;
};

inline constexpr std::size_t kDefaultTargetRows = 3'000'000;

/// Uniform sample without replacement over all rows of `days`, re-sorted.
Table sample_period(std::span<const Table> days, std::size_t target_rows, std::uint64_t seed,
                    const SampleOptions& options = {});

struct FeatureRange {
  std::string name;
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const FeatureRange&, const FeatureRange&) = default;
};

/// Checksummed key/value text: one "key=value" per line, last line
/// "sha256=<digest of everything before it>".
std::string seal_sidecar(const std::vector<std::pair<std::string, std::string>>& entries);
/// Verifies the checksum (Consistency error on mismatch) and returns entries in order.
std::vector<std::pair<std::string, std::string>> open_sidecar(std::string_view text);

struct ScalerParams {
  std::vector<FeatureRange> features;
  std::string dataset_hash;
  std::uint64_t seed = 0;

  const FeatureRange* find(std::string_view name) const;
  std::string to_text() const;
  static ScalerParams from_text(std::string_view text);

  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

/// Numeric columns other than kExcludedColumns, the side columns and
/// one-hot indicator columns, in table order.
std::vector<std::string> scalable_columns(const Table& table);

ScalerParams fit_scaler(const Table& train, std::string dataset_hash = {}, std::uint64_t seed = 0);
/// x' = (x - min) / (max - min), or 0 for a constant feature. Values outside
/// the fitted range map outside [0, 1]; nothing is clipped.
Table apply_scaler(const Table& table, const ScalerParams& params);
/// Inverse of apply_scaler (constant features come back as their min).
Table invert_scaler(const Table& table, const ScalerParams& params);

inline constexpr std::string_view kProtocolColumn = "Protocol";
inline constexpr std::string_view kIndicatorPrefix = "Protocol_";

struct OneHotEncoder {
  std::vector<std::int64_t> categories;  // ascending

  static OneHotEncoder fit(const Table& train);
  /// Replaces Protocol by one "Protocol_<n>" column per fitted category.
  /// Rows with an unseen or null protocol get all zeros and are counted.
  Table apply(const Table& table, std::size_t* unseen_rows = nullptr) const;
};

/// "benign" -> 0, any other label -> 1 (Int64 column).
Table binarize_label(const Table& table);

struct DropResult {
  Table table;
  std::size_t dropped = 0;
};
/// Removes rows with a null cell or a non-finite number.
DropResult drop_missing(const Table& table);

enum class SplitRole : std::uint8_t { Train, Validation, Test };
std::string_view to_string(SplitRole role) noexcept;

inline constexpr double kTestFraction = 0.2;
inline constexpr double kValidationFraction = 0.2;

struct SplitManifest {
  std::uint64_t seed = 0;
  bool with_validation = false;
  std::vector<SplitRole> assignment;  // one entry per row

  std::size_t count(SplitRole role) const;
  std::vector<std::size_t> rows(SplitRole role) const;
  std::string to_text() const;
  static SplitManifest from_text(std::string_view text);

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// 80/20 train/test; with validation the train share is split 80/20 again.
SplitManifest split_dataset(std::size_t rows, std::uint64_t seed, bool with_validation);
inline SplitManifest split_dataset(const Table& table, std::uint64_t seed, bool with_validation) {
  return split_dataset(table.rows(), seed, with_validation);
}

struct PreprocessOptions {
  std::uint64_t seed = 0;
  bool with_validation = false;
};

struct PreprocessResult {
  Table train;
  Table validation;
  Table test;
  ScalerParams scaler;
  OneHotEncoder encoder;
  SplitManifest manifest;
  std::size_t dropped_missing = 0;
  std::size_t unseen_protocol_rows = 0;
};

/// Side columns dropped, missing rows dropped, labels binarized, rows split,
/// then one-hot and min-max scaling fitted on the train rows and applied to all.
PreprocessResult preprocess(const Table& sampled, const PreprocessOptions& options = {});

}  // namespace mawiprep::dataset
