// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mawiprep/dataset.hpp"
#include "mawiprep/flowmeter.hpp"
#include "mawiprep/splitter.hpp"

namespace mawiprep::pipeline {

enum class Stage { MergeAnnotations, Split, Flows, Label, Aggregate, Sample, Preprocess };

std::string_view to_string(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view name);
bool is_day_stage(Stage stage) noexcept;
/// The five per-day stages in execution order.
const std::vector<Stage>& day_stages();
/// Comma-separated stage names or "all"; result is in execution order.
std::vector<Stage> parse_stage_list(std::string_view text);

/// True for a real calendar date written as YYYY-MM-DD.
bool valid_date(std::string_view date);
/// "year=YYYY/month=MM/day=DD"
std::filesystem::path day_partition(std::string_view date);
/// "year=YYYY/month=MM" for a "YYYY-MM" month.
std::filesystem::path month_partition(std::string_view month);

struct ManifestEntry {
  std::string date;
  std::string capture;
  std::vector<std::string> annotations;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// CSV with header "date,capture,annotations"; annotation paths are
/// separated by ';'. Locations are local paths or file:// URLs.
struct Manifest {
  std::vector<ManifestEntry> entries;  // sorted by date

  const ManifestEntry* find(std::string_view date) const;
  std::vector<std::string> dates() const;
  std::string to_csv() const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

Manifest parse_manifest_text(std::string_view text);
Manifest read_manifest(const std::filesystem::path& path);
/// Resolves a manifest location to a local path (file:// is stripped;
/// other URL schemes are Unsupported).
std::filesystem::path resolve_location(std::string_view location);

inline constexpr const char* kRootEnvVar = "MAWIPREP_DATA_ROOT";
/// Explicit root, else $MAWIPREP_DATA_ROOT, else "./data".
std::filesystem::path resolve_root(const std::optional<std::filesystem::path>& explicit_root);

struct PipelineConfig {
  std::filesystem::path root = "data";
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  flowmeter::FlowOptions flow;
  splitter::SplitOptions split;
  std::size_t target_rows = dataset::kDefaultTargetRows;
  bool stratify_by_day = false;
  bool with_validation = false;
};

/// Sidecar record of the inputs and outputs of every executed stage.
class Ledger {
 public:
  struct Entry {
    std::string input_hash;
    std::string output_hash;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  explicit Ledger(std::filesystem::path path);

  std::optional<Entry> get(const std::string& scope, Stage stage) const;
  /// Records and persists (temp file + rename) under a single writer lock.
  void put(const std::string& scope, Stage stage, Entry entry);

 private:
  void save_locked() const;

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, Entry> entries_;
};

struct StageReport {
  Stage stage;
  std::string scope;  // date or month
  bool executed = false;
  std::string reason;  // why it ran, or "up to date"
};

struct DayStat {
  std::string date;
  std::uint64_t rows = 0;
  std::uint64_t benign = 0;
  std::uint64_t labeled = 0;  // every non-benign label
  std::uint64_t annotation_filters = 0;
};

struct Stats {
  std::uint64_t rows = 0;
  std::map<std::string, std::uint64_t> label_counts;
  /// Non-benign share of all rows; 0 for an empty dataset.
  double anomaly_ratio = 0.0;
  std::vector<DayStat> days;

  std::string to_json() const;
  /// Per-day plot data: date,rows,benign,labeled,annotation_filters
  std::string to_csv() const;
};

/// Summarizes the aggregated day tables found under `root`/processed.
Stats compute_stats(const std::filesystem::path& root);

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();

  const PipelineConfig& config() const noexcept { return config_; }

  std::filesystem::path raw_dir(std::string_view date) const;
  std::filesystem::path interim_dir(std::string_view date) const;
  std::filesystem::path processed_dir(std::string_view date) const;
  std::filesystem::path samples_dir(std::string_view month) const;
  std::filesystem::path preprocessed_dir(std::string_view month) const;

  /// Validates the manifest, copies captures (decompressed) and annotation
  /// files into raw/, and stores the manifest at the data root.
  Manifest ingest(const std::filesystem::path& manifest_path);
  /// The ingested manifest.
  Manifest manifest() const;

  std::vector<StageReport> run_day(const std::string& date, const std::vector<Stage>& stages);
  /// Runs day stages for each date on the worker pool, then any requested
  /// month stages for the months touched. Reports are in date order.
  std::vector<StageReport> run(const std::vector<std::string>& dates, const std::vector<Stage>& stages);
  /// Manifest dates within [from, to].
  std::vector<std::string> dates_in_range(std::string_view from, std::string_view to) const;

  StageReport sample(const std::string& month);
  StageReport preprocess(const std::string& month);

 private:
  struct StageWork;
  StageReport execute(const StageWork& work, bool force);

  PipelineConfig config_;
  std::unique_ptr<Ledger> ledger_;
};

}  // namespace mawiprep::pipeline
