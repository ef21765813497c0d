// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/pipeline.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <json.hpp>

#include "mawiprep/annotations.hpp"
#include "mawiprep/error.hpp"
#include "mawiprep/hashing.hpp"
#include "mawiprep/table.hpp"

namespace mawiprep::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 7> kStageNames{"merge-annotations", "split", "flows", "label",
                                                      "aggregate", "sample", "preprocess"};

constexpr const char* kManifestFile = "manifest.csv";
constexpr const char* kLedgerFile = "ledger.tsv";
constexpr const char* kCaptureFile = "capture.pcap";
constexpr const char* kAnnotationsDir = "annotations";
constexpr const char* kAnnotationsStem = "annotations";
constexpr const char* kSplitDir = "split";
constexpr const char* kFlowsDir = "flows";
constexpr const char* kLabeledDir = "labeled";
constexpr const char* kDayTableStem = "flows";
constexpr const char* kSampleStem = "sample";

std::string month_of(std::string_view date) { return std::string(date.substr(0, 7)); }

bool digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool valid_month(std::string_view month) {
  if (month.size() != 7 || month[4] != '-' || !digits(month.substr(0, 4)) || !digits(month.substr(5, 2))) return false;
  const int m = std::stoi(std::string(month.substr(5, 2)));
  return m >= 1 && m <= 12;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Replaces `target` with the directory filled by `fill`, staging next to it.
void replace_directory(const fs::path& target, const std::function<void(const fs::path&)>& fill) {
  fs::path staging = target;
  staging += ".tmp-" + std::to_string(::getpid());
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging);
  try {
    fill(staging);
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  fs::remove_all(target, ec);
  fs::rename(staging, target, ec);
  if (ec) throw Error(ErrorCategory::Io, target.string() + ": cannot move staged output into place: " + ec.message());
}

void decompress_copy(const fs::path& src, const fs::path& dst) {
  gzFile in = gzopen(src.c_str(), "rb");
  if (!in) throw Error(ErrorCategory::Io, src.string() + ": cannot open");
  std::vector<std::uint8_t> data;
  std::vector<char> buf(1 << 20);
  int n;
  while ((n = gzread(in, buf.data(), static_cast<unsigned>(buf.size()))) > 0) data.insert(data.end(), buf.begin(), buf.begin() + n);
  int err = Z_OK;
  const char* msg = n < 0 ? gzerror(in, &err) : nullptr;
  gzclose(in);
  if (n < 0) throw Error(ErrorCategory::Io, src.string() + ": decompression failed: " + (msg ? msg : "unknown"));
  write_file_atomic(dst, data);
}

void hash_tree(Sha256& h, const fs::path& root, const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(path)) children.push_back(e.path());
    std::sort(children.begin(), children.end());
    for (const auto& c : children) hash_tree(h, root, c);
  } else if (fs::exists(path)) {
    h.field(fs::relative(path, root).generic_string());
    h.field(sha256_file(path));
  } else {
    h.field(fs::relative(path, root).generic_string());
    h.field("<missing>");
  }
}

std::vector<std::string> report_keys(const fs::path& split_dir) {
  const auto report = splitter::SplitReport::from_json(read_file(split_dir / splitter::kSplitReportFile));
  std::vector<std::string> keys;
  for (const auto& [k, count] : report.partition_counts) {
    if (count > 0) keys.push_back(k);
  }
  return keys;
}

std::string stem_of(const std::string& key) { return splitter::PartitionId::from_key(key).file_stem(); }

annotations::DayAnnotations load_day_annotations(const fs::path& interim, const std::string& date) {
  auto path = interim / kAnnotationsStem;
  path += ".csv";
  return annotations::from_table(read_csv_table(path, annotations::table_hints()), date);
}

fs::path with_ext(fs::path stem, const char* ext) {
  stem += ext;
  return stem;
}

}  // namespace

// --- stages ----------------------------------------------------------------------

std::string_view to_string(Stage stage) noexcept { return kStageNames[static_cast<std::size_t>(stage)]; }

std::optional<Stage> parse_stage(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == name) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

bool is_day_stage(Stage stage) noexcept { return stage != Stage::Sample && stage != Stage::Preprocess; }

const std::vector<Stage>& day_stages() {
  static const std::vector<Stage> stages{Stage::MergeAnnotations, Stage::Split, Stage::Flows, Stage::Label,
                                         Stage::Aggregate};
  return stages;
}

std::vector<Stage> parse_stage_list(std::string_view text) {
  std::set<Stage> chosen;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string name = trim(text.substr(start, end - start));
    if (name == "all") {
      for (std::size_t i = 0; i < kStageNames.size(); ++i) chosen.insert(static_cast<Stage>(i));
    } else if (!name.empty()) {
      const auto s = parse_stage(name);
      if (!s) throw Error(ErrorCategory::InvalidArgument, "unknown stage '" + name + "'");
      chosen.insert(*s);
    }
    start = end + 1;
  }
  if (chosen.empty()) throw Error(ErrorCategory::InvalidArgument, "no stages selected");
  return {chosen.begin(), chosen.end()};
}

// --- dates -----------------------------------------------------------------------

bool valid_date(std::string_view date) {
  if (date.size() != 10 || date[7] != '-' || !valid_month(date.substr(0, 7)) || !digits(date.substr(8, 2))) {
    return false;
  }
  const int y = std::stoi(std::string(date.substr(0, 4)));
  const int m = std::stoi(std::string(date.substr(5, 2)));
  const int d = std::stoi(std::string(date.substr(8, 2)));
  constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return d >= 1 && d <= kDays[m - 1] + (m == 2 && leap ? 1 : 0);
}

fs::path day_partition(std::string_view date) {
  if (!valid_date(date)) throw Error(ErrorCategory::InvalidArgument, "invalid date '" + std::string(date) + "'");
  return fs::path("year=" + std::string(date.substr(0, 4))) / ("month=" + std::string(date.substr(5, 2))) /
         ("day=" + std::string(date.substr(8, 2)));
}

fs::path month_partition(std::string_view month) {
  if (!valid_month(month)) throw Error(ErrorCategory::InvalidArgument, "invalid month '" + std::string(month) + "'");
  return fs::path("year=" + std::string(month.substr(0, 4))) / ("month=" + std::string(month.substr(5, 2)));
}

// --- manifest --------------------------------------------------------------------

const ManifestEntry* Manifest::find(std::string_view date) const {
  for (const auto& e : entries) {
    if (e.date == date) return &e;
  }
  return nullptr;
}

std::vector<std::string> Manifest::dates() const {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.date);
  return out;
}

std::string Manifest::to_csv() const {
  std::string out = "date,capture,annotations\n";
  for (const auto& e : entries) {
    std::string ann;
    for (std::size_t i = 0; i < e.annotations.size(); ++i) ann += (i ? ";" : "") + e.annotations[i];
    out += e.date + "," + csv_escape(e.capture) + "," + csv_escape(ann) + "\n";
  }
  return out;
}

Manifest parse_manifest_text(std::string_view text) {
  Manifest m;
  const auto rows = parse_csv(text);
  if (rows.empty()) return m;
  const auto& header = rows.front().fields;
  if (header.size() != 3 || trim(header[0]) != "date" || trim(header[1]) != "capture" ||
      trim(header[2]) != "annotations") {
    throw Error(ErrorCategory::Parse, "manifest line " + std::to_string(rows.front().line) +
                                          ": expected header 'date,capture,annotations'");
  }
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string where = "manifest line " + std::to_string(row.line);
    if (row.fields.size() != 3) throw Error(ErrorCategory::Parse, where + ": expected 3 fields");
    ManifestEntry e;
    e.date = trim(row.fields[0]);
    e.capture = trim(row.fields[1]);
    if (!valid_date(e.date)) throw Error(ErrorCategory::Validation, where + ": invalid date '" + e.date + "'");
    if (e.capture.empty()) throw Error(ErrorCategory::Validation, where + ": missing capture for " + e.date);
    std::string_view ann = row.fields[2];
    std::size_t start = 0;
    while (start <= ann.size()) {
      const std::size_t end = std::min(ann.find(';', start), ann.size());
      if (auto a = trim(ann.substr(start, end - start)); !a.empty()) e.annotations.push_back(std::move(a));
      start = end + 1;
    }
    if (e.annotations.empty()) throw Error(ErrorCategory::Validation, where + ": no annotation files for " + e.date);
    if (!seen.insert(e.date).second) throw Error(ErrorCategory::Validation, where + ": duplicate date " + e.date);
    m.entries.push_back(std::move(e));
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  return m;
}

Manifest read_manifest(const fs::path& path) { return parse_manifest_text(read_file(path)); }

fs::path resolve_location(std::string_view location) {
  if (location.starts_with("file://")) return fs::path(std::string(location.substr(7)));
  if (location.find("://") != std::string_view::npos) {
    throw Error(ErrorCategory::Unsupported, "remote location '" + std::string(location) +
                                                "' is not fetched; download it and list the local path");
  }
  return fs::path(std::string(location));
}

fs::path resolve_root(const std::optional<fs::path>& explicit_root) {
  if (explicit_root) return *explicit_root;
  if (const char* env = std::getenv(kRootEnvVar); env && *env) return fs::path(env);
  return fs::path("data");
}

// --- ledger ----------------------------------------------------------------------

Ledger::Ledger(fs::path path) : path_(std::move(path)) {
  if (!fs::exists(path_)) return;
  std::istringstream in(read_file(path_));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      f.push_back(line.substr(start, tab - start));
    }
    f.push_back(line.substr(start));
    if (f.size() != 4) throw Error(ErrorCategory::Parse, path_.string() + ": malformed ledger line");
    entries_[{f[0], f[1]}] = Entry{f[2], f[3]};
  }
}

std::optional<Ledger::Entry> Ledger::get(const std::string& scope, Stage stage) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find({scope, std::string(to_string(stage))});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void Ledger::put(const std::string& scope, Stage stage, Entry entry) {
  std::lock_guard lock(mutex_);
  entries_[{scope, std::string(to_string(stage))}] = std::move(entry);
  save_locked();
}

void Ledger::save_locked() const {
  std::string out;
  for (const auto& [key, e] : entries_) out += key.first + "\t" + key.second + "\t" + e.input_hash + "\t" + e.output_hash + "\n";
  write_file_atomic(path_, out);
}

// --- stats -----------------------------------------------------------------------

std::string Stats::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = rows;
  j["label_counts"] = label_counts;
  j["anomaly_ratio"] = anomaly_ratio;
  j["days"] = nlohmann::ordered_json::array();
  for (const auto& d : days) {
    j["days"].push_back({{"date", d.date},
                         {"rows", d.rows},
                         {"benign", d.benign},
                         {"labeled", d.labeled},
                         {"annotation_filters", d.annotation_filters}});
  }
  return j.dump(2) + "\n";
}

std::string Stats::to_csv() const {
  std::string out = "date,rows,benign,labeled,annotation_filters\n";
  for (const auto& d : days) {
    out += d.date + "," + std::to_string(d.rows) + "," + std::to_string(d.benign) + "," + std::to_string(d.labeled) +
           "," + std::to_string(d.annotation_filters) + "\n";
  }
  return out;
}

Stats compute_stats(const fs::path& root) {
  Stats s;
  const fs::path processed = root / "processed";
  if (!fs::exists(processed)) return s;
  std::vector<fs::path> tables;
  for (const auto& e : fs::recursive_directory_iterator(processed)) {
    if (e.is_regular_file() && e.path().filename() == std::string(kDayTableStem) + ".csv") tables.push_back(e.path());
  }
  std::sort(tables.begin(), tables.end());
  for (const auto& path : tables) {
    const fs::path rel = fs::relative(path.parent_path(), processed);
    std::vector<std::string> parts;
    for (const auto& p : rel) parts.push_back(p.string());
    if (parts.size() != 3 || !parts[0].starts_with("year=") || !parts[1].starts_with("month=") ||
        !parts[2].starts_with("day=")) {
      continue;
    }
    DayStat d;
    d.date = parts[0].substr(5) + "-" + parts[1].substr(6) + "-" + parts[2].substr(4);
    const Table t = read_csv_table(path, dataset::labeled_table_hints());
    const Column& label = t.column(flowmeter::kLabelColumn);
    for (std::size_t i = 0; i < t.rows(); ++i) {
      const std::string l = label.is_null(i) ? std::string() : label.string_at(i);
      ++s.label_counts[l];
      if (l == dataset::kBenignLabel) ++d.benign;
      else ++d.labeled;
    }
    d.rows = t.rows();
    const fs::path ann = root / "interim" / rel / (std::string(kAnnotationsStem) + ".csv");
    if (fs::exists(ann)) d.annotation_filters = load_day_annotations(ann.parent_path(), d.date).filter_count();
    s.rows += d.rows;
    s.days.push_back(std::move(d));
  }
  std::uint64_t labeled = 0;
  for (const auto& d : s.days) labeled += d.labeled;
  s.anomaly_ratio = s.rows ? static_cast<double>(labeled) / static_cast<double>(s.rows) : 0.0;
  return s;
}

// --- pipeline --------------------------------------------------------------------

struct Pipeline::StageWork {
  Stage stage;
  std::string scope;
  std::vector<fs::path> inputs;
  std::vector<std::string> params;
  std::vector<fs::path> outputs;
  std::function<void()> action;
};

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  if (config_.jobs == 0) throw Error(ErrorCategory::InvalidArgument, "--jobs must be at least 1");
  fs::create_directories(config_.root);
  ledger_ = std::make_unique<Ledger>(config_.root / kLedgerFile);
}

Pipeline::~Pipeline() = default;

fs::path Pipeline::raw_dir(std::string_view date) const { return config_.root / "raw" / day_partition(date); }
fs::path Pipeline::interim_dir(std::string_view date) const { return config_.root / "interim" / day_partition(date); }
fs::path Pipeline::processed_dir(std::string_view date) const {
  return config_.root / "processed" / day_partition(date);
}
fs::path Pipeline::samples_dir(std::string_view month) const {
  return config_.root / "samples" / month_partition(month);
}
fs::path Pipeline::preprocessed_dir(std::string_view month) const {
  return config_.root / "preprocessed" / month_partition(month);
}

Manifest Pipeline::ingest(const fs::path& manifest_path) {
  Manifest incoming = read_manifest(manifest_path);
  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  auto local = [&base](const std::string& location) {
    fs::path p = resolve_location(location);
    return p.is_absolute() ? p : base / p;
  };
  // Everything is checked before anything is copied.
  for (const auto& e : incoming.entries) {
    if (!fs::is_regular_file(local(e.capture))) {
      throw Error(ErrorCategory::Io, e.date + ": capture '" + e.capture + "' not found");
    }
    std::set<std::string> names;
    for (const auto& a : e.annotations) {
      const fs::path p = local(a);
      if (!fs::is_regular_file(p)) throw Error(ErrorCategory::Io, e.date + ": annotation file '" + a + "' not found");
      if (!names.insert(p.filename().string()).second) {
        throw Error(ErrorCategory::Validation, e.date + ": two annotation files named " + p.filename().string());
      }
    }
  }
  for (const auto& e : incoming.entries) {
    const fs::path dir = raw_dir(e.date);
    decompress_copy(local(e.capture), dir / kCaptureFile);
    replace_directory(dir / kAnnotationsDir, [&](const fs::path& staging) {
      for (const auto& a : e.annotations) {
        const fs::path p = local(a);
        write_file_atomic(staging / p.filename(), read_file(p));
      }
    });
  }
  Manifest merged;
  if (fs::exists(config_.root / kManifestFile)) merged = manifest();
  for (auto& e : incoming.entries) {
    std::erase_if(merged.entries, [&e](const ManifestEntry& m) { return m.date == e.date; });
    merged.entries.push_back(e);
  }
  std::sort(merged.entries.begin(), merged.entries.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  write_file_atomic(config_.root / kManifestFile, merged.to_csv());
  return incoming;
}

Manifest Pipeline::manifest() const {
  const fs::path path = config_.root / kManifestFile;
  if (!fs::exists(path)) throw Error(ErrorCategory::InvalidArgument, "no manifest ingested under " + config_.root.string());
  return read_manifest(path);
}

std::vector<std::string> Pipeline::dates_in_range(std::string_view from, std::string_view to) const {
  if (!valid_date(from) || !valid_date(to)) throw Error(ErrorCategory::InvalidArgument, "invalid date range");
  if (from > to) throw Error(ErrorCategory::InvalidArgument, "range start is after its end");
  std::vector<std::string> out;
  for (const auto& d : manifest().dates()) {
    if (d >= from && d <= to) out.push_back(d);
  }
  return out;
}

StageReport Pipeline::execute(const StageWork& work, bool force) {
  Sha256 in;
  in.field(to_string(work.stage));
  for (const auto& p : work.params) in.field(p);
  for (const auto& path : work.inputs) {
    if (!fs::is_regular_file(path)) {
      throw Error(ErrorCategory::Io, work.scope + " " + std::string(to_string(work.stage)) + ": missing input " +
                                         path.string());
    }
    in.field(fs::relative(path, config_.root).generic_string());
    in.field(sha256_file(path));
  }
  const std::string input_hash = in.hex();
  auto output_hash = [&] {
    Sha256 out;
    for (const auto& path : work.outputs) hash_tree(out, config_.root, path);
    return out.hex();
  };

  StageReport report{work.stage, work.scope, true, {}};
  const auto prev = ledger_->get(work.scope, work.stage);
  if (force) report.reason = "upstream stage reran";
  else if (!prev) report.reason = "no previous run";
  else if (prev->input_hash != input_hash) report.reason = "inputs changed";
  else if (prev->output_hash != output_hash()) report.reason = "outputs missing or modified";
  else return {work.stage, work.scope, false, "up to date"};

  work.action();
  ledger_->put(work.scope, work.stage, {input_hash, output_hash()});
  return report;
}

std::vector<StageReport> Pipeline::run_day(const std::string& date, const std::vector<Stage>& stages) {
  const Manifest m = manifest();
  const ManifestEntry* entry = m.find(date);
  if (!entry) throw Error(ErrorCategory::InvalidArgument, date + " is not in the manifest");
  const fs::path raw = raw_dir(date);
  const fs::path interim = interim_dir(date);
  const fs::path processed = processed_dir(date);
  const fs::path capture = raw / kCaptureFile;
  std::vector<fs::path> annotation_files;
  for (const auto& a : entry->annotations) annotation_files.push_back(raw / kAnnotationsDir / resolve_location(a).filename());
  if (!fs::is_regular_file(capture)) throw Error(ErrorCategory::Io, date + ": capture missing; run ingest first");
  for (const auto& a : annotation_files) {
    if (!fs::is_regular_file(a)) throw Error(ErrorCategory::Io, date + ": annotation file " + a.string() + " missing");
  }

  const fs::path ann_stem = interim / kAnnotationsStem;
  const fs::path ann_csv = with_ext(ann_stem, ".csv");
  const fs::path split_dir = interim / kSplitDir;
  const fs::path flows_dir = interim / kFlowsDir;
  const fs::path labeled_dir = interim / kLabeledDir;
  const fs::path day_stem = processed / kDayTableStem;
  const auto split_report = split_dir / splitter::kSplitReportFile;

  auto build = [&](Stage stage) -> StageWork {
    StageWork w{stage, date, {}, {}, {}, {}};
    switch (stage) {
      case Stage::MergeAnnotations:
        w.inputs = annotation_files;
        w.outputs = {ann_csv, with_ext(ann_stem, ".parquet")};
        w.action = [&] {
          std::vector<annotations::AnomalyRecord> csv, admd;
          for (const auto& f : annotation_files) {
            if (f.extension() == ".xml") {
              auto parsed = annotations::parse_admd(f);
              std::move(parsed.anomalies.begin(), parsed.anomalies.end(), std::back_inserter(admd));
            } else {
              auto parsed = annotations::parse_csv_annotations(f);
              std::move(parsed.begin(), parsed.end(), std::back_inserter(csv));
            }
          }
          const auto day = annotations::merge_annotations(std::move(csv), std::move(admd), date);
          write_table_pair(annotations::to_table(day), ann_stem);
        };
        break;
      case Stage::Split:
        w.inputs = {capture, ann_csv};
        w.params = {"symmetric=" + std::to_string(config_.split.symmetric_filters),
                    "exclude_notice=" + std::to_string(config_.split.exclude_notice),
                    "metadata=" + std::to_string(config_.split.packet_metadata)};
        w.outputs = {split_dir};
        w.action = [&] { splitter::split_capture(capture, load_day_annotations(interim, date), split_dir, config_.split); };
        break;
      case Stage::Flows:
        w.inputs = {split_report};
        if (fs::exists(split_report)) {
          for (const auto& k : report_keys(split_dir)) w.inputs.push_back(split_dir / (stem_of(k) + ".pcap"));
        }
        w.params = {"flow_timeout=" + std::to_string(config_.flow.flow_timeout_us),
                    "activity_timeout=" + std::to_string(config_.flow.activity_timeout_us),
                    "reorder_slack=" + std::to_string(config_.flow.reorder_slack_us)};
        w.outputs = {flows_dir};
        w.action = [&] {
          replace_directory(flows_dir, [&](const fs::path& staging) {
            for (const auto& k : report_keys(split_dir)) {
              const std::string stem = stem_of(k);
              const auto flows = flowmeter::flows_from_capture(split_dir / (stem + ".pcap"), config_.flow);
              write_table_pair(flowmeter::to_table(flows), staging / stem);
            }
          });
        };
        break;
      case Stage::Label:
        w.inputs = {split_report, ann_csv};
        if (fs::exists(split_report)) {
          for (const auto& k : report_keys(split_dir)) w.inputs.push_back(flows_dir / (stem_of(k) + ".csv"));
        }
        w.outputs = {labeled_dir};
        w.action = [&] {
          const auto day = load_day_annotations(interim, date);
          replace_directory(labeled_dir, [&](const fs::path& staging) {
            for (const auto& k : report_keys(split_dir)) {
              const std::string stem = stem_of(k);
              const Table flows = read_csv_table(flows_dir / (stem + ".csv"), flowmeter::flow_table_hints());
              write_table_pair(dataset::propagate_labels(flows, splitter::PartitionId::from_key(k), day),
                               staging / stem);
            }
          });
        };
        break;
      case Stage::Aggregate:
        w.inputs = {split_report};
        if (fs::exists(split_report)) {
          for (const auto& k : report_keys(split_dir)) w.inputs.push_back(labeled_dir / (stem_of(k) + ".csv"));
        }
        w.outputs = {with_ext(day_stem, ".csv"), with_ext(day_stem, ".parquet")};
        w.action = [&] {
          std::vector<Table> tables;
          for (const auto& k : report_keys(split_dir)) {
            tables.push_back(read_csv_table(labeled_dir / (stem_of(k) + ".csv"), dataset::labeled_table_hints()));
          }
          write_table_pair(dataset::aggregate_day(tables), day_stem);
        };
        break;
      default:
        throw Error(ErrorCategory::Internal, "not a day stage");
    }
    return w;
  };

  std::vector<StageReport> reports;
  bool upstream_ran = false;
  for (const Stage s : day_stages()) {
    if (std::find(stages.begin(), stages.end(), s) == stages.end()) continue;
    reports.push_back(execute(build(s), upstream_ran));
    upstream_ran = upstream_ran || reports.back().executed;
  }
  return reports;
}

namespace {

struct MonthStages {
  static std::vector<fs::path> day_tables(const Pipeline& p, const Manifest& m, const std::string& month) {
    std::vector<fs::path> out;
    for (const auto& d : m.dates()) {
      if (month_of(d) == month) out.push_back(p.processed_dir(d) / (std::string(kDayTableStem) + ".csv"));
    }
    if (out.empty()) throw Error(ErrorCategory::InvalidArgument, "no manifest days in " + month);
    return out;
  }
};

}  // namespace

StageReport Pipeline::sample(const std::string& month) {
  const auto tables = MonthStages::day_tables(*this, manifest(), month);
  const fs::path stem = samples_dir(month) / kSampleStem;
  StageWork w{Stage::Sample, month, tables,
              {"target_rows=" + std::to_string(config_.target_rows), "seed=" + std::to_string(config_.seed),
               "stratify=" + std::to_string(config_.stratify_by_day)},
              {with_ext(stem, ".csv"), with_ext(stem, ".parquet")},
              {}};
  w.action = [&] {
    std::vector<Table> days;
    for (const auto& t : tables) days.push_back(read_csv_table(t, dataset::labeled_table_hints()));
    dataset::SampleOptions opts;
    opts.stratify_by_day = config_.stratify_by_day;
    write_table_pair(dataset::sample_period(days, config_.target_rows, config_.seed, opts), stem);
  };
  return execute(w, false);
}

StageReport Pipeline::preprocess(const std::string& month) {
  const fs::path sample_csv = with_ext(samples_dir(month) / kSampleStem, ".csv");
  const fs::path out = preprocessed_dir(month);
  StageWork w{Stage::Preprocess, month, {sample_csv},
              {"seed=" + std::to_string(config_.seed), "with_validation=" + std::to_string(config_.with_validation)},
              {out}, {}};
  w.action = [&] {
    const Table sampled = read_csv_table(sample_csv, dataset::labeled_table_hints());
    dataset::PreprocessOptions opts{config_.seed, config_.with_validation};
    const auto res = dataset::preprocess(sampled, opts);
    replace_directory(out, [&](const fs::path& staging) {
      write_table_pair(res.train, staging / "train");
      if (config_.with_validation) write_table_pair(res.validation, staging / "validation");
      write_table_pair(res.test, staging / "test");
      write_file_atomic(staging / "scaler.txt", res.scaler.to_text());
      write_file_atomic(staging / "split.txt", res.manifest.to_text());
      std::string protocols;
      for (const auto p : res.encoder.categories) protocols += (protocols.empty() ? "" : ",") + std::to_string(p);
      write_file_atomic(staging / "encoder.txt",
                        dataset::seal_sidecar({{"format", "mawiprep-onehot/1"},
                                               {"column", std::string(dataset::kProtocolColumn)},
                                               {"categories", protocols}}));
      write_file_atomic(staging / "report.txt",
                        dataset::seal_sidecar({{"format", "mawiprep-preprocess-report/1"},
                                               {"input_rows", std::to_string(sampled.rows())},
                                               {"dropped_missing", std::to_string(res.dropped_missing)},
                                               {"unseen_protocol_rows", std::to_string(res.unseen_protocol_rows)}}));
    });
  };
  return execute(w, false);
}

std::vector<StageReport> Pipeline::run(const std::vector<std::string>& dates, const std::vector<Stage>& stages) {
  std::vector<Stage> day;
  bool want_sample = false;
  bool want_preprocess = false;
  for (const Stage s : stages) {
    if (is_day_stage(s)) day.push_back(s);
    want_sample = want_sample || s == Stage::Sample;
    want_preprocess = want_preprocess || s == Stage::Preprocess;
  }

  std::vector<std::vector<StageReport>> per_day(dates.size());
  if (!day.empty()) {
    std::vector<std::exception_ptr> errors(dates.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
      for (std::size_t i; !failed && (i = next++) < dates.size();) {
        try {
          per_day[i] = run_day(dates[i], day);
        } catch (...) {
          errors[i] = std::current_exception();
          failed = true;
        }
      }
    };
    const std::size_t n = std::min(config_.jobs, dates.size());
    if (n <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<StageReport> reports;
  for (auto& r : per_day) std::move(r.begin(), r.end(), std::back_inserter(reports));
  std::set<std::string> months;
  for (const auto& d : dates) months.insert(month_of(d));
  for (const auto& month : months) {
    if (want_sample) reports.push_back(sample(month));
    if (want_preprocess) reports.push_back(preprocess(month));
  }
  return reports;
}

}  // namespace mawiprep::pipeline
