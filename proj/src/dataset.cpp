// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mawiprep/error.hpp"
#include "mawiprep/flowmeter.hpp"
#include "mawiprep/hashing.hpp"

namespace mawiprep::dataset {

namespace {

bool is_side_column(std::string_view name) {
  return name == kPartitionColumn ||
         std::find(kSideColumns.begin(), kSideColumns.end(), name) != kSideColumns.end();
}

bool is_excluded(std::string_view name) {
  return std::find(kExcludedColumns.begin(), kExcludedColumns.end(), name) != kExcludedColumns.end();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCategory::Parse, "invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

const std::string& require(const std::vector<std::pair<std::string, std::string>>& entries, std::string_view key) {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  throw Error(ErrorCategory::Parse, "sidecar is missing '" + std::string(key) + "'");
}

void expect_format(const std::vector<std::pair<std::string, std::string>>& entries, std::string_view format) {
  if (require(entries, "format") != format) {
    throw Error(ErrorCategory::Format, "expected a " + std::string(format) + " sidecar");
  }
}

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

Column scaled_copy(const Column& src, const FeatureRange& r, bool inverse) {
  if (src.type() == ColumnType::String) {
    throw Error(ErrorCategory::Schema, "feature '" + r.name + "' is not numeric");
  }
  Column out(src.name(), ColumnType::Double);
  out.reserve(src.size());
  const double span = r.max - r.min;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src.is_null(i)) {
      out.push_null();
      continue;
    }
    const double x = src.number_at(i);
    if (inverse) out.push_double(span > 0 ? x * span + r.min : r.min);
    else out.push_double(span > 0 ? (x - r.min) / span : 0.0);
  }
  return out;
}

Table transform_features(const Table& table, const ScalerParams& params, bool inverse) {
  for (const auto& name : scalable_columns(table)) {
    if (!params.find(name)) throw Error(ErrorCategory::Schema, "scaler has no parameters for column '" + name + "'");
  }
  std::vector<Column> cols = table.columns();
  for (const auto& r : params.features) {
    const auto idx = table.index_of(r.name);
    if (!idx) throw Error(ErrorCategory::Schema, "table has no feature column '" + r.name + "'");
    cols[*idx] = scaled_copy(cols[*idx], r, inverse);
  }
  return Table(std::move(cols));
}

}  // namespace

// --- schema --------------------------------------------------------------------

const TypeHints& labeled_table_hints() {
  static const TypeHints hints = [] {
    TypeHints h = flowmeter::flow_table_hints();
    h.emplace("anomaly_id", ColumnType::String);
    h.emplace("taxonomy", ColumnType::String);
    h.emplace("heuristic", ColumnType::Int64);
    h.emplace("distance", ColumnType::Double);
    h.emplace("nb_detectors", ColumnType::Int64);
    h.emplace(std::string(kPartitionColumn), ColumnType::String);
    return h;
  }();
  return hints;
}

const std::vector<std::string>& labeled_schema() {
  static const std::vector<std::string> schema = [] {
    std::vector<std::string> s = flowmeter::emit_schema();
    for (const auto c : kSideColumns) s.emplace_back(c);
    s.emplace_back(kPartitionColumn);
    return s;
  }();
  return schema;
}

Table empty_labeled_table() {
  std::vector<Column> cols;
  for (const auto& name : labeled_schema()) cols.emplace_back(name, labeled_table_hints().at(name));
  return Table(std::move(cols));
}

// --- rng -------------------------------------------------------------------------

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCategory::InvalidArgument, "Rng::below needs a positive bound");
  // Reject the incomplete top block so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

// --- labels and aggregation ------------------------------------------------------

Table propagate_labels(const Table& flows, const splitter::PartitionId& partition,
                       const annotations::DayAnnotations& day) {
  const annotations::AnomalyRecord* anomaly = nullptr;
  if (!partition.is_benign()) {
    anomaly = day.find(partition.anomaly_id());
    if (!anomaly) {
      throw Error(ErrorCategory::Consistency,
                  "partition " + partition.key() + " names an anomaly missing from the annotations of " + day.date);
    }
  }
  const auto label_idx = flows.index_of(flowmeter::kLabelColumn);
  if (!label_idx) throw Error(ErrorCategory::Schema, "flow table has no Label column");

  const std::size_t n = flows.rows();
  std::vector<Column> cols = flows.columns();
  Column label(std::string(flowmeter::kLabelColumn), ColumnType::String);
  Column id("anomaly_id", ColumnType::String);
  Column taxonomy("taxonomy", ColumnType::String);
  Column heuristic("heuristic", ColumnType::Int64);
  Column distance("distance", ColumnType::Double);
  Column detectors("nb_detectors", ColumnType::Int64);
  Column source(std::string(kPartitionColumn), ColumnType::String);
  const std::string label_text(anomaly ? annotations::to_string(anomaly->label) : kBenignLabel);
  const std::string key = partition.key();
  for (std::size_t i = 0; i < n; ++i) {
    label.push_string(label_text);
    source.push_string(key);
    if (anomaly) {
      id.push_string(anomaly->anomaly_id);
      taxonomy.push_string(anomaly->taxonomy);
      heuristic.push_int(anomaly->heuristic);
      distance.push_double(anomaly->distance);
      detectors.push_int(anomaly->nb_detectors);
    } else {
      id.push_null();
      taxonomy.push_null();
      heuristic.push_null();
      distance.push_null();
      detectors.push_null();
    }
  }
  cols[*label_idx] = std::move(label);
  for (Column* c : {&id, &taxonomy, &heuristic, &distance, &detectors, &source}) cols.push_back(std::move(*c));
  return Table(std::move(cols));
}

void sort_flows(Table& table) {
  const Column* ts = table.find("Timestamp");
  const Column* fid = table.find("Flow ID");
  if (!ts || !fid) throw Error(ErrorCategory::Schema, "flow table needs Timestamp and Flow ID columns");
  const Column* part = table.find(kPartitionColumn);
  std::vector<std::size_t> order = identity(table.rows());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (int c = ts->string_at(a).compare(ts->string_at(b)); c != 0) return c < 0;
    if (int c = fid->string_at(a).compare(fid->string_at(b)); c != 0) return c < 0;
    return part && part->string_at(a) < part->string_at(b);
  });
  if (!std::is_sorted(order.begin(), order.end())) table = table.take(order);
}

Table aggregate_day(std::span<const Table> tables) {
  if (tables.empty()) return empty_labeled_table();
  Table out = tables.front();
  for (std::size_t i = 1; i < tables.size(); ++i) {
    if (!out.same_schema(tables[i])) {
      throw Error(ErrorCategory::Schema, "table " + std::to_string(i) + " does not share the day schema");
    }
    out.append_rows(tables[i]);
  }
  sort_flows(out);
  return out;
}

// --- sampling ----------------------------------------------------------------------

namespace {

std::vector<std::size_t> choose(std::size_t total, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx = identity(total);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(total - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

Table sample_period(std::span<const Table> days, std::size_t target_rows, std::uint64_t seed,
                    const SampleOptions& options) {
  std::size_t total = 0;
  for (const auto& d : days) total += d.rows();
  if (target_rows > total) {
    throw Error(ErrorCategory::InvalidArgument, "target_rows " + std::to_string(target_rows) +
                                                    " exceeds the " + std::to_string(total) + " rows available");
  }
  if (days.empty()) return empty_labeled_table();

  Table all = days.front();
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (!all.same_schema(days[i])) throw Error(ErrorCategory::Schema, "day tables do not share a schema");
    all.append_rows(days[i]);
  }

  Rng rng(seed);
  std::vector<std::size_t> picked;
  if (!options.stratify_by_day || total == 0) {
    picked = choose(total, target_rows, rng);
  } else {
    // Largest-remainder allocation of the target across days.
    std::vector<std::size_t> quota(days.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t d = 0; d < days.size(); ++d) {
      const double exact = static_cast<double>(target_rows) * static_cast<double>(days[d].rows()) /
                           static_cast<double>(total);
      quota[d] = std::min(days[d].rows(), static_cast<std::size_t>(std::floor(exact)));
      assigned += quota[d];
      remainders.emplace_back(exact - static_cast<double>(quota[d]), d);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < target_rows; i = (i + 1) % remainders.size()) {
      const std::size_t d = remainders[i].second;
      if (quota[d] < days[d].rows()) {
        ++quota[d];
        ++assigned;
      }
    }
    std::size_t offset = 0;
    for (std::size_t d = 0; d < days.size(); ++d) {
      for (const std::size_t i : choose(days[d].rows(), quota[d], rng)) picked.push_back(offset + i);
      offset += days[d].rows();
    }
  }
  Table out = all.take(picked);
  sort_flows(out);
  return out;
}

// --- sidecars ----------------------------------------------------------------------

std::string seal_sidecar(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string body;
  for (const auto& [k, v] : entries) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw Error(ErrorCategory::InvalidArgument, "sidecar entry '" + k + "' cannot be encoded");
    }
    body += k;
    body += '=';
    body += v;
    body += '\n';
  }
  return body + "sha256=" + sha256_hex(body) + "\n";
}

std::vector<std::pair<std::string, std::string>> open_sidecar(std::string_view text) {
  const std::size_t pos = text.rfind("sha256=");
  if (pos == std::string_view::npos || (pos != 0 && text[pos - 1] != '\n')) {
    throw Error(ErrorCategory::Format, "sidecar has no checksum line");
  }
  const std::string_view body = text.substr(0, pos);
  std::string_view digest = text.substr(pos + 7);
  while (!digest.empty() && (digest.back() == '\n' || digest.back() == '\r')) digest.remove_suffix(1);
  if (sha256_hex(body) != digest) throw Error(ErrorCategory::Consistency, "sidecar checksum mismatch");

  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t start = 0;
  while (start < body.size()) {
    const std::size_t end = body.find('\n', start);
    const std::string_view line = body.substr(start, end - start);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCategory::Parse, "sidecar line without '='");
    entries.emplace_back(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    start = end + 1;
  }
  return entries;
}

// --- scaling -----------------------------------------------------------------------

const FeatureRange* ScalerParams::find(std::string_view name) const {
  for (const auto& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string ScalerParams::to_text() const {
  std::vector<std::pair<std::string, std::string>> e{{"format", "mawiprep-scaler/1"},
                                                     {"dataset_hash", dataset_hash},
                                                     {"seed", std::to_string(seed)},
                                                     {"features", std::to_string(features.size())}};
  for (const auto& f : features) e.emplace_back("feature", format_double(f.min) + "\t" + format_double(f.max) + "\t" + f.name);
  return seal_sidecar(e);
}

ScalerParams ScalerParams::from_text(std::string_view text) {
  const auto e = open_sidecar(text);
  expect_format(e, "mawiprep-scaler/1");
  ScalerParams p;
  p.dataset_hash = require(e, "dataset_hash");
  p.seed = parse_number<std::uint64_t>(require(e, "seed"), "seed");
  for (const auto& [k, v] : e) {
    if (k != "feature") continue;
    const std::size_t t1 = v.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? t1 : v.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(ErrorCategory::Parse, "malformed scaler feature '" + v + "'");
    FeatureRange r;
    r.min = parse_number<double>(std::string_view(v).substr(0, t1), "minimum");
    r.max = parse_number<double>(std::string_view(v).substr(t1 + 1, t2 - t1 - 1), "maximum");
    r.name = v.substr(t2 + 1);
    if (r.min > r.max) throw Error(ErrorCategory::Validation, "scaler feature '" + r.name + "' has min > max");
    p.features.push_back(std::move(r));
  }
  if (std::to_string(p.features.size()) != require(e, "features")) {
    throw Error(ErrorCategory::Consistency, "scaler feature count does not match its header");
  }
  return p;
}

std::vector<std::string> scalable_columns(const Table& table) {
  std::vector<std::string> out;
  for (const auto& c : table.columns()) {
    if (c.type() == ColumnType::String || is_excluded(c.name()) || is_side_column(c.name()) ||
        c.name().starts_with(kIndicatorPrefix)) {
      continue;
    }
    out.push_back(c.name());
  }
  return out;
}

ScalerParams fit_scaler(const Table& train, std::string dataset_hash, std::uint64_t seed) {
  ScalerParams p;
  p.dataset_hash = std::move(dataset_hash);
  p.seed = seed;
  for (const auto& name : scalable_columns(train)) {
    const Column& c = train.column(name);
    FeatureRange r{name, 0.0, 0.0};
    bool any = false;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.is_null(i)) continue;
      const double x = c.number_at(i);
      if (!std::isfinite(x)) continue;
      r.min = any ? std::min(r.min, x) : x;
      r.max = any ? std::max(r.max, x) : x;
      any = true;
    }
    p.features.push_back(std::move(r));
  }
  return p;
}

Table apply_scaler(const Table& table, const ScalerParams& params) { return transform_features(table, params, false); }

Table invert_scaler(const Table& table, const ScalerParams& params) { return transform_features(table, params, true); }

// --- encoding ----------------------------------------------------------------------

OneHotEncoder OneHotEncoder::fit(const Table& train) {
  const Column* c = train.find(kProtocolColumn);
  if (!c) throw Error(ErrorCategory::Schema, "table has no Protocol column");
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < c->size(); ++i) {
    if (!c->is_null(i)) seen.insert(static_cast<std::int64_t>(c->number_at(i)));
  }
  return {std::vector<std::int64_t>(seen.begin(), seen.end())};
}

Table OneHotEncoder::apply(const Table& table, std::size_t* unseen_rows) const {
  const auto idx = table.index_of(kProtocolColumn);
  if (!idx) throw Error(ErrorCategory::Schema, "table has no Protocol column");
  const Column& proto = table.columns()[*idx];
  std::vector<Column> indicators;
  for (const auto v : categories) indicators.emplace_back(std::string(kIndicatorPrefix) + std::to_string(v), ColumnType::Int64);
  std::size_t unseen = 0;
  for (std::size_t i = 0; i < proto.size(); ++i) {
    std::ptrdiff_t hit = -1;
    if (!proto.is_null(i)) {
      const auto v = static_cast<std::int64_t>(proto.number_at(i));
      const auto it = std::lower_bound(categories.begin(), categories.end(), v);
      if (it != categories.end() && *it == v) hit = it - categories.begin();
    }
    if (hit < 0) ++unseen;
    for (std::size_t k = 0; k < indicators.size(); ++k) indicators[k].push_int(static_cast<std::ptrdiff_t>(k) == hit ? 1 : 0);
  }
  if (unseen_rows) *unseen_rows = unseen;
  std::vector<Column> cols;
  for (std::size_t i = 0; i < table.cols(); ++i) {
    if (i == *idx) {
      for (auto& ind : indicators) cols.push_back(std::move(ind));
    } else {
      cols.push_back(table.columns()[i]);
    }
  }
  if (cols.empty()) return Table();
  return Table(std::move(cols));
}

Table binarize_label(const Table& table) {
  const auto idx = table.index_of(flowmeter::kLabelColumn);
  if (!idx) throw Error(ErrorCategory::Schema, "table has no Label column");
  const Column& src = table.columns()[*idx];
  if (src.type() != ColumnType::String) throw Error(ErrorCategory::Schema, "Label column is not textual");
  Column out(src.name(), ColumnType::Int64);
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src.is_null(i)) out.push_null();
    else out.push_int(src.string_at(i) == kBenignLabel ? 0 : 1);
  }
  std::vector<Column> cols = table.columns();
  cols[*idx] = std::move(out);
  return Table(std::move(cols));
}

DropResult drop_missing(const Table& table) {
  std::vector<std::size_t> keep;
  keep.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    bool ok = true;
    for (const auto& c : table.columns()) {
      if (c.is_null(r) || (c.type() == ColumnType::Double && !std::isfinite(c.reals()[r]))) {
        ok = false;
        break;
      }
    }
    if (ok) keep.push_back(r);
  }
  const std::size_t dropped = table.rows() - keep.size();
  return {dropped ? table.take(keep) : table, dropped};
}

// --- splitting ---------------------------------------------------------------------

std::string_view to_string(SplitRole role) noexcept {
  switch (role) {
    case SplitRole::Train: return "train";
    case SplitRole::Validation: return "validation";
    case SplitRole::Test: return "test";
  }
  return "train";
}

std::size_t SplitManifest::count(SplitRole role) const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), role));
}

std::vector<std::size_t> SplitManifest::rows(SplitRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == role) out.push_back(i);
  }
  return out;
}

std::string SplitManifest::to_text() const {
  std::string codes;
  codes.reserve(assignment.size());
  for (const auto r : assignment) codes += static_cast<char>('0' + static_cast<int>(r));
  return seal_sidecar({{"format", "mawiprep-split/1"},
                       {"seed", std::to_string(seed)},
                       {"with_validation", with_validation ? "1" : "0"},
                       {"test_fraction", format_double(kTestFraction)},
                       {"validation_fraction", with_validation ? format_double(kValidationFraction) : "0"},
                       {"rows", std::to_string(assignment.size())},
                       {"train", std::to_string(count(SplitRole::Train))},
                       {"validation", std::to_string(count(SplitRole::Validation))},
                       {"test", std::to_string(count(SplitRole::Test))},
                       {"codes", "0=train 1=validation 2=test"},
                       {"assignment", codes}});
}

SplitManifest SplitManifest::from_text(std::string_view text) {
  const auto e = open_sidecar(text);
  expect_format(e, "mawiprep-split/1");
  SplitManifest m;
  m.seed = parse_number<std::uint64_t>(require(e, "seed"), "seed");
  m.with_validation = require(e, "with_validation") == "1";
  for (const char c : require(e, "assignment")) {
    if (c < '0' || c > '2') throw Error(ErrorCategory::Parse, "invalid split assignment code");
    m.assignment.push_back(static_cast<SplitRole>(c - '0'));
  }
  if (std::to_string(m.assignment.size()) != require(e, "rows") ||
      std::to_string(m.count(SplitRole::Train)) != require(e, "train") ||
      std::to_string(m.count(SplitRole::Validation)) != require(e, "validation") ||
      std::to_string(m.count(SplitRole::Test)) != require(e, "test")) {
    throw Error(ErrorCategory::Consistency, "split manifest counts do not match its assignment");
  }
  return m;
}

SplitManifest split_dataset(std::size_t rows, std::uint64_t seed, bool with_validation) {
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(rows) * kTestFraction));
  const auto n_val = with_validation
                         ? static_cast<std::size_t>(std::llround(static_cast<double>(rows - n_test) * kValidationFraction))
                         : std::size_t{0};
  std::vector<std::size_t> order = identity(rows);
  Rng rng(seed);
  rng.shuffle(order);
  SplitManifest m;
  m.seed = seed;
  m.with_validation = with_validation;
  m.assignment.assign(rows, SplitRole::Train);
  for (std::size_t i = 0; i < n_test; ++i) m.assignment[order[i]] = SplitRole::Test;
  for (std::size_t i = n_test; i < n_test + n_val; ++i) m.assignment[order[i]] = SplitRole::Validation;
  return m;
}

// --- pipeline ----------------------------------------------------------------------

PreprocessResult preprocess(const Table& sampled, const PreprocessOptions& options) {
  Table t = sampled;
  for (const auto c : kSideColumns) t.drop_column(c);
  t.drop_column(kPartitionColumn);

  PreprocessResult res;
  auto cleaned = drop_missing(t);
  res.dropped_missing = cleaned.dropped;
  t = binarize_label(cleaned.table);
  res.manifest = split_dataset(t.rows(), options.seed, options.with_validation);

  Table train = t.take(res.manifest.rows(SplitRole::Train));
  Table validation = t.take(res.manifest.rows(SplitRole::Validation));
  Table test = t.take(res.manifest.rows(SplitRole::Test));

  res.encoder = OneHotEncoder::fit(train);
  std::size_t unseen = 0;
  train = res.encoder.apply(train, &unseen);
  res.unseen_protocol_rows += unseen;
  validation = res.encoder.apply(validation, &unseen);
  res.unseen_protocol_rows += unseen;
  test = res.encoder.apply(test, &unseen);
  res.unseen_protocol_rows += unseen;

  res.scaler = fit_scaler(train, sha256_hex(to_csv(sampled)), options.seed);
  res.train = apply_scaler(train, res.scaler);
  res.validation = apply_scaler(validation, res.scaler);
  res.test = apply_scaler(test, res.scaler);
  return res;
}

}  // namespace mawiprep::dataset
