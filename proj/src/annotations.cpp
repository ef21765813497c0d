// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/annotations.hpp"

#include <expat.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <set>

#include "mawiprep/error.hpp"

namespace mawiprep::annotations {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Filter field parsers return false on malformed input; an empty (or "*")
// value is a wildcard and leaves the field absent.
bool is_wildcard(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "*";
}

bool parse_ip_field(std::string_view s, std::optional<IpAddress>& out) {
  if (is_wildcard(s)) return true;
  out = IpAddress::parse(trim(s));
  return out.has_value();
}

bool parse_port_field(std::string_view s, std::optional<std::uint16_t>& out) {
  if (is_wildcard(s)) return true;
  std::uint32_t v = 0;
  if (!parse_number(s, v) || v > 65535) return false;
  out = static_cast<std::uint16_t>(v);
  return true;
}

bool parse_protocol_field(std::string_view s, std::optional<std::uint8_t>& out) {
  if (is_wildcard(s)) return true;
  const std::string l = lower(trim(s));
  if (l == "tcp") out = 6;
  else if (l == "udp") out = 17;
  else if (l == "icmp") out = 1;
  else if (l == "icmpv6" || l == "ipv6-icmp") out = 58;
  else {
    std::uint32_t v = 0;
    if (!parse_number(l, v) || v > 255) return false;
    out = static_cast<std::uint8_t>(v);
  }
  return true;
}

void normalize_filters(std::vector<AnomalyFilter>& filters) {
  std::sort(filters.begin(), filters.end());
  filters.erase(std::unique(filters.begin(), filters.end()), filters.end());
  std::vector<AnomalyFilter> kept;
  kept.reserve(filters.size());
  for (const auto& f : filters) {
    if (!f.window) {
      const bool shadowed = std::any_of(filters.begin(), filters.end(), [&](const AnomalyFilter& g) {
        return g.window && g.same_expression(f);
      });
      if (shadowed) continue;
    }
    kept.push_back(f);
  }
  filters = std::move(kept);
}

}  // namespace

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::Anomalous: return "anomalous";
    case Label::Suspicious: return "suspicious";
    case Label::Notice: return "notice";
  }
  return "anomalous";
}

std::optional<Label> parse_label(std::string_view text) {
  const std::string l = lower(trim(text));
  if (l == "anomalous") return Label::Anomalous;
  if (l == "suspicious") return Label::Suspicious;
  if (l == "notice") return Label::Notice;
  return std::nullopt;
}

int precedence(Label label) noexcept { return static_cast<int>(label); }

bool AnomalyFilter::same_expression(const AnomalyFilter& o) const noexcept {
  return src_ip == o.src_ip && dst_ip == o.dst_ip && src_port == o.src_port && dst_port == o.dst_port &&
         protocol == o.protocol;
}

std::string AnomalyFilter::to_string() const {
  auto opt = [](const auto& v) -> std::string {
    if (!v) return "*";
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, IpAddress>) {
      return v->to_string();
    } else {
      return std::to_string(static_cast<unsigned>(*v));
    }
  };
  std::string s = "src=" + opt(src_ip) + " sport=" + opt(src_port) + " dst=" + opt(dst_ip) +
                  " dport=" + opt(dst_port) + " proto=" + opt(protocol);
  if (window) s += " [" + std::to_string(window->start_us) + "," + std::to_string(window->stop_us) + "]";
  return s;
}

// ---------------------------------------------------------------------------

const AnomalyRecord* DayAnnotations::find(std::string_view anomaly_id) const {
  const auto it = std::lower_bound(anomalies.begin(), anomalies.end(), anomaly_id,
                                   [](const AnomalyRecord& r, std::string_view id) { return r.anomaly_id < id; });
  if (it != anomalies.end() && it->anomaly_id == anomaly_id) return &*it;
  // Hand-built values may not be sorted.
  for (const auto& r : anomalies) {
    if (r.anomaly_id == anomaly_id) return &r;
  }
  return nullptr;
}

std::size_t DayAnnotations::filter_count() const {
  std::size_t n = 0;
  for (const auto& r : anomalies) n += r.filters.size();
  return n;
}

namespace {

std::vector<AnomalyRecord> view(const std::vector<AnomalyRecord>& anomalies, bool windowed) {
  std::vector<AnomalyRecord> out;
  for (const auto& r : anomalies) {
    AnomalyRecord copy = r;
    copy.filters.clear();
    for (const auto& f : r.filters) {
      if (f.window.has_value() == windowed) copy.filters.push_back(f);
    }
    if (!copy.filters.empty()) out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace

std::vector<AnomalyRecord> DayAnnotations::csv_view() const { return view(anomalies, false); }
std::vector<AnomalyRecord> DayAnnotations::admd_view() const { return view(anomalies, true); }

// --- CSV -------------------------------------------------------------------

CsvColumnMap::CsvColumnMap() {
  for (const auto& n : canonical_names()) names_[n] = n;
}

const std::vector<std::string>& CsvColumnMap::canonical_names() {
  static const std::vector<std::string> names{"anomalyID", "label",  "taxonomy", "heuristic",
                                              "distance",  "nbDetectors", "srcIP", "srcPort",
                                              "dstIP",     "dstPort",     "protocol"};
  return names;
}

void CsvColumnMap::set(const std::string& canonical, std::string actual) {
  if (!names_.count(canonical)) {
    throw Error(ErrorCategory::InvalidArgument, "unknown canonical annotation column '" + canonical + "'");
  }
  names_[canonical] = std::move(actual);
}

const std::string& CsvColumnMap::get(const std::string& canonical) const { return names_.at(canonical); }

CsvColumnMap CsvColumnMap::load(const std::filesystem::path& path) {
  CsvColumnMap map;
  const std::string text = read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCategory::Parse, path.string() + ":" + std::to_string(line_no) + ": expected 'canonical = actual'");
    }
    map.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return map;
}

std::vector<AnomalyRecord> parse_csv_annotations_text(std::string_view text, const CsvColumnMap& columns) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCategory::Format, "annotation CSV has no header row");
  const auto& header = rows.front().fields;
  std::map<std::string, std::optional<std::size_t>> idx;
  for (const auto& canon : CsvColumnMap::canonical_names()) {
    const std::string& actual = columns.get(canon);
    if (actual == "-") {
      idx[canon] = std::nullopt;
      continue;
    }
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](const std::string& h) { return trim(h) == actual; });
    if (it == header.end()) {
      throw Error(ErrorCategory::Format, "annotation CSV header lacks column '" + actual + "'");
    }
    idx[canon] = static_cast<std::size_t>(it - header.begin());
  }
  if (!idx["anomalyID"] || !idx["label"]) {
    throw Error(ErrorCategory::Format, "annotation CSV needs anomalyID and label columns");
  }

  std::vector<AnomalyRecord> out;
  std::map<std::string, std::size_t, std::less<>> by_id;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "annotation CSV line " + std::to_string(row.line);
    if (row.fields.size() != header.size()) {
      throw Error(ErrorCategory::Parse, where + ": expected " + std::to_string(header.size()) + " fields");
    }
    auto cell = [&](const char* canon) -> std::string_view {
      const auto& i = idx[canon];
      return i ? std::string_view(row.fields[*i]) : std::string_view{};
    };

    const std::string id(trim(cell("anomalyID")));
    if (id.empty()) throw Error(ErrorCategory::Parse, where + ": empty anomalyID");
    const auto label = parse_label(cell("label"));
    if (!label) throw Error(ErrorCategory::Parse, where + ": unknown label '" + std::string(cell("label")) + "'");

    AnomalyRecord rec;
    rec.anomaly_id = id;
    rec.label = *label;
    rec.taxonomy = std::string(trim(cell("taxonomy")));
    if (!trim(cell("heuristic")).empty() && !parse_number(cell("heuristic"), rec.heuristic)) {
      throw Error(ErrorCategory::Parse, where + ": malformed heuristic '" + std::string(cell("heuristic")) + "'");
    }
    if (!trim(cell("distance")).empty() && !parse_number(cell("distance"), rec.distance)) {
      throw Error(ErrorCategory::Parse, where + ": malformed distance '" + std::string(cell("distance")) + "'");
    }
    if (!trim(cell("nbDetectors")).empty() && !parse_number(cell("nbDetectors"), rec.nb_detectors)) {
      throw Error(ErrorCategory::Parse, where + ": malformed nbDetectors '" + std::string(cell("nbDetectors")) + "'");
    }

    AnomalyFilter f;
    if (!parse_ip_field(cell("srcIP"), f.src_ip)) throw Error(ErrorCategory::Parse, where + ": malformed srcIP");
    if (!parse_ip_field(cell("dstIP"), f.dst_ip)) throw Error(ErrorCategory::Parse, where + ": malformed dstIP");
    if (!parse_port_field(cell("srcPort"), f.src_port)) throw Error(ErrorCategory::Parse, where + ": malformed srcPort");
    if (!parse_port_field(cell("dstPort"), f.dst_port)) throw Error(ErrorCategory::Parse, where + ": malformed dstPort");
    if (!parse_protocol_field(cell("protocol"), f.protocol)) {
      throw Error(ErrorCategory::Parse, where + ": malformed protocol");
    }
    if (!f.has_tuple_field()) throw Error(ErrorCategory::Validation, where + ": filter matches everything");

    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      rec.filters.push_back(f);
      by_id.emplace(id, out.size());
      out.push_back(std::move(rec));
    } else {
      auto& existing = out[it->second];
      if (existing.label != rec.label) {
        throw Error(ErrorCategory::Parse, where + ": anomaly '" + id + "' relabeled from " +
                                              std::string(to_string(existing.label)) + " to " +
                                              std::string(to_string(rec.label)));
      }
      existing.filters.push_back(f);
    }
  }
  return out;
}

std::vector<AnomalyRecord> parse_csv_annotations(const std::filesystem::path& path, const CsvColumnMap& columns) {
  try {
    return parse_csv_annotations_text(read_file(path), columns);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

// --- ADMD ------------------------------------------------------------------

namespace {

struct Bounds {
  std::optional<std::int64_t> from;
  std::optional<std::int64_t> to;
};

struct PendingGroup {
  Bounds bounds;
  std::vector<AnomalyFilter> filters;
};

struct AdmdState {
  XML_Parser parser = nullptr;
  AdmdParseResult result;
  std::optional<AnomalyRecord> anomaly;
  std::size_t anomaly_line = 0;
  PendingGroup anomaly_group;
  std::vector<PendingGroup> slices;
  bool in_slice = false;
  std::optional<Error> error;

  void fail(ErrorCategory cat, const std::string& msg) {
    if (error) return;
    error.emplace(cat, "ADMD line " + std::to_string(XML_GetCurrentLineNumber(parser)) + ": " + msg);
    XML_StopParser(parser, XML_FALSE);
  }
};

std::map<std::string_view, std::string_view> attributes(const XML_Char** atts) {
  std::map<std::string_view, std::string_view> out;
  for (std::size_t i = 0; atts[i]; i += 2) out[atts[i]] = atts[i + 1];
  return out;
}

std::string_view attr(const std::map<std::string_view, std::string_view>& a, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (const auto it = a.find(k); it != a.end()) return it->second;
  }
  return {};
}

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** atts) {
  auto& s = *static_cast<AdmdState*>(data);
  if (s.error) return;
  const std::string_view el(name);
  const auto a = attributes(atts);
  if (el == "anomaly") {
    if (s.anomaly) return s.fail(ErrorCategory::Parse, "nested anomaly element");
    AnomalyRecord rec;
    rec.anomaly_id = std::string(trim(attr(a, {"id", "anomalyID"})));
    if (rec.anomaly_id.empty()) return s.fail(ErrorCategory::Parse, "anomaly without id");
    const auto label = parse_label(attr(a, {"type", "label"}));
    if (!label) return s.fail(ErrorCategory::Parse, "unknown label '" + std::string(attr(a, {"type", "label"})) + "'");
    rec.label = *label;
    rec.taxonomy = std::string(trim(attr(a, {"taxonomy"})));
    const auto heur = attr(a, {"heuristic"});
    if (!trim(heur).empty() && !parse_number(heur, rec.heuristic)) return s.fail(ErrorCategory::Parse, "malformed heuristic");
    const auto dist = attr(a, {"distance"});
    if (!trim(dist).empty() && !parse_number(dist, rec.distance)) return s.fail(ErrorCategory::Parse, "malformed distance");
    const auto nbd = attr(a, {"nbDetectors"});
    if (!trim(nbd).empty() && !parse_number(nbd, rec.nb_detectors)) return s.fail(ErrorCategory::Parse, "malformed nbDetectors");
    s.anomaly = std::move(rec);
    s.anomaly_line = XML_GetCurrentLineNumber(s.parser);
    s.anomaly_group = {};
    s.slices.clear();
    return;
  }
  if (!s.anomaly) return;
  PendingGroup& group = s.in_slice ? s.slices.back() : s.anomaly_group;
  if (el == "slice") {
    if (s.in_slice) return s.fail(ErrorCategory::Parse, "nested slice element");
    s.slices.emplace_back();
    s.in_slice = true;
  } else if (el == "from" || el == "to") {
    std::int64_t sec = 0;
    std::int64_t usec = 0;
    if (!parse_number(attr(a, {"sec"}), sec)) return s.fail(ErrorCategory::Parse, "time bound without valid sec");
    const auto u = attr(a, {"usec"});
    if (!trim(u).empty() && (!parse_number(u, usec) || usec < 0 || usec >= 1'000'000)) {
      return s.fail(ErrorCategory::Parse, "malformed usec");
    }
    (el == "from" ? group.bounds.from : group.bounds.to) = sec * 1'000'000 + usec;
  } else if (el == "filter") {
    AnomalyFilter f;
    if (!parse_ip_field(attr(a, {"src_ip", "srcIP"}), f.src_ip)) return s.fail(ErrorCategory::Parse, "malformed src_ip");
    if (!parse_ip_field(attr(a, {"dst_ip", "dstIP"}), f.dst_ip)) return s.fail(ErrorCategory::Parse, "malformed dst_ip");
    if (!parse_port_field(attr(a, {"src_port", "srcPort"}), f.src_port)) return s.fail(ErrorCategory::Parse, "malformed src_port");
    if (!parse_port_field(attr(a, {"dst_port", "dstPort"}), f.dst_port)) return s.fail(ErrorCategory::Parse, "malformed dst_port");
    if (!parse_protocol_field(attr(a, {"proto", "protocol"}), f.protocol)) return s.fail(ErrorCategory::Parse, "malformed proto");
    if (!f.has_tuple_field()) return s.fail(ErrorCategory::Validation, "filter matches everything");
    group.filters.push_back(f);
  }
}

void XMLCALL on_end(void* data, const XML_Char* name) {
  auto& s = *static_cast<AdmdState*>(data);
  if (s.error || !s.anomaly) return;
  const std::string_view el(name);
  if (el == "slice") {
    s.in_slice = false;
    return;
  }
  if (el != "anomaly") return;

  auto window_of = [&](const Bounds& b) -> std::optional<TimeWindow> {
    if (!b.from || !b.to) return std::nullopt;
    return TimeWindow{*b.from, *b.to};
  };
  auto check = [&](const Bounds& b) {
    if (b.from && b.to && *b.from > *b.to) {
      s.fail(ErrorCategory::Validation, "anomaly '" + s.anomaly->anomaly_id + "' (line " +
                                            std::to_string(s.anomaly_line) + ") has from > to");
    }
  };
  check(s.anomaly_group.bounds);
  for (const auto& sl : s.slices) check(sl.bounds);
  if (s.error) return;

  const auto outer = window_of(s.anomaly_group.bounds);
  auto emit = [&](const PendingGroup& g, std::optional<TimeWindow> w) {
    if (g.filters.empty()) return;
    if (!w) ++s.result.missing_window_warnings;
    for (auto f : g.filters) {
      f.window = w;
      s.anomaly->filters.push_back(f);
    }
  };
  emit(s.anomaly_group, outer);
  for (const auto& sl : s.slices) {
    const auto inner = window_of(sl.bounds);
    emit(sl, inner ? inner : outer);
  }
  if (s.anomaly->filters.empty()) {
    s.fail(ErrorCategory::Validation, "anomaly '" + s.anomaly->anomaly_id + "' has no filters");
    return;
  }
  s.result.anomalies.push_back(std::move(*s.anomaly));
  s.anomaly.reset();
}

}  // namespace

AdmdParseResult parse_admd_text(std::string_view text) {
  AdmdState state;
  state.parser = XML_ParserCreate(nullptr);
  if (!state.parser) throw Error(ErrorCategory::Internal, "cannot create XML parser");
  XML_SetUserData(state.parser, &state);
  XML_SetElementHandler(state.parser, on_start, on_end);
  const auto status = XML_Parse(state.parser, text.data(), static_cast<int>(text.size()), XML_TRUE);
  if (status == XML_STATUS_ERROR && !state.error) {
    const std::string msg = "ADMD line " + std::to_string(XML_GetCurrentLineNumber(state.parser)) +
                            ": XML syntax error: " + XML_ErrorString(XML_GetErrorCode(state.parser));
    XML_ParserFree(state.parser);
    throw Error(ErrorCategory::Parse, msg);
  }
  XML_ParserFree(state.parser);
  if (state.error) throw *state.error;

  // Duplicate ids across anomaly elements would make merging ambiguous.
  std::set<std::string> seen;
  for (const auto& r : state.result.anomalies) {
    if (!seen.insert(r.anomaly_id).second) {
      throw Error(ErrorCategory::Validation, "ADMD: duplicate anomaly id '" + r.anomaly_id + "'");
    }
  }
  return std::move(state.result);
}

AdmdParseResult parse_admd(const std::filesystem::path& path) {
  try {
    return parse_admd_text(read_file(path));
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

// --- merge -----------------------------------------------------------------

DayAnnotations merge_annotations(std::vector<AnomalyRecord> csv, std::vector<AnomalyRecord> admd, std::string date) {
  std::map<std::string, AnomalyRecord> merged;
  std::set<std::string> from_csv;
  auto absorb = [&](AnomalyRecord rec, bool is_csv) {
    auto [it, inserted] = merged.try_emplace(rec.anomaly_id, rec);
    if (inserted) {
      if (is_csv) from_csv.insert(rec.anomaly_id);
      return;
    }
    AnomalyRecord& cur = it->second;
    if (cur.label != rec.label) {
      throw Error(ErrorCategory::Conflict, "anomaly '" + rec.anomaly_id + "' labeled both " +
                                               std::string(to_string(cur.label)) + " and " +
                                               std::string(to_string(rec.label)));
    }
    // Metadata from the CSV listing wins; the first CSV row group sets it.
    if (is_csv && !from_csv.count(rec.anomaly_id)) {
      cur.taxonomy = rec.taxonomy;
      cur.heuristic = rec.heuristic;
      cur.distance = rec.distance;
      cur.nb_detectors = rec.nb_detectors;
      from_csv.insert(rec.anomaly_id);
    }
    cur.filters.insert(cur.filters.end(), rec.filters.begin(), rec.filters.end());
  };
  for (auto& r : admd) absorb(std::move(r), false);
  for (auto& r : csv) absorb(std::move(r), true);

  DayAnnotations day;
  day.date = std::move(date);
  day.anomalies.reserve(merged.size());
  for (auto& [id, rec] : merged) {
    normalize_filters(rec.filters);
    day.anomalies.push_back(std::move(rec));
  }
  return day;
}

// --- table form --------------------------------------------------------------

const TypeHints& table_hints() {
  static const TypeHints hints{
      {"anomaly_id", ColumnType::String}, {"label", ColumnType::String},
      {"taxonomy", ColumnType::String},   {"heuristic", ColumnType::Int64},
      {"distance", ColumnType::Double},   {"nb_detectors", ColumnType::Int64},
      {"src_ip", ColumnType::String},     {"src_port", ColumnType::Int64},
      {"dst_ip", ColumnType::String},     {"dst_port", ColumnType::Int64},
      {"protocol", ColumnType::Int64},    {"window_start_us", ColumnType::Int64},
      {"window_stop_us", ColumnType::Int64},
  };
  return hints;
}

Table to_table(const DayAnnotations& day) {
  std::vector<Column> cols{
      {"anomaly_id", ColumnType::String}, {"label", ColumnType::String},
      {"taxonomy", ColumnType::String},   {"heuristic", ColumnType::Int64},
      {"distance", ColumnType::Double},   {"nb_detectors", ColumnType::Int64},
      {"src_ip", ColumnType::String},     {"src_port", ColumnType::Int64},
      {"dst_ip", ColumnType::String},     {"dst_port", ColumnType::Int64},
      {"protocol", ColumnType::Int64},    {"window_start_us", ColumnType::Int64},
      {"window_stop_us", ColumnType::Int64},
  };
  for (const auto& r : day.anomalies) {
    for (const auto& f : r.filters) {
      cols[0].push_string(r.anomaly_id);
      cols[1].push_string(std::string(to_string(r.label)));
      if (r.taxonomy.empty()) cols[2].push_null(); else cols[2].push_string(r.taxonomy);
      cols[3].push_int(r.heuristic);
      cols[4].push_double(r.distance);
      cols[5].push_int(r.nb_detectors);
      if (f.src_ip) cols[6].push_string(f.src_ip->to_string()); else cols[6].push_null();
      if (f.src_port) cols[7].push_int(*f.src_port); else cols[7].push_null();
      if (f.dst_ip) cols[8].push_string(f.dst_ip->to_string()); else cols[8].push_null();
      if (f.dst_port) cols[9].push_int(*f.dst_port); else cols[9].push_null();
      if (f.protocol) cols[10].push_int(*f.protocol); else cols[10].push_null();
      if (f.window) {
        cols[11].push_int(f.window->start_us);
        cols[12].push_int(f.window->stop_us);
      } else {
        cols[11].push_null();
        cols[12].push_null();
      }
    }
  }
  return Table(std::move(cols));
}

DayAnnotations from_table(const Table& table, std::string date) {
  const auto& id = table.column("anomaly_id");
  const auto& label = table.column("label");
  const auto& tax = table.column("taxonomy");
  const auto& heur = table.column("heuristic");
  const auto& dist = table.column("distance");
  const auto& nbd = table.column("nb_detectors");
  const auto& sip = table.column("src_ip");
  const auto& sport = table.column("src_port");
  const auto& dip = table.column("dst_ip");
  const auto& dport = table.column("dst_port");
  const auto& proto = table.column("protocol");
  const auto& ws = table.column("window_start_us");
  const auto& we = table.column("window_stop_us");

  std::map<std::string, AnomalyRecord> by_id;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const std::string where = "annotation table row " + std::to_string(r);
    auto& rec = by_id[id.string_at(r)];
    const auto l = parse_label(label.string_at(r));
    if (!l) throw Error(ErrorCategory::Parse, where + ": unknown label");
    rec.anomaly_id = id.string_at(r);
    rec.label = *l;
    rec.taxonomy = tax.is_null(r) ? std::string() : tax.string_at(r);
    rec.heuristic = heur.is_null(r) ? 0 : heur.int_at(r);
    rec.distance = dist.is_null(r) ? 0.0 : dist.number_at(r);
    rec.nb_detectors = nbd.is_null(r) ? 0 : static_cast<std::uint32_t>(nbd.int_at(r));
    AnomalyFilter f;
    if (!sip.is_null(r)) f.src_ip = IpAddress::parse(sip.string_at(r));
    if (!dip.is_null(r)) f.dst_ip = IpAddress::parse(dip.string_at(r));
    if (!sport.is_null(r)) f.src_port = static_cast<std::uint16_t>(sport.int_at(r));
    if (!dport.is_null(r)) f.dst_port = static_cast<std::uint16_t>(dport.int_at(r));
    if (!proto.is_null(r)) f.protocol = static_cast<std::uint8_t>(proto.int_at(r));
    if (!ws.is_null(r) && !we.is_null(r)) f.window = TimeWindow{ws.int_at(r), we.int_at(r)};
    if ((!sip.is_null(r) && !f.src_ip) || (!dip.is_null(r) && !f.dst_ip)) {
      throw Error(ErrorCategory::Parse, where + ": malformed address");
    }
    rec.filters.push_back(f);
  }
  DayAnnotations day;
  day.date = std::move(date);
  for (auto& [k, rec] : by_id) {
    normalize_filters(rec.filters);
    day.anomalies.push_back(std::move(rec));
  }
  return day;
}

}  // namespace mawiprep::annotations
