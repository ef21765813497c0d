// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/table.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mawiprep/error.hpp"

namespace mawiprep {
namespace {

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::string_view column_type_name(ColumnType type) noexcept {
  switch (type) {
    case ColumnType::Int64: return "int64";
    case ColumnType::Double: return "double";
    case ColumnType::String: return "string";
  }
  return "?";
}

void Column::reserve(std::size_t n) {
  valid_.reserve(n);
  switch (type_) {
    case ColumnType::Int64: ints_.reserve(n); break;
    case ColumnType::Double: reals_.reserve(n); break;
    case ColumnType::String: strings_.reserve(n); break;
  }
}

void Column::push_int(std::int64_t v) {
  if (type_ == ColumnType::Double) {
    push_double(static_cast<double>(v));
    return;
  }
  if (type_ != ColumnType::Int64) throw Error(ErrorCategory::Schema, "column '" + name_ + "' is not integer");
  ints_.push_back(v);
  valid_.push_back(1);
}

void Column::push_double(double v) {
  if (type_ != ColumnType::Double) throw Error(ErrorCategory::Schema, "column '" + name_ + "' is not real");
  reals_.push_back(v);
  valid_.push_back(1);
}

void Column::push_string(std::string v) {
  if (type_ != ColumnType::String) throw Error(ErrorCategory::Schema, "column '" + name_ + "' is not text");
  strings_.push_back(std::move(v));
  valid_.push_back(1);
}

void Column::push_null() {
  switch (type_) {
    case ColumnType::Int64: ints_.push_back(0); break;
    case ColumnType::Double: reals_.push_back(0.0); break;
    case ColumnType::String: strings_.emplace_back(); break;
  }
  valid_.push_back(0);
}

bool Column::push_text(std::string_view text) {
  if (text.empty()) {
    push_null();
    return true;
  }
  switch (type_) {
    case ColumnType::Int64: {
      std::int64_t v = 0;
      if (!parse_int(text, v)) return false;
      push_int(v);
      return true;
    }
    case ColumnType::Double: {
      double v = 0;
      if (!parse_double(text, v)) return false;
      push_double(v);
      return true;
    }
    case ColumnType::String: push_string(std::string(text)); return true;
  }
  return false;
}

double Column::number_at(std::size_t row) const {
  switch (type_) {
    case ColumnType::Int64: return static_cast<double>(ints_[row]);
    case ColumnType::Double: return reals_[row];
    case ColumnType::String: break;
  }
  throw Error(ErrorCategory::Schema, "column '" + name_ + "' is not numeric");
}

void Column::set_double(std::size_t row, double v) {
  if (type_ != ColumnType::Double) throw Error(ErrorCategory::Schema, "column '" + name_ + "' is not real");
  reals_[row] = v;
  valid_[row] = 1;
}

std::string Column::render(std::size_t row) const {
  if (is_null(row)) return {};
  switch (type_) {
    case ColumnType::Int64: return std::to_string(ints_[row]);
    case ColumnType::Double: {
      const double v = reals_[row];
      if (std::isnan(v)) return "nan";
      if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
      char buf[64];
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      return std::string(buf, ptr);
    }
    case ColumnType::String: return strings_[row];
  }
  return {};
}

void Column::append_from(const Column& other, std::size_t row) {
  if (other.is_null(row)) {
    push_null();
    return;
  }
  switch (other.type_) {
    case ColumnType::Int64: push_int(other.ints_[row]); break;
    case ColumnType::Double: push_double(other.reals_[row]); break;
    case ColumnType::String: push_string(other.strings_[row]); break;
  }
}

Column Column::take(std::span<const std::size_t> rows) const {
  Column out(name_, type_);
  out.reserve(rows.size());
  for (const std::size_t r : rows) out.append_from(*this, r);
  return out;
}

// ---------------------------------------------------------------------------

Table::Table(std::vector<Column> columns) : columns_(std::move(columns)) {
  for (const auto& c : columns_) {
    if (c.size() != rows()) throw Error(ErrorCategory::Schema, "column '" + c.name() + "' has a different length");
  }
}

Column& Table::add_column(std::string name, ColumnType type) {
  Column c(std::move(name), type);
  for (std::size_t i = 0; i < rows(); ++i) c.push_null();
  add_column(std::move(c));
  return columns_.back();
}

void Table::add_column(Column column) {
  if (index_of(column.name())) throw Error(ErrorCategory::Schema, "duplicate column '" + column.name() + "'");
  if (!columns_.empty() && column.size() != rows()) {
    throw Error(ErrorCategory::Schema, "column '" + column.name() + "' has a different length");
  }
  columns_.push_back(std::move(column));
}

void Table::drop_column(std::string_view name) {
  std::erase_if(columns_, [&](const Column& c) { return c.name() == name; });
}

std::optional<std::size_t> Table::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name() == name) return i;
  }
  return std::nullopt;
}

const Column* Table::find(std::string_view name) const {
  const auto i = index_of(name);
  return i ? &columns_[*i] : nullptr;
}

Column* Table::find(std::string_view name) {
  const auto i = index_of(name);
  return i ? &columns_[*i] : nullptr;
}

const Column& Table::column(std::string_view name) const {
  const Column* c = find(name);
  if (!c) throw Error(ErrorCategory::Schema, "missing column '" + std::string(name) + "'");
  return *c;
}

Column& Table::column(std::string_view name) {
  Column* c = find(name);
  if (!c) throw Error(ErrorCategory::Schema, "missing column '" + std::string(name) + "'");
  return *c;
}

std::vector<std::string> Table::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name());
  return names;
}

bool Table::same_schema(const Table& other) const {
  if (columns_.size() != other.columns_.size()) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name() != other.columns_[i].name() || columns_[i].type() != other.columns_[i].type()) {
      return false;
    }
  }
  return true;
}

void Table::append_rows(const Table& other) {
  if (columns_.empty()) {
    *this = other;
    return;
  }
  if (!same_schema(other)) throw Error(ErrorCategory::Schema, "cannot append rows: column layouts differ");
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    columns_[c].reserve(columns_[c].size() + other.rows());
    for (std::size_t r = 0; r < other.rows(); ++r) columns_[c].append_from(other.columns_[c], r);
  }
}

Table Table::take(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) cols.push_back(c.take(rows));
  return Table(std::move(cols));
}

Table Table::empty_like() const {
  std::vector<Column> cols;
  for (const auto& c : columns_) cols.emplace_back(c.name(), c.type());
  return Table(std::move(cols));
}

// --- CSV -------------------------------------------------------------------

std::vector<CsvRow> parse_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  std::size_t line = 1;
  const std::size_t n = text.size();
  while (i < n) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool any = false;
    for (;;) {
      if (i < n && text[i] == '"') {
        ++i;
        for (;;) {
          if (i >= n) throw Error(ErrorCategory::Parse, "unterminated quoted field starting on line " + std::to_string(row.line));
          const char ch = text[i++];
          if (ch == '"') {
            if (i < n && text[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              break;
            }
          } else {
            if (ch == '\n') ++line;
            field.push_back(ch);
          }
        }
        any = true;
      }
      while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        field.push_back(text[i++]);
        any = true;
      }
      if (i < n && text[i] == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        any = true;
        ++i;
        continue;
      }
      break;
    }
    if (i < n && text[i] == '\r') ++i;
    if (i < n && text[i] == '\n') ++i;
    ++line;
    if (any || !row.fields.empty()) {
      row.fields.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

Table parse_csv_table(std::string_view text, const TypeHints& hints) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCategory::Format, "CSV has no header row");
  const auto& header = rows.front().fields;
  const std::size_t ncols = header.size();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].fields.size() != ncols) {
      throw Error(ErrorCategory::Parse, "CSV line " + std::to_string(rows[r].line) + ": expected " +
                                            std::to_string(ncols) + " fields, got " +
                                            std::to_string(rows[r].fields.size()));
    }
  }
  std::vector<Column> cols;
  cols.reserve(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    ColumnType type = ColumnType::String;
    if (const auto it = hints.find(header[c]); it != hints.end()) {
      type = it->second;
    } else {
      bool all_int = true;
      bool all_num = true;
      bool any = false;
      for (std::size_t r = 1; r < rows.size() && all_num; ++r) {
        const auto& f = rows[r].fields[c];
        if (f.empty()) continue;
        any = true;
        std::int64_t iv = 0;
        double dv = 0;
        if (all_int && !parse_int(f, iv)) all_int = false;
        if (!all_int && !parse_double(f, dv)) all_num = false;
      }
      if (any && all_int) type = ColumnType::Int64;
      else if (any && all_num) type = ColumnType::Double;
    }
    Column col(header[c], type);
    col.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (!col.push_text(rows[r].fields[c])) {
        throw Error(ErrorCategory::Parse, "CSV line " + std::to_string(rows[r].line) + ", column '" + header[c] +
                                              "': cannot parse '" + rows[r].fields[c] + "' as " +
                                              std::string(column_type_name(type)));
      }
    }
    cols.push_back(std::move(col));
  }
  return Table(std::move(cols));
}

Table read_csv_table(const std::filesystem::path& path, const TypeHints& hints) {
  try {
    return parse_csv_table(read_file(path), hints);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

std::string to_csv(const Table& table) {
  std::string out;
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out.push_back(',');
    out += csv_escape(cols[c].name());
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out.push_back(',');
      if (cols[c].type() == ColumnType::String) {
        out += csv_escape(cols[c].render(r));
      } else {
        out += cols[c].render(r);
      }
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv_table(const Table& table, const std::filesystem::path& path) {
  write_file_atomic(path, to_csv(table));
}

void write_table_pair(const Table& table, const std::filesystem::path& stem) {
  auto csv = stem;
  csv += ".csv";
  auto pq = stem;
  pq += ".parquet";
  write_csv_table(table, csv);
  write_parquet(table, pq);
}

// --- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::Io, path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCategory::Io, path.string() + ": read failed");
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(content.data()),
                                                         content.size()));
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::Io, path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(content.data()), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCategory::Io, path.string() + ": write failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCategory::Io, path.string() + ": rename failed");
  }
}

}  // namespace mawiprep
