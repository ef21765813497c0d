// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mawiprep {

enum class ColumnType { Int64, Double, String };

std::string_view column_type_name(ColumnType type) noexcept;

/// A nullable column. Exactly one of the value vectors is in use, chosen by
/// `type()`; null slots keep a default value so indices stay aligned.
class Column {
 public:
  Column(std::string name, ColumnType type) : name_(std::move(name)), type_(type) {}

  const std::string& name() const noexcept { return name_; }
  void rename(std::string name) { name_ = std::move(name); }
  ColumnType type() const noexcept { return type_; }
  std::size_t size() const noexcept { return valid_.size(); }
  void reserve(std::size_t n);

  void push_int(std::int64_t v);
  void push_double(double v);
  void push_string(std::string v);
  void push_null();
  /// Parses `text` according to the column type; empty text is null.
  /// Returns false (and pushes nothing) when the text does not parse.
  bool push_text(std::string_view text);

  bool is_null(std::size_t row) const { return valid_[row] == 0; }
  std::int64_t int_at(std::size_t row) const { return ints_[row]; }
  /// Numeric value as double; valid for Int64 and Double columns.
  double number_at(std::size_t row) const;
  const std::string& string_at(std::size_t row) const { return strings_[row]; }

  void set_double(std::size_t row, double v);

  /// Canonical text form (empty for null). Doubles use the shortest
  /// representation that parses back to the same value.
  std::string render(std::size_t row) const;

  void append_from(const Column& other, std::size_t row);
  Column take(std::span<const std::size_t> rows) const;

  const std::vector<std::int64_t>& ints() const noexcept { return ints_; }
  const std::vector<double>& reals() const noexcept { return reals_; }
  const std::vector<std::string>& strings() const noexcept { return strings_; }

  friend bool operator==(const Column&, const Column&) = default;

 private:
  std::string name_;
  ColumnType type_;
  std::vector<std::int64_t> ints_;
  std::vector<double> reals_;
  std::vector<std::string> strings_;
  std::vector<std::uint8_t> valid_;
};

class Table {
 public:
  Table() = default;
  explicit Table(std::vector<Column> columns);

  std::size_t rows() const noexcept { return columns_.empty() ? 0 : columns_.front().size(); }
  std::size_t cols() const noexcept { return columns_.size(); }

  Column& add_column(std::string name, ColumnType type);
  void add_column(Column column);
  void drop_column(std::string_view name);

  const Column& column(std::string_view name) const;
  Column& column(std::string_view name);
  const Column* find(std::string_view name) const;
  Column* find(std::string_view name);
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::vector<Column>& columns() noexcept { return columns_; }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::vector<std::string> column_names() const;

  bool same_schema(const Table& other) const;
  /// Appends all rows of `other`; throws a schema error when layouts differ.
  void append_rows(const Table& other);
  Table take(std::span<const std::size_t> rows) const;
  /// Empty table with this table's column layout.
  Table empty_like() const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::vector<Column> columns_;
};

// --- CSV -------------------------------------------------------------------

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// RFC 4180 parser: quoted fields, doubled quotes, embedded newlines, CRLF or
/// LF line ends. A UTF-8 byte-order mark at the start is skipped. Blank lines
/// are ignored.
std::vector<CsvRow> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

using TypeHints = std::map<std::string, ColumnType, std::less<>>;

/// Columns named in `hints` get that type; the rest are inferred
/// (all-integer -> Int64, all-numeric -> Double, otherwise String).
Table parse_csv_table(std::string_view text, const TypeHints& hints = {});
Table read_csv_table(const std::filesystem::path& path, const TypeHints& hints = {});
std::string to_csv(const Table& table);
void write_csv_table(const Table& table, const std::filesystem::path& path);

// --- Parquet ---------------------------------------------------------------

/// Writes a single-row-group Parquet file: PLAIN encoding, no compression,
/// every column OPTIONAL. Int64 -> INT64, Double -> DOUBLE, String ->
/// BYTE_ARRAY (UTF8).
std::vector<std::uint8_t> to_parquet(const Table& table);
void write_parquet(const Table& table, const std::filesystem::path& path);
/// Reads files in the subset produced by write_parquet (PLAIN, uncompressed,
/// flat schema). Other encodings raise an Unsupported error.
Table read_parquet(const std::filesystem::path& path);

/// Writes `<stem>.parquet` and `<stem>.csv` side by side.
void write_table_pair(const Table& table, const std::filesystem::path& stem);

// --- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> content);

}  // namespace mawiprep
