// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mawiprep/error.hpp"
#include "mawiprep/hashing.hpp"
#include "mawiprep/table.hpp"
#include "support.hpp"

namespace mawiprep {
namespace {

Table mixed() {
  Table t;
  t.add_column("count", ColumnType::Int64);
  t.add_column("ratio", ColumnType::Double);
  t.add_column("note", ColumnType::String);
  auto& i = t.column("count");
  auto& d = t.column("ratio");
  auto& s = t.column("note");
  i.push_int(1);
  d.push_double(0.1);
  s.push_string("plain");
  i.push_null();
  d.push_double(-2.5e-300);
  s.push_string("comma, \"quoted\"\nnewline");
  i.push_int(std::numeric_limits<std::int64_t>::min());
  d.push_null();
  s.push_null();
  i.push_int(42);
  d.push_double(1.0 / 3.0);
  s.push_string("ünïcode");
  return t;
}

TEST(Csv, ParserHandlesQuotesCrlfAndBom) {
  const auto rows = parse_csv("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"he said \"\"hi\"\"\"\r\n\n3,\"multi\nline\"\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].fields, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"x,1", "he said \"hi\""}));
  EXPECT_EQ(rows[2].fields, (std::vector<std::string>{"3", "multi\nline"}));
  EXPECT_EQ(rows[2].line, 4u);
}

TEST(Csv, RoundTripWithHints) {
  const auto t = mixed();
  const TypeHints hints{{"count", ColumnType::Int64}, {"ratio", ColumnType::Double}, {"note", ColumnType::String}};
  EXPECT_EQ(parse_csv_table(to_csv(t), hints), t);
}

TEST(Csv, DoublesUseShortestRoundTripForm) {
  Column c("x", ColumnType::Double);
  c.push_double(0.1);
  c.push_double(1e21);
  c.push_double(3.0);
  EXPECT_EQ(c.render(0), "0.1");
  EXPECT_EQ(std::stod(c.render(1)), 1e21);
  EXPECT_EQ(c.render(2), "3");
}

TEST(Csv, TypeErrorsNameTheLine) {
  try {
    parse_csv_table("n\n1\nx\n", {{"n", ColumnType::Int64}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Parquet, RoundTrip) {
  testing::TempDir dir;
  const auto t = mixed();
  write_parquet(t, dir / "t.parquet");
  EXPECT_EQ(read_parquet(dir / "t.parquet"), t);
  const auto bytes = read_file(dir / "t.parquet");
  EXPECT_EQ(bytes.substr(0, 4), "PAR1");
  EXPECT_EQ(bytes.substr(bytes.size() - 4), "PAR1");
}

TEST(Parquet, EmptyTableAndDeterministicBytes) {
  testing::TempDir dir;
  Table t;
  t.add_column("a", ColumnType::Double);
  write_parquet(t, dir / "e.parquet");
  EXPECT_EQ(read_parquet(dir / "e.parquet"), t);
  EXPECT_EQ(to_parquet(mixed()), to_parquet(mixed()));
}

TEST(Table, SchemaChecks) {
  Table a = mixed();
  Table b;
  b.add_column("count", ColumnType::Int64);
  EXPECT_THROW(a.append_rows(b), Error);
  EXPECT_THROW(a.column("missing"), Error);
  const std::vector<std::size_t> rows{3, 0};
  const auto taken = a.take(rows);
  EXPECT_EQ(taken.rows(), 2u);
  EXPECT_EQ(taken.column("count").int_at(0), 42);
}

TEST(Files, AtomicWriteAndDigest) {
  testing::TempDir dir;
  write_file_atomic(dir / "f.txt", std::string_view("abc"));
  EXPECT_EQ(read_file(dir / "f.txt"), "abc");
  EXPECT_EQ(sha256_file(dir / "f.txt"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

}  // namespace
}  // namespace mawiprep
