// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <random>

#include "mawiprep/annotations.hpp"
#include "mawiprep/error.hpp"
#include "support.hpp"

namespace mawiprep::annotations {
namespace {

constexpr const char* kHeader =
    "anomalyID,label,taxonomy,heuristic,distance,nbDetectors,srcIP,srcPort,dstIP,dstPort,protocol\n";

ErrorCategory category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  return ErrorCategory::Internal;
}

TEST(CsvAnnotations, HeaderOnlyIsEmpty) { EXPECT_TRUE(parse_csv_annotations_text(kHeader).empty()); }

TEST(CsvAnnotations, RowsSharingIdBecomeOneRecord) {
  const auto recs = parse_csv_annotations_text(std::string(kHeader) +
                                               "7,anomalous,ptmpHTTP,503,0.7,4,10.0.0.1,,10.0.0.2,80,tcp\n"
                                               "7,anomalous,ptmpHTTP,503,0.7,4,10.0.0.1,,10.0.0.2,443,tcp\n");
  ASSERT_EQ(recs.size(), 1u);
  ASSERT_EQ(recs[0].filters.size(), 2u);
  EXPECT_EQ(recs[0].filters[0].dst_port, 80);
  EXPECT_EQ(recs[0].filters[1].dst_port, 443);
  EXPECT_FALSE(recs[0].filters[0].src_port.has_value());
  EXPECT_FALSE(recs[0].filters[0].window.has_value());
}

TEST(CsvAnnotations, MetadataCarriedVerbatim) {
  const auto recs = parse_csv_annotations_text(std::string(kHeader) + "a1,anomalous,alphfl,20,0.7,4,,,10.1.1.1,,\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].label, Label::Anomalous);
  EXPECT_DOUBLE_EQ(recs[0].distance, 0.7);
  EXPECT_EQ(recs[0].nb_detectors, 4u);
  EXPECT_EQ(recs[0].taxonomy, "alphfl");
  EXPECT_EQ(recs[0].heuristic, 20);
  EXPECT_EQ(recs[0].filters[0].dst_ip->to_string(), "10.1.1.1");
}

TEST(CsvAnnotations, AllAbsentFilterRejected) {
  EXPECT_EQ(category_of([] { parse_csv_annotations_text(std::string(kHeader) + "a1,notice,x,1,0,1,,,,,\n"); }),
            ErrorCategory::Validation);
}

TEST(CsvAnnotations, UnknownLabelRejected) {
  try {
    parse_csv_annotations_text(std::string(kHeader) + "a1,benign,x,1,0,1,10.0.0.1,,,,\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Parse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(CsvAnnotations, ColumnMapRenamesAndDropsColumns) {
  CsvColumnMap map;
  map.set("anomalyID", "id");
  map.set("nbDetectors", "-");
  const auto recs = parse_csv_annotations_text(
      "id,label,taxonomy,heuristic,distance,srcIP,srcPort,dstIP,dstPort,protocol\n"
      "z,suspicious,t,1,-2,,,,53,udp\n",
      map);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].anomaly_id, "z");
  EXPECT_EQ(recs[0].nb_detectors, 0u);
  EXPECT_EQ(recs[0].filters[0].protocol, 17);
}

constexpr const char* kAdmdOne = R"(<?xml version="1.0"?>
<admd>
  <anomaly id="a1" type="anomalous" taxonomy="ptmpHTTP" heuristic="503" distance="-1" nbDetectors="3">
    <from sec="1293840000" usec="0"/>
    <to sec="1293840060" usec="0"/>
    <filter src_ip="10.0.0.1" dst_port="80" proto="6"/>
  </anomaly>
</admd>
)";

TEST(Admd, WindowArithmetic) {
  const auto res = parse_admd_text(kAdmdOne);
  ASSERT_EQ(res.anomalies.size(), 1u);
  ASSERT_EQ(res.anomalies[0].filters.size(), 1u);
  const auto& w = res.anomalies[0].filters[0].window;
  ASSERT_TRUE(w);
  EXPECT_EQ(w->stop_us - w->start_us, 60'000'000);
  EXPECT_EQ(w->start_us, 1293840000'000000);
  EXPECT_EQ(res.missing_window_warnings, 0u);
}

TEST(Admd, ZeroAnomalies) { EXPECT_TRUE(parse_admd_text("<admd></admd>").anomalies.empty()); }

TEST(Admd, SameExpressionDifferentWindowsStayDistinct) {
  const auto res = parse_admd_text(R"(<admd>
<anomaly id="a" type="notice"><from sec="10"/><to sec="20"/><filter dst_port="22"/></anomaly>
<anomaly id="b" type="notice"><from sec="30"/><to sec="40"/><filter dst_port="22"/></anomaly>
</admd>)");
  ASSERT_EQ(res.anomalies.size(), 2u);
  EXPECT_TRUE(res.anomalies[0].filters[0].same_expression(res.anomalies[1].filters[0]));
  EXPECT_NE(res.anomalies[0].filters[0].window, res.anomalies[1].filters[0].window);
}

TEST(Admd, FromAfterToIsValidationError) {
  EXPECT_EQ(category_of([] {
              parse_admd_text(R"(<admd><anomaly id="a" type="notice"><from sec="50"/><to sec="20"/>
<filter dst_port="22"/></anomaly></admd>)");
            }),
            ErrorCategory::Validation);
}

TEST(Admd, SyntaxErrorNamesLine) {
  try {
    parse_admd_text("<admd>\n<anomaly id=\"a\" type=\"notice\">\n</admd>");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Admd, MissingBoundsCountedAsWarning) {
  const auto res = parse_admd_text(R"(<admd><anomaly id="a" type="suspicious"><filter src_ip="1.2.3.4"/></anomaly></admd>)");
  ASSERT_EQ(res.anomalies.size(), 1u);
  EXPECT_FALSE(res.anomalies[0].filters[0].window.has_value());
  EXPECT_EQ(res.missing_window_warnings, 1u);
}

TEST(Admd, SlicesCarryTheirOwnWindows) {
  const auto res = parse_admd_text(R"(<admd><anomaly id="a" type="anomalous">
<slice><from sec="1"/><to sec="2"/><filter dst_port="1"/></slice>
<slice><from sec="5"/><to sec="9"/><filter dst_port="2"/></slice>
</anomaly></admd>)");
  ASSERT_EQ(res.anomalies[0].filters.size(), 2u);
  EXPECT_EQ(res.anomalies[0].filters[0].window->start_us, 1'000'000);
  EXPECT_EQ(res.anomalies[0].filters[1].window->stop_us, 9'000'000);
}

using testing::anomaly;
using testing::filter;

TEST(Merge, CsvOnlyPassesThrough) {
  auto day = merge_annotations({anomaly("c", Label::Notice, {filter("1.1.1.1", {}, {}, {})})}, {}, "2011-01-01");
  ASSERT_EQ(day.anomalies.size(), 1u);
  EXPECT_FALSE(day.anomalies[0].filters[0].window.has_value());
}

TEST(Merge, WindowedDuplicateWins) {
  const TimeWindow w{100, 200};
  auto csv = anomaly("x", Label::Anomalous, {filter("10.0.0.1", {}, "10.0.0.2", 80, 6)});
  auto admd = anomaly("x", Label::Anomalous, {filter("10.0.0.1", {}, "10.0.0.2", 80, 6, w)});
  const auto day = merge_annotations({csv}, {admd}, "2011-01-01");
  ASSERT_EQ(day.anomalies.size(), 1u);
  ASSERT_EQ(day.anomalies[0].filters.size(), 1u);
  EXPECT_EQ(day.anomalies[0].filters[0].window, w);
}

TEST(Merge, DisjointSetsUnion) {
  std::vector<AnomalyRecord> csv{anomaly("a", Label::Notice, {filter({}, {}, {}, 1)}),
                                 anomaly("b", Label::Notice, {filter({}, {}, {}, 2)})};
  std::vector<AnomalyRecord> admd{anomaly("c", Label::Notice, {filter({}, {}, {}, 3, {}, TimeWindow{1, 2})}),
                                  anomaly("d", Label::Notice, {filter({}, {}, {}, 4, {}, TimeWindow{1, 2})}),
                                  anomaly("e", Label::Notice, {filter({}, {}, {}, 5, {}, TimeWindow{1, 2})})};
  EXPECT_EQ(merge_annotations(csv, admd, "2011-01-01").anomalies.size(), 5u);
}

TEST(Merge, ConflictingLabelsRejected) {
  auto a = anomaly("x", Label::Anomalous, {filter({}, {}, {}, 1)});
  auto b = anomaly("x", Label::Notice, {filter({}, {}, {}, 1, {}, TimeWindow{1, 2})});
  try {
    merge_annotations({a}, {b}, "d");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Conflict);
    EXPECT_NE(std::string(e.what()).find("anomalous"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("notice"), std::string::npos);
  }
}

// Randomized property: idempotence through the csv/admd views and no filter loss.
TEST(Merge, IdempotentAndLossless) {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<AnomalyRecord> csv, admd;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      const std::string id = "id" + std::to_string(rng() % 8);
      const auto label = static_cast<Label>(std::hash<std::string>{}(id) % 3);
      std::vector<AnomalyFilter> filters;
      const int k = 1 + static_cast<int>(rng() % 3);
      for (int j = 0; j < k; ++j) {
        const std::uint16_t port = static_cast<std::uint16_t>(rng() % 4);
        if (rng() % 2) {
          filters.push_back(filter({}, {}, {}, port, {}, TimeWindow{0, static_cast<std::int64_t>(rng() % 3)}));
        } else {
          filters.push_back(filter({}, {}, {}, port));
        }
      }
      auto rec = anomaly(id, label, {});
      for (auto& f : filters) {
        auto r = rec;
        r.filters = {f};
        (f.window ? admd : csv).push_back(r);
      }
    }
    // Collapse duplicate ids inside each source the way a parser would.
    auto collapse = [](std::vector<AnomalyRecord> in) {
      std::map<std::string, AnomalyRecord> by;
      for (auto& r : in) {
        auto [it, fresh] = by.emplace(r.anomaly_id, r);
        if (!fresh) it->second.filters.insert(it->second.filters.end(), r.filters.begin(), r.filters.end());
      }
      std::vector<AnomalyRecord> out;
      for (auto& [_, r] : by) out.push_back(r);
      return out;
    };
    csv = collapse(csv);
    admd = collapse(admd);
    const auto merged = merge_annotations(csv, admd, "2011-01-01");
    const auto again = merge_annotations(merged.csv_view(), merged.admd_view(), "2011-01-01");
    EXPECT_EQ(again.anomalies, merged.anomalies);

    for (const auto* src : {&csv, &admd}) {
      for (const auto& r : *src) {
        const auto* out = merged.find(r.anomaly_id);
        ASSERT_NE(out, nullptr);
        for (const auto& f : r.filters) {
          const bool kept = std::find(out->filters.begin(), out->filters.end(), f) != out->filters.end();
          const bool shadowed = !f.window && std::any_of(out->filters.begin(), out->filters.end(), [&](const auto& g) {
            return g.window && g.same_expression(f);
          });
          EXPECT_TRUE(kept || shadowed);
        }
      }
    }
  }
}

TEST(AnnotationTable, RoundTrip) {
  const auto res = parse_admd_text(kAdmdOne);
  const auto day = merge_annotations(
      parse_csv_annotations_text(std::string(kHeader) + "b,notice,t,1,0.9,2,,,,53,udp\n"), res.anomalies, "2011-01-01");
  const auto back = from_table(parse_csv_table(to_csv(to_table(day)), table_hints()), "2011-01-01");
  EXPECT_EQ(back.anomalies, day.anomalies);
}

}  // namespace
}  // namespace mawiprep::annotations
