// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the shared library strictly through mawiprep.h, plus the CLI
// binary's exit codes.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mawiprep/mawiprep.h"
#include "support.hpp"

namespace {

namespace fs = std::filesystem;
using mawiprep::testing::TempDir;

std::string take(char* s) {
  std::string out = s ? s : "";
  mwp_string_free(s);
  return out;
}

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(mwp_version(), "0.1.0");
  EXPECT_STREQ(mwp_status_name(MWP_OK), "ok");
  EXPECT_STREQ(mwp_status_name(MWP_ERR_VALIDATION), "validation");
  EXPECT_STREQ(mwp_status_name(static_cast<mwp_status>(999)), "unknown");
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(mwp_pipeline_open(nullptr, nullptr), MWP_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(mwp_last_error()).find("out"), std::string::npos);
  EXPECT_EQ(mwp_pipeline_ingest(nullptr, "x", nullptr), MWP_ERR_INVALID_ARGUMENT);
  const char* cls = nullptr;
  EXPECT_EQ(mwp_classify_community(0, 0.0, 0, nullptr), MWP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(mwp_classify_community(0, 0.0, 0, &cls), MWP_OK);
  EXPECT_STREQ(cls, "suspicious");
}

TEST(CApi, SimpsonAndSchema) {
  const char* a[] = {"a", "b", "c"};
  const char* b[] = {"b", "c", "d", "e"};
  double s = 0;
  ASSERT_EQ(mwp_simpson_index(a, 3, b, 4, &s), MWP_OK);
  EXPECT_DOUBLE_EQ(s, 2.0 / 3.0);
  EXPECT_EQ(mwp_simpson_index(a, 0, b, 4, &s), MWP_ERR_INVALID_ARGUMENT);
  EXPECT_STREQ(mwp_flow_schema_column(0), "Flow ID");
  EXPECT_STREQ(mwp_flow_schema_column(mwp_flow_schema_size() - 1), "Label");
  EXPECT_EQ(mwp_flow_schema_column(mwp_flow_schema_size()), nullptr);
}

TEST(CApi, FlowsFromCapture) {
  TempDir dir;
  size_t n = 0;
  const auto out = (dir / "flows.csv").string();
  ASSERT_EQ(mwp_flows_from_capture(mawiprep::testing::fixture("three_udp.pcap.gz").c_str(), 120000000, 5000000,
                                   out.c_str(), 1, &n),
            MWP_OK)
      << mwp_last_error();
  EXPECT_EQ(n, 1u);
  EXPECT_TRUE(fs::exists(dir / "flows.parquet"));
  EXPECT_EQ(mwp_flows_from_capture((dir / "none.pcap").c_str(), 1, 1, out.c_str(), 0, &n), MWP_ERR_IO);
}

TEST(CApi, StatsOnEmptyRoot) {
  TempDir dir;
  char* text = nullptr;
  ASSERT_EQ(mwp_stats(dir.path().c_str(), 1, &text), MWP_OK);
  EXPECT_EQ(take(text), "date,rows,benign,labeled,annotation_filters\n");
}

TEST(CApi, PipelineLifecycle) {
  TempDir dir;
  const auto cap = mawiprep::testing::fixture("three_udp.pcap");
  std::ofstream(dir / "a.csv") << "anomalyID,label,taxonomy,heuristic,distance,nbDetectors,srcIP,srcPort,dstIP,dstPort,"
                                  "protocol\nx,anomalous,t,1,0,1,,,,53,udp\n";
  std::ofstream(dir / "m.csv") << "date,capture,annotations\n2011-01-01," << cap.string() << "," << (dir / "a.csv").string()
                               << "\n";
  mwp_config cfg;
  mwp_config_init(&cfg);
  const auto root = (dir / "root").string();
  cfg.root = root.c_str();
  cfg.target_rows = 1;
  mwp_pipeline* p = nullptr;
  ASSERT_EQ(mwp_pipeline_open(&cfg, &p), MWP_OK);
  EXPECT_EQ(std::string(mwp_pipeline_root(p)), root);
  size_t days = 0;
  ASSERT_EQ(mwp_pipeline_ingest(p, (dir / "m.csv").c_str(), &days), MWP_OK) << mwp_last_error();
  EXPECT_EQ(days, 1u);
  char* report = nullptr;
  ASSERT_EQ(mwp_pipeline_run(p, nullptr, nullptr, "all", &report), MWP_OK) << mwp_last_error();
  const auto text = take(report);
  EXPECT_NE(text.find("2011-01-01\tflows\tran"), std::string::npos) << text;
  EXPECT_NE(text.find("2011-01\tpreprocess\tran"), std::string::npos) << text;
  ASSERT_EQ(mwp_pipeline_run(p, "2011-01-01", "2011-01-01", nullptr, &report), MWP_OK);
  EXPECT_EQ(take(report).find("\tran\t"), std::string::npos);
  EXPECT_EQ(mwp_pipeline_run(p, "2012-01-01", "2012-01-31", nullptr, &report), MWP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(report, nullptr);
  EXPECT_EQ(mwp_pipeline_run(p, nullptr, nullptr, "bogus", &report), MWP_ERR_INVALID_ARGUMENT);
  mwp_pipeline_close(p);

  char* stats = nullptr;
  ASSERT_EQ(mwp_stats(root.c_str(), 0, &stats), MWP_OK);
  EXPECT_NE(take(stats).find("\"anomalous\": 1"), std::string::npos);
}

TEST(CApi, BadTimeoutsRejected) {
  TempDir dir;
  mwp_config cfg;
  mwp_config_init(&cfg);
  const auto root = dir.path().string();
  cfg.root = root.c_str();
  cfg.flow_timeout_us = 0;
  mwp_pipeline* p = nullptr;
  EXPECT_EQ(mwp_pipeline_open(&cfg, &p), MWP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(p, nullptr);
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  TempDir tmp;
  const std::string cmd = std::string(MAWIPREP_CLI) + " " + args + " >" + (tmp / "out").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(tmp / "out");
    std::stringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodesFollowStatus) {
  TempDir dir;
  std::string out;
  EXPECT_EQ(run_cli("--version", &out), 0);
  EXPECT_NE(out.find("0.1.0"), std::string::npos);
  EXPECT_EQ(run_cli("--root " + dir.path().string() + " stats --format csv", &out), 0);
  EXPECT_EQ(out, "date,rows,benign,labeled,annotation_filters\n");
  std::ofstream(dir / "dup.csv") << "date,capture,annotations\n2011-01-01,a,b\n2011-01-01,c,d\n";
  EXPECT_EQ(run_cli("--root " + (dir / "r").string() + " ingest " + (dir / "dup.csv").string(), &out),
            MWP_ERR_VALIDATION);
  EXPECT_NE(out.find("error[validation]"), std::string::npos) << out;
  EXPECT_NE(run_cli("frobnicate"), 0);
}

TEST(Cli, EnvironmentSelectsRoot) {
  TempDir dir;
  std::string out;
  const std::string env = "MAWIPREP_DATA_ROOT=" + (dir / "envroot").string() + " ";
  EXPECT_EQ(run_cli("--root " + (dir / "r").string() + " ingest /nonexistent/manifest.csv", &out), MWP_ERR_IO);
  std::ofstream(dir / "empty.csv") << "date,capture,annotations\n";
  const std::string cmd = env + MAWIPREP_CLI + " ingest " + (dir / "empty.csv").string() + " > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "envroot" / "manifest.csv"));
}

}  // namespace
