// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through mawiprep.h.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mawiprep/mawiprep.h"

namespace {

int report_failure(mwp_status status) {
  std::fprintf(stderr, "error[%s]: %s\n", mwp_status_name(status), mwp_last_error());
  return static_cast<int>(status);
}

int print_and_free(mwp_status status, char*& text) {
  if (status != MWP_OK) return report_failure(status);
  if (text) std::fputs(text, stdout);
  mwp_string_free(text);
  text = nullptr;
  return 0;
}

std::int64_t seconds_to_us(double s) { return static_cast<std::int64_t>(std::llround(s * 1e6)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turn MAWILab captures and annotations into labeled flow datasets"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(mwp_version()));

  mwp_config config;
  mwp_config_init(&config);
  std::optional<std::string> root;
  double flow_timeout = static_cast<double>(config.flow_timeout_us) / 1e6;
  double activity_timeout = static_cast<double>(config.activity_timeout_us) / 1e6;
  bool symmetric = false;
  bool exclude_notice = false;

  app.add_option("--root", root, "Data root directory (default: $MAWIPREP_DATA_ROOT or ./data)");
  app.add_option("--jobs", config.jobs, "Days processed in parallel")->check(CLI::PositiveNumber);
  app.add_option("--seed", config.seed, "Seed for sampling and splitting");
  app.add_option("--flow-timeout", flow_timeout, "Flow timeout in seconds")->check(CLI::PositiveNumber);
  app.add_option("--activity-timeout", activity_timeout, "Activity timeout in seconds")->check(CLI::PositiveNumber);
  app.add_flag("--symmetric-filters", symmetric, "Also match annotation filters with endpoints swapped");
  app.add_flag("--exclude-notice", exclude_notice, "Treat notice-class anomalies as benign traffic");

  auto* ingest = app.add_subcommand("ingest", "Validate a manifest and copy its files into raw/");
  std::string manifest_path;
  ingest->add_option("manifest", manifest_path, "CSV with columns date,capture,annotations")->required();

  auto* run = app.add_subcommand("run", "Run per-day stages");
  std::string date;
  std::string range;
  std::string stages = "merge-annotations,split,flows,label,aggregate";
  auto* date_opt = run->add_option("--date", date, "Single day (YYYY-MM-DD)");
  run->add_option("--range", range, "Inclusive day range FROM:TO")->excludes(date_opt);
  run->add_option("--stages", stages, "Comma-separated stages, or 'all'");

  auto* stats = app.add_subcommand("stats", "Row counts, label ratio and per-day series");
  std::string format = "json";
  stats->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  auto* sample = app.add_subcommand("sample", "Sample one month of aggregated flows");
  std::string sample_month;
  bool stratify = false;
  sample->add_option("--month", sample_month, "Month (YYYY-MM)")->required();
  sample->add_option("--target-rows", config.target_rows, "Rows to draw");
  sample->add_flag("--stratify-by-day", stratify, "Allocate rows to days in proportion to their size");

  auto* preprocess = app.add_subcommand("preprocess", "Clean, encode, scale and split a month sample");
  std::string preprocess_month;
  bool validation = false;
  preprocess->add_option("--month", preprocess_month, "Month (YYYY-MM)")->required();
  preprocess->add_flag("--with-validation", validation, "Carve a validation split out of the training rows");

  CLI11_PARSE(app, argc, argv);

  config.flow_timeout_us = seconds_to_us(flow_timeout);
  config.activity_timeout_us = seconds_to_us(activity_timeout);
  config.symmetric_filters = symmetric;
  config.exclude_notice = exclude_notice;
  config.stratify_by_day = stratify;
  config.with_validation = validation;
  config.root = root ? root->c_str() : nullptr;

  if (stats->parsed()) {
    char* out = nullptr;
    return print_and_free(mwp_stats(config.root, format == "csv", &out), out);
  }

  mwp_pipeline* pipeline = nullptr;
  if (const mwp_status s = mwp_pipeline_open(&config, &pipeline); s != MWP_OK) return report_failure(s);
  int rc = 0;
  char* out = nullptr;
  if (ingest->parsed()) {
    size_t days = 0;
    const mwp_status s = mwp_pipeline_ingest(pipeline, manifest_path.c_str(), &days);
    if (s == MWP_OK) std::printf("ingested %zu day(s) into %s\n", days, mwp_pipeline_root(pipeline));
    else rc = report_failure(s);
  } else if (run->parsed()) {
    std::string from, to;
    if (!date.empty()) {
      from = to = date;
    } else if (!range.empty()) {
      const auto colon = range.find(':');
      if (colon == std::string::npos) {
        std::fprintf(stderr, "error[invalid-argument]: --range expects FROM:TO\n");
        mwp_pipeline_close(pipeline);
        return MWP_ERR_INVALID_ARGUMENT;
      }
      from = range.substr(0, colon);
      to = range.substr(colon + 1);
    }
    rc = print_and_free(mwp_pipeline_run(pipeline, from.empty() ? nullptr : from.c_str(),
                                         to.empty() ? nullptr : to.c_str(), stages.c_str(), &out),
                        out);
  } else if (sample->parsed()) {
    rc = print_and_free(mwp_pipeline_sample(pipeline, sample_month.c_str(), &out), out);
  } else if (preprocess->parsed()) {
    rc = print_and_free(mwp_pipeline_preprocess(pipeline, preprocess_month.c_str(), &out), out);
  }
  mwp_pipeline_close(pipeline);
  return rc;
}
