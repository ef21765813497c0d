// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/mawiprep.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "mawiprep/error.hpp"
#include "mawiprep/flowmeter.hpp"
#include "mawiprep/labeling.hpp"
#include "mawiprep/pipeline.hpp"
#include "mawiprep/table.hpp"

using namespace mawiprep;

struct mwp_pipeline {
  explicit mwp_pipeline(pipeline::PipelineConfig c) : impl(std::move(c)), root(impl.config().root.string()) {}
  pipeline::Pipeline impl;
  std::string root;
};

namespace {

thread_local std::string g_last_error;

mwp_status fail(mwp_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
mwp_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return MWP_OK;
  } catch (const Error& e) {
    return fail(static_cast<mwp_status>(e.category()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MWP_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(MWP_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(MWP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MWP_ERR_INTERNAL, "unknown failure");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCategory::InvalidArgument, std::string(what) + " must not be NULL");
}

std::string render(const pipeline::StageReport& r) {
  return r.scope + "\t" + std::string(pipeline::to_string(r.stage)) + "\t" + (r.executed ? "ran" : "skipped") + "\t" +
         r.reason + "\n";
}

}  // namespace

extern "C" {

const char* mwp_version(void) { return "0.1.0"; }

const char* mwp_status_name(mwp_status status) {
  if (status == MWP_OK) return "ok";
  if (status < MWP_ERR_INVALID_ARGUMENT || status > MWP_ERR_INTERNAL) return "unknown";
  return category_name(static_cast<ErrorCategory>(status)).data();
}

const char* mwp_last_error(void) { return g_last_error.c_str(); }

void mwp_string_free(char* s) { std::free(s); }

void mwp_config_init(mwp_config* config) {
  if (!config) return;
  const pipeline::PipelineConfig d;
  config->root = nullptr;
  config->jobs = d.jobs;
  config->seed = d.seed;
  config->flow_timeout_us = d.flow.flow_timeout_us;
  config->activity_timeout_us = d.flow.activity_timeout_us;
  config->symmetric_filters = d.split.symmetric_filters;
  config->exclude_notice = d.split.exclude_notice;
  config->target_rows = d.target_rows;
  config->stratify_by_day = d.stratify_by_day;
  config->with_validation = d.with_validation;
}

mwp_status mwp_pipeline_open(const mwp_config* config, mwp_pipeline** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    mwp_config c;
    mwp_config_init(&c);
    if (config) c = *config;
    pipeline::PipelineConfig pc;
    pc.root = pipeline::resolve_root(c.root ? std::optional<std::filesystem::path>(c.root) : std::nullopt);
    pc.jobs = c.jobs;
    pc.seed = c.seed;
    pc.flow.flow_timeout_us = c.flow_timeout_us;
    pc.flow.activity_timeout_us = c.activity_timeout_us;
    pc.split.symmetric_filters = c.symmetric_filters != 0;
    pc.split.exclude_notice = c.exclude_notice != 0;
    pc.target_rows = c.target_rows;
    pc.stratify_by_day = c.stratify_by_day != 0;
    pc.with_validation = c.with_validation != 0;
    if (pc.flow.flow_timeout_us <= 0 || pc.flow.activity_timeout_us <= 0) {
      throw Error(ErrorCategory::InvalidArgument, "timeouts must be positive");
    }
    *out = new mwp_pipeline(std::move(pc));
  });
}

void mwp_pipeline_close(mwp_pipeline* pipeline) { delete pipeline; }

const char* mwp_pipeline_root(const mwp_pipeline* pipeline) { return pipeline ? pipeline->root.c_str() : ""; }

mwp_status mwp_pipeline_ingest(mwp_pipeline* pipeline, const char* manifest_path, size_t* days_out) {
  return guarded([&] {
    require(pipeline, "pipeline");
    require(manifest_path, "manifest_path");
    const auto m = pipeline->impl.ingest(manifest_path);
    if (days_out) *days_out = m.entries.size();
  });
}

mwp_status mwp_pipeline_run(mwp_pipeline* pipeline, const char* from, const char* to, const char* stages,
                            char** report_out) {
  return guarded([&] {
    require(pipeline, "pipeline");
    if (report_out) *report_out = nullptr;
    std::vector<std::string> dates;
    if (from || to) {
      dates = pipeline->impl.dates_in_range(from ? from : to, to ? to : from);
      if (dates.empty()) throw Error(ErrorCategory::InvalidArgument, "no manifest days in the requested range");
    } else {
      dates = pipeline->impl.manifest().dates();
    }
    const auto list = stages ? pipeline::parse_stage_list(stages) : pipeline::day_stages();
    std::string report;
    for (const auto& r : pipeline->impl.run(dates, list)) report += render(r);
    if (report_out) *report_out = dup_string(report);
  });
}

mwp_status mwp_pipeline_sample(mwp_pipeline* pipeline, const char* month, char** report_out) {
  return guarded([&] {
    require(pipeline, "pipeline");
    require(month, "month");
    if (report_out) *report_out = nullptr;
    const auto r = pipeline->impl.sample(month);
    if (report_out) *report_out = dup_string(render(r));
  });
}

mwp_status mwp_pipeline_preprocess(mwp_pipeline* pipeline, const char* month, char** report_out) {
  return guarded([&] {
    require(pipeline, "pipeline");
    require(month, "month");
    if (report_out) *report_out = nullptr;
    const auto r = pipeline->impl.preprocess(month);
    if (report_out) *report_out = dup_string(render(r));
  });
}

mwp_status mwp_stats(const char* root, int as_csv, char** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const auto dir = pipeline::resolve_root(root ? std::optional<std::filesystem::path>(root) : std::nullopt);
    const auto s = pipeline::compute_stats(dir);
    *out = dup_string(as_csv ? s.to_csv() : s.to_json());
  });
}

mwp_status mwp_simpson_index(const char* const* a, size_t a_len, const char* const* b, size_t b_len, double* out) {
  return guarded([&] {
    require(out, "out");
    if ((a_len && !a) || (b_len && !b)) throw Error(ErrorCategory::InvalidArgument, "set arrays must not be NULL");
    labeling::AlarmTrafficSet sa{"a", {}}, sb{"b", {}};
    for (size_t i = 0; i < a_len; ++i) sa.flows.insert(a[i]);
    for (size_t i = 0; i < b_len; ++i) sb.flows.insert(b[i]);
    *out = labeling::simpson_index(sa, sb);
  });
}

mwp_status mwp_classify_community(int accepted, double distance, int fold_unclassified, const char** class_out) {
  return guarded([&] {
    require(class_out, "class_out");
    labeling::ClassifyOptions opts;
    opts.fold_unclassified_into_suspicious = fold_unclassified != 0;
    *class_out = labeling::to_string(labeling::classify_community({accepted != 0, distance}, opts)).data();
  });
}

size_t mwp_flow_schema_size(void) { return flowmeter::emit_schema().size(); }

const char* mwp_flow_schema_column(size_t index) {
  const auto& s = flowmeter::emit_schema();
  return index < s.size() ? s[index].c_str() : nullptr;
}

mwp_status mwp_flows_from_capture(const char* capture_path, int64_t flow_timeout_us, int64_t activity_timeout_us,
                                  const char* out_csv, int parquet, size_t* flows_out) {
  return guarded([&] {
    require(capture_path, "capture_path");
    require(out_csv, "out_csv");
    flowmeter::FlowOptions opts;
    opts.flow_timeout_us = flow_timeout_us;
    opts.activity_timeout_us = activity_timeout_us;
    const auto flows = flowmeter::flows_from_capture(capture_path, opts);
    const Table t = flowmeter::to_table(flows);
    write_csv_table(t, out_csv);
    if (parquet) write_parquet(t, std::filesystem::path(out_csv).replace_extension(".parquet"));
    if (flows_out) *flows_out = flows.size();
  });
}

}  // extern "C"
