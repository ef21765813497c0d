/* Copyright 2026 The mawiprep Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of libmawiprep. Every fallible call returns an mwp_status;
 * on failure mwp_last_error() describes the problem for the calling thread.
 * Strings returned through char** out-parameters are heap buffers owned by
 * the caller and released with mwp_string_free().
 */
#ifndef MAWIPREP_MAWIPREP_H_
#define MAWIPREP_MAWIPREP_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MWP_API __declspec(dllexport)
#else
#define MWP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mwp_status {
  MWP_OK = 0,
  MWP_ERR_INVALID_ARGUMENT = 1,
  MWP_ERR_IO = 2,
  MWP_ERR_FORMAT = 3,
  MWP_ERR_PARSE = 4,
  MWP_ERR_VALIDATION = 5,
  MWP_ERR_CONFLICT = 6,
  MWP_ERR_CONSISTENCY = 7,
  MWP_ERR_SCHEMA = 8,
  MWP_ERR_TRUNCATED = 9,
  MWP_ERR_UNSUPPORTED = 10,
  MWP_ERR_REORDER = 11,
  MWP_ERR_CONTRACT = 12,
  MWP_ERR_INTERNAL = 13
} mwp_status;

MWP_API const char* mwp_version(void);
/* Kebab-case category name, e.g. "invalid-argument"; "ok" for MWP_OK. */
MWP_API const char* mwp_status_name(mwp_status status);
/* Message of the last failure on this thread ("" if none). */
MWP_API const char* mwp_last_error(void);
MWP_API void mwp_string_free(char* s);

typedef struct mwp_config {
  const char* root; /* NULL: $MAWIPREP_DATA_ROOT, else "./data" */
  size_t jobs;
  uint64_t seed;
  int64_t flow_timeout_us;
  int64_t activity_timeout_us;
  int symmetric_filters;
  int exclude_notice;
  size_t target_rows;
  int stratify_by_day;
  int with_validation;
} mwp_config;

/* Fills in the defaults. */
MWP_API void mwp_config_init(mwp_config* config);

typedef struct mwp_pipeline mwp_pipeline;

MWP_API mwp_status mwp_pipeline_open(const mwp_config* config, mwp_pipeline** out);
MWP_API void mwp_pipeline_close(mwp_pipeline* pipeline);
/* Absolute or relative data root in use. Owned by the handle. */
MWP_API const char* mwp_pipeline_root(const mwp_pipeline* pipeline);

MWP_API mwp_status mwp_pipeline_ingest(mwp_pipeline* pipeline, const char* manifest_path, size_t* days_out);

/* Runs `stages` (comma list or "all"; NULL means the per-day stages) for the
 * manifest days in [from, to]; NULL bounds select every day. The report has
 * one line per stage: "<scope>\t<stage>\t<ran|skipped>\t<reason>". */
MWP_API mwp_status mwp_pipeline_run(mwp_pipeline* pipeline, const char* from, const char* to, const char* stages,
                                    char** report_out);
MWP_API mwp_status mwp_pipeline_sample(mwp_pipeline* pipeline, const char* month, char** report_out);
MWP_API mwp_status mwp_pipeline_preprocess(mwp_pipeline* pipeline, const char* month, char** report_out);

/* Summary of the aggregated day tables under `root` as JSON, or as per-day
 * CSV plot data when as_csv is nonzero. */
MWP_API mwp_status mwp_stats(const char* root, int as_csv, char** out);

/* Overlap |A ∩ B| / min(|A|, |B|) of two string sets. */
MWP_API mwp_status mwp_simpson_index(const char* const* a, size_t a_len, const char* const* b, size_t b_len,
                                     double* out);
/* "anomalous", "suspicious", "notice" or "unclassified" (static string). */
MWP_API mwp_status mwp_classify_community(int accepted, double distance, int fold_unclassified,
                                          const char** class_out);

MWP_API size_t mwp_flow_schema_size(void);
MWP_API const char* mwp_flow_schema_column(size_t index);

/* Flow features of a capture written as CSV (and Parquet next to it when
 * parquet is nonzero, replacing the .csv extension). */
MWP_API mwp_status mwp_flows_from_capture(const char* capture_path, int64_t flow_timeout_us,
                                          int64_t activity_timeout_us, const char* out_csv, int parquet,
                                          size_t* flows_out);

#ifdef __cplusplus
}
#endif

#endif /* MAWIPREP_MAWIPREP_H_ */
