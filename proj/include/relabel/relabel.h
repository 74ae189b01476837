// Copyright 2026 The Relabel Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the relabeling platform. All functions are thread-safe
 * unless noted. Functions returning rlb_status leave a human-readable
 * message in rlb_last_error() on failure. Strings returned through char**
 * are owned by the caller and released with rlb_string_free(). */

#ifndef RELABEL_RELABEL_H_
#define RELABEL_RELABEL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(RELABEL_BUILDING_LIBRARY)
#define RLB_API __attribute__((visibility("default")))
#else
#define RLB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rlb_status {
  RLB_OK = 0,
  RLB_INVALID_ARGUMENT = 1,
  RLB_PARSE_ERROR = 2,
  RLB_NOT_FOUND = 3,
  RLB_DUPLICATE = 4,
  RLB_STAGE_ORDER = 5,
  RLB_UNDEFINED_METRIC = 6,
  RLB_DEGENERATE = 7,
  RLB_UNAUTHORIZED = 8,
  RLB_IO_ERROR = 9,
  RLB_NOT_READY = 10,
  RLB_FORBIDDEN = 11,
  RLB_INTERNAL = 12
} rlb_status;

/* Agreement reasons reported by rlb_check_agreement. */
typedef enum rlb_agreement_reason {
  RLB_REASON_UNANIMOUS_WITH_ORIGINAL = 0,
  RLB_REASON_LABEL_SETS_DIFFER = 1,
  RLB_REASON_ORIGINAL_LABEL_MISSING = 2,
  RLB_REASON_BOTH = 3
} rlb_agreement_reason;

typedef struct rlb_workspace rlb_workspace;
typedef struct rlb_server rlb_server;

RLB_API const char* rlb_version(void);
RLB_API const char* rlb_status_name(rlb_status status);
/* Message of the last failed call on this thread; "" if none. */
RLB_API const char* rlb_last_error(void);
RLB_API void rlb_string_free(char* text);

/* Opens (or prepares to create) the workspace directory `dir`. */
RLB_API rlb_status rlb_workspace_open(const char* dir, rlb_workspace** out);
RLB_API void rlb_workspace_close(rlb_workspace* workspace);

/* Runs one pipeline stage: ingest, select-model, propose, make-batches,
 * analyze-agreement, assign-refinement, finalize or report. `options_json`
 * is a JSON object of stage options (may be NULL):
 *
 *   ingest             catalog, images, predictions[], reference?
 *   select-model       reference?, model?, count_empty_as_wrong?
 *   propose            k?
 *   make-batches       roster, num_batches?, per_batch?, seed?
 *   assign-refinement  experienced[]?
 *   report             moe_as_written?, count_empty_as_wrong?
 *
 * A completed stage reruns only with `force` != 0. On success a JSON summary
 * is stored in *result_json when result_json is not NULL. */
RLB_API rlb_status rlb_workspace_run(rlb_workspace* workspace,
                                     const char* stage,
                                     const char* options_json, int force,
                                     char** result_json);

/* Synthetic annotators for fixtures: {truth, stage, error_rate?, seed?}
 * with stage one of initial, refinement, triage. */
RLB_API rlb_status rlb_workspace_simulate(rlb_workspace* workspace,
                                          const char* options_json,
                                          char** result_json);

/* Report document of `kind`; `model` (may be NULL) filters heatmap rows. */
RLB_API rlb_status rlb_workspace_report(rlb_workspace* workspace,
                                        const char* kind, const char* model,
                                        char** document);

RLB_API rlb_status rlb_workspace_manifest(rlb_workspace* workspace,
                                          char** manifest_json);

/* Starts the HTTP service on a background thread. Port 0 picks a free port,
 * reported through *bound_port. `admin_key` may be NULL to disable admin
 * login. */
RLB_API rlb_status rlb_server_start(rlb_workspace* workspace, const char* host,
                                    int port, const char* admin_key,
                                    rlb_server** out, int* bound_port);
/* Serves on the calling thread; returns only on failure. */
RLB_API rlb_status rlb_serve(rlb_workspace* workspace, const char* host,
                             int port, const char* admin_key);
/* Stops the service and frees the handle. */
RLB_API void rlb_server_stop(rlb_server* server);

/* Writes a synthetic dataset to `dir`. Options: images, classes, models,
 * standard_annotators, experienced_annotators, seed. */
RLB_API rlb_status rlb_make_fixture(const char* dir, const char* options_json,
                                    char** result_json);

/* 95% half-width for proportion p over n trials. *defined is 0 when n <= 1.
 * as_written != 0 selects the extra 1/sqrt(n) composition. */
RLB_API rlb_status rlb_margin_of_error(double p, size_t n, int as_written,
                                       double* half_width, int* defined);

/* Agreement predicate over `num_sets` label sets stored back to back in
 * `labels`, set i holding set_sizes[i] entries. */
RLB_API rlb_status rlb_check_agreement(const int32_t* labels,
                                       const size_t* set_sizes,
                                       size_t num_sets, int32_t original_label,
                                       int* agreed,
                                       rlb_agreement_reason* reason);

/* Least-squares line through (x[i], y[i]). */
RLB_API rlb_status rlb_ols(const double* x, const double* y, size_t n,
                           double* slope, double* intercept,
                           double* r_squared);

#ifdef __cplusplus
}
#endif

#endif /* RELABEL_RELABEL_H_ */
