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

#include "relabel/relabel.h"

#include <cstring>
#include <memory>
#include <string>

#include "relabel/agreement.hpp"
#include "relabel/error.hpp"
#include "relabel/fixture.hpp"
#include "relabel/metrics.hpp"
#include "relabel/service.hpp"
#include "relabel/workspace.hpp"

struct rlb_workspace {
  std::shared_ptr<relabel::Workspace> impl;
};

struct rlb_server {
  std::unique_ptr<relabel::ApiService> impl;
};

namespace {

thread_local std::string last_error;

rlb_status Fail(rlb_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename Fn>
rlb_status Guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return RLB_OK;
  } catch (const relabel::Error& e) {
    return Fail(static_cast<rlb_status>(e.code()), e.what());
  } catch (const relabel::Json::exception& e) {
    return Fail(RLB_INVALID_ARGUMENT, std::string("bad options: ") + e.what());
  } catch (const std::exception& e) {
    return Fail(RLB_INTERNAL, e.what());
  }
}

char* Duplicate(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

relabel::Json Options(const char* options_json) {
  if (!options_json || !*options_json) return relabel::Json::object();
  relabel::Json options = relabel::Json::parse(options_json);
  if (!options.is_object()) {
    throw relabel::Error(relabel::ErrorCode::kInvalidArgument,
                         "options must be a JSON object");
  }
  return options;
}

void Emit(const relabel::Json& result, char** out) {
  if (out) *out = Duplicate(result.dump(2));
}

relabel::Json RunStage(relabel::Workspace& ws, const std::string& stage,
                       const relabel::Json& o, bool force) {
  using namespace relabel;
  if (stage == "ingest") {
    IngestOptions options;
    options.catalog = o.at("catalog").get<std::string>();
    options.images = o.at("images").get<std::string>();
    for (const auto& p : o.at("predictions")) options.predictions.emplace_back(p.get<std::string>());
    if (o.contains("reference") && !o["reference"].is_null()) {
      options.reference = o["reference"].get<std::string>();
    }
    return ws.Ingest(options, force);
  }
  const EmptySetPolicy policy = o.value("count_empty_as_wrong", false)
                                    ? EmptySetPolicy::kCountAsWrong
                                    : EmptySetPolicy::kExclude;
  if (stage == "select-model") {
    SelectOptions options;
    if (o.contains("reference") && !o["reference"].is_null()) {
      options.reference = o["reference"].get<std::string>();
    }
    if (o.contains("model") && !o["model"].is_null()) {
      options.model = o["model"].get<std::string>();
    }
    options.empty_policy = policy;
    return ws.SelectModel(options, force);
  }
  if (stage == "propose") {
    return ws.Propose(o.value("k", kDefaultProposalCount), force);
  }
  if (stage == "make-batches") {
    BatchOptions options;
    options.roster = o.at("roster").get<std::string>();
    options.num_batches = o.value("num_batches", options.num_batches);
    options.per_batch = o.value("per_batch", options.per_batch);
    options.seed = o.value("seed", options.seed);
    return ws.MakeBatches(options, force);
  }
  if (stage == "analyze-agreement") return ws.AnalyzeAgreement(force);
  if (stage == "assign-refinement") {
    return ws.AssignRefinement(o.value("experienced", std::vector<std::string>{}), force);
  }
  if (stage == "finalize") return ws.Finalize(force);
  if (stage == "report") {
    ReportOptions options;
    options.margin_mode =
        o.value("moe_as_written", false) ? MarginMode::kAsWritten : MarginMode::kWald;
    options.empty_policy = policy;
    return ws.Report(options, force);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + stage + "'", "stage");
}

}  // namespace

extern "C" {

const char* rlb_version(void) { return "0.1.0"; }

const char* rlb_status_name(rlb_status status) {
  if (status == RLB_OK) return "ok";
  static thread_local std::string name;
  name = relabel::ErrorCodeName(static_cast<relabel::ErrorCode>(status));
  return name.c_str();
}

const char* rlb_last_error(void) { return last_error.c_str(); }

void rlb_string_free(char* text) { std::free(text); }

rlb_status rlb_workspace_open(const char* dir, rlb_workspace** out) {
  if (!dir || !out) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    auto handle = std::make_unique<rlb_workspace>();
    handle->impl = std::make_shared<relabel::Workspace>(dir);
    *out = handle.release();
  });
}

void rlb_workspace_close(rlb_workspace* workspace) { delete workspace; }

rlb_status rlb_workspace_run(rlb_workspace* workspace, const char* stage,
                             const char* options_json, int force,
                             char** result_json) {
  if (!workspace || !stage) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    Emit(RunStage(*workspace->impl, stage, Options(options_json), force != 0),
         result_json);
  });
}

rlb_status rlb_workspace_simulate(rlb_workspace* workspace,
                                  const char* options_json, char** result_json) {
  if (!workspace) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    const relabel::Json o = Options(options_json);
    relabel::SimulateOptions options;
    options.truth = o.at("truth").get<std::string>();
    options.stage = o.at("stage").get<std::string>();
    options.error_rate = o.value("error_rate", options.error_rate);
    options.seed = o.value("seed", options.seed);
    Emit(workspace->impl->Simulate(options), result_json);
  });
}

rlb_status rlb_workspace_report(rlb_workspace* workspace, const char* kind,
                                const char* model, char** document) {
  if (!workspace || !kind || !document) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    *document = Duplicate(workspace->impl->ReadReport(kind, model ? model : "").body);
  });
}

rlb_status rlb_workspace_manifest(rlb_workspace* workspace, char** manifest_json) {
  if (!workspace || !manifest_json) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] { *manifest_json = Duplicate(workspace->impl->manifest().dump(2)); });
}

rlb_status rlb_server_start(rlb_workspace* workspace, const char* host, int port,
                            const char* admin_key, rlb_server** out,
                            int* bound_port) {
  if (!workspace || !host || !out) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    relabel::ServiceOptions options;
    if (admin_key) options.admin_key = admin_key;
    auto server = std::make_unique<rlb_server>();
    server->impl = std::make_unique<relabel::ApiService>(workspace->impl, options);
    const int bound = server->impl->Start(host, port);
    if (bound_port) *bound_port = bound;
    *out = server.release();
  });
}

rlb_status rlb_serve(rlb_workspace* workspace, const char* host, int port,
                     const char* admin_key) {
  if (!workspace || !host) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    relabel::ServiceOptions options;
    if (admin_key) options.admin_key = admin_key;
    relabel::ApiService service(workspace->impl, options);
    service.Run(host, port);
  });
}

void rlb_server_stop(rlb_server* server) {
  if (!server) return;
  server->impl->Stop();
  delete server;
}

rlb_status rlb_make_fixture(const char* dir, const char* options_json,
                            char** result_json) {
  if (!dir) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    const relabel::Json o = Options(options_json);
    relabel::FixtureOptions options;
    options.images = o.value("images", options.images);
    options.classes = o.value("classes", options.classes);
    options.models = o.value("models", options.models);
    options.standard_annotators = o.value("standard_annotators", options.standard_annotators);
    options.experienced_annotators =
        o.value("experienced_annotators", options.experienced_annotators);
    options.seed = o.value("seed", options.seed);
    Emit(relabel::MakeFixture(dir, options), result_json);
  });
}

rlb_status rlb_margin_of_error(double p, size_t n, int as_written,
                               double* half_width, int* defined) {
  if (!half_width || !defined) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    const auto value = relabel::MarginOfError(
        p, n, as_written ? relabel::MarginMode::kAsWritten : relabel::MarginMode::kWald);
    *defined = value.has_value() ? 1 : 0;
    *half_width = value.value_or(0.0);
  });
}

rlb_status rlb_check_agreement(const int32_t* labels, const size_t* set_sizes,
                               size_t num_sets, int32_t original_label,
                               int* agreed, rlb_agreement_reason* reason) {
  if (!set_sizes || !agreed || !reason) return Fail(RLB_INVALID_ARGUMENT, "null argument");
  return Guarded([&] {
    std::vector<relabel::LabelSet> sets(num_sets);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < num_sets; ++i) {
      if (set_sizes[i] > 0 && !labels) {
        throw relabel::Error(relabel::ErrorCode::kInvalidArgument, "null labels");
      }
      sets[i].insert(labels + cursor, labels + cursor + set_sizes[i]);
      cursor += set_sizes[i];
    }
    const auto result = relabel::CheckAgreement(sets, original_label);
    *agreed = result.agreed() ? 1 : 0;
    *reason = static_cast<rlb_agreement_reason>(result.reason);
  });
}

rlb_status rlb_ols(const double* x, const double* y, size_t n, double* slope,
                   double* intercept, double* r_squared) {
  if ((n > 0 && (!x || !y)) || !slope || !intercept || !r_squared) {
    return Fail(RLB_INVALID_ARGUMENT, "null argument");
  }
  return Guarded([&] {
    std::vector<relabel::Point2> points(n);
    for (std::size_t i = 0; i < n; ++i) points[i] = {x[i], y[i]};
    const auto fit = relabel::OlsRegression(points);
    *slope = fit.slope;
    *intercept = fit.intercept;
    *r_squared = fit.r_squared;
  });
}

}  // extern "C"
