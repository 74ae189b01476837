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

// Operator command line. Every command maps onto one call of the C API.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "relabel/relabel.h"

namespace {

using nlohmann::json;

struct Common {
  std::string workspace = "workspace";
  bool force = false;
};

int Report(rlb_status status, const char* what) {
  if (status == RLB_OK) return 0;
  std::fprintf(stderr, "relabel: %s failed [%s]: %s\n", what,
               rlb_status_name(status), rlb_last_error());
  return 1;
}

// Prints the JSON summary and routes any warnings to stderr.
void PrintResult(char* result) {
  if (!result) return;
  const json parsed = json::parse(result, nullptr, false);
  if (parsed.is_object() && parsed.contains("warnings")) {
    for (const auto& w : parsed["warnings"]) {
      std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
    }
  }
  std::printf("%s\n", result);
  rlb_string_free(result);
}

int WithWorkspace(const std::string& dir, int (*fn)(rlb_workspace*, const void*),
                  const void* ctx) {
  rlb_workspace* ws = nullptr;
  if (int rc = Report(rlb_workspace_open(dir.c_str(), &ws), "open workspace")) return rc;
  const int rc = fn(ws, ctx);
  rlb_workspace_close(ws);
  return rc;
}

struct StageCall {
  std::string stage;
  json options;
  bool force;
};

int RunStage(const std::string& dir, const StageCall& call) {
  return WithWorkspace(
      dir,
      [](rlb_workspace* ws, const void* ctx) {
        const auto& c = *static_cast<const StageCall*>(ctx);
        char* result = nullptr;
        const std::string options = c.options.dump();
        const int rc = Report(rlb_workspace_run(ws, c.stage.c_str(), options.c_str(),
                                                c.force ? 1 : 0, &result),
                              c.stage.c_str());
        PrintResult(result);
        return rc;
      },
      &call);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label relabeling pipeline", "relabel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rlb_version());

  Common common;
  auto add_common = [&](CLI::App* cmd, bool with_force = true) {
    cmd->add_option("-w,--workspace", common.workspace, "Workspace directory")
        ->capture_default_str();
    if (with_force) cmd->add_flag("--force", common.force, "Rerun a completed stage");
  };

  std::string catalog, images, reference, model, roster, truth, sim_stage;
  std::vector<std::string> predictions, experienced;
  std::size_t k = 20, num_batches = 7, per_batch = 2;
  std::uint64_t seed = 0;
  bool moe_as_written = false, count_empty_as_wrong = false;
  std::string host = "127.0.0.1", admin_key, fixture_dir;
  int port = 8080;
  double error_rate = 0.1;
  std::size_t fx_images = 200, fx_classes = 10, fx_models = 3, fx_standard = 4,
              fx_experienced = 2;
  std::string show_kind;

  auto* ingest = app.add_subcommand("ingest", "Load catalog, images and predictions");
  add_common(ingest);
  ingest->add_option("--catalog", catalog, "Class catalog JSONL")->required();
  ingest->add_option("--images", images, "Image registry JSONL")->required();
  ingest->add_option("--predictions", predictions, "Prediction JSONL files")->required();
  ingest->add_option("--reference", reference, "Multi-label reference JSONL");

  auto* select = app.add_subcommand("select-model", "Rank models and pick the proposal source");
  add_common(select);
  select->add_option("--reference", reference, "Multi-label reference JSONL");
  select->add_option("--model", model, "Use this model instead of the best one");
  select->add_flag("--count-empty-as-wrong", count_empty_as_wrong);

  auto* propose = app.add_subcommand("propose", "Generate label proposals");
  add_common(propose);
  propose->add_option("--k", k, "Proposals per image")->capture_default_str();

  auto* batches = app.add_subcommand("make-batches", "Split images into annotation batches");
  add_common(batches);
  batches->add_option("--roster", roster, "Annotator roster JSONL")->required();
  batches->add_option("--num-batches", num_batches)->capture_default_str();
  batches->add_option("--per-batch", per_batch, "Annotators per batch")->capture_default_str();
  batches->add_option("--seed", seed)->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  add_common(serve, false);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--admin-key", admin_key, "Enables admin login")->envname("RELABEL_ADMIN_KEY");

  auto* analyze = app.add_subcommand("analyze-agreement", "Close the initial stage and build the queue");
  add_common(analyze);

  auto* assign = app.add_subcommand("assign-refinement", "Slice the queue across experienced annotators");
  add_common(assign);
  assign->add_option("--experienced", experienced, "Annotator ids (default: all experienced)");

  auto* finalize = app.add_subcommand("finalize", "Write final label sets");
  add_common(finalize);

  auto* report = app.add_subcommand("report", "Compute reports");
  add_common(report);
  report->add_flag("--moe-as-written", moe_as_written, "Extra 1/sqrt(n) margin composition");
  report->add_flag("--count-empty-as-wrong", count_empty_as_wrong);

  auto* show = app.add_subcommand("show", "Print a report document");
  add_common(show, false);
  show->add_option("kind", show_kind, "Report kind")->required();
  show->add_option("--model", model, "Heatmap model filter");

  auto* fixture = app.add_subcommand("make-fixture", "Write a synthetic dataset");
  fixture->add_option("--out", fixture_dir, "Output directory")->required();
  fixture->add_option("--images", fx_images)->capture_default_str();
  fixture->add_option("--classes", fx_classes)->capture_default_str();
  fixture->add_option("--models", fx_models)->capture_default_str();
  fixture->add_option("--standard-annotators", fx_standard)->capture_default_str();
  fixture->add_option("--experienced-annotators", fx_experienced)->capture_default_str();
  fixture->add_option("--seed", seed)->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Submit synthetic annotations for a stage");
  add_common(simulate, false);
  simulate->add_option("--truth", truth, "Hidden label sets JSONL")->required();
  simulate->add_option("--stage", sim_stage)->required()->check(
      CLI::IsMember({"initial", "refinement", "triage"}));
  simulate->add_option("--error-rate", error_rate)->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  simulate->add_option("--seed", seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const auto opt = [](const std::string& v) { return v.empty() ? json() : json(v); };

  if (*ingest) {
    return RunStage(common.workspace,
                    {"ingest",
                     {{"catalog", catalog},
                      {"images", images},
                      {"predictions", predictions},
                      {"reference", opt(reference)}},
                     common.force});
  }
  if (*select) {
    return RunStage(common.workspace,
                    {"select-model",
                     {{"reference", opt(reference)},
                      {"model", opt(model)},
                      {"count_empty_as_wrong", count_empty_as_wrong}},
                     common.force});
  }
  if (*propose) return RunStage(common.workspace, {"propose", {{"k", k}}, common.force});
  if (*batches) {
    return RunStage(common.workspace,
                    {"make-batches",
                     {{"roster", roster},
                      {"num_batches", num_batches},
                      {"per_batch", per_batch},
                      {"seed", seed}},
                     common.force});
  }
  if (*analyze) {
    return RunStage(common.workspace,
                    {"analyze-agreement", json::object(), common.force});
  }
  if (*assign) {
    return RunStage(common.workspace,
                    {"assign-refinement", {{"experienced", experienced}}, common.force});
  }
  if (*finalize) {
    return RunStage(common.workspace, {"finalize", json::object(), common.force});
  }
  if (*report) {
    return RunStage(common.workspace,
                    {"report",
                     {{"moe_as_written", moe_as_written},
                      {"count_empty_as_wrong", count_empty_as_wrong}},
                     common.force});
  }

  rlb_workspace* ws = nullptr;
  if (*fixture) {
    const json options = {{"images", fx_images},
                          {"classes", fx_classes},
                          {"models", fx_models},
                          {"standard_annotators", fx_standard},
                          {"experienced_annotators", fx_experienced},
                          {"seed", seed}};
    char* result = nullptr;
    const int rc = Report(
        rlb_make_fixture(fixture_dir.c_str(), options.dump().c_str(), &result),
        "make-fixture");
    PrintResult(result);
    return rc;
  }
  if (int rc = Report(rlb_workspace_open(common.workspace.c_str(), &ws), "open workspace")) {
    return rc;
  }
  int rc = 0;
  if (*serve) {
    std::fprintf(stderr, "serving on %s:%d\n", host.c_str(), port);
    rc = Report(rlb_serve(ws, host.c_str(), port,
                          admin_key.empty() ? nullptr : admin_key.c_str()),
                "serve");
  } else if (*show) {
    char* document = nullptr;
    rc = Report(rlb_workspace_report(ws, show_kind.c_str(),
                                     model.empty() ? nullptr : model.c_str(), &document),
                "show");
    if (document) {
      std::fputs(document, stdout);
      rlb_string_free(document);
    }
  } else if (*simulate) {
    const json options = {{"truth", truth},
                          {"stage", sim_stage},
                          {"error_rate", error_rate},
                          {"seed", seed}};
    char* result = nullptr;
    rc = Report(rlb_workspace_simulate(ws, options.dump().c_str(), &result), "simulate");
    PrintResult(result);
  }
  rlb_workspace_close(ws);
  return rc;
}
