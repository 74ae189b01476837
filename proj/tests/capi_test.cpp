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

// Exercises the shared library through its C header only.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "relabel/relabel.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::path(RELABEL_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json Take(char* text) {
  REQUIRE(text != nullptr);
  json parsed = json::parse(text);
  rlb_string_free(text);
  return parsed;
}

TEST_CASE("status names and version") {
  CHECK(std::string(rlb_version()) == "0.1.0");
  CHECK(std::string(rlb_status_name(RLB_OK)) == "ok");
  CHECK(std::string(rlb_status_name(RLB_STAGE_ORDER)) == "stage_order");
  CHECK(std::string(rlb_status_name(RLB_NOT_READY)) == "not_ready");
}

TEST_CASE("numeric helpers") {
  double hw = -1;
  int defined = -1;
  REQUIRE(rlb_margin_of_error(0.5, 100, 0, &hw, &defined) == RLB_OK);
  CHECK(defined == 1);
  CHECK(std::abs(hw - 0.098) < 1e-12);
  REQUIRE(rlb_margin_of_error(0.5, 100, 1, &hw, &defined) == RLB_OK);
  CHECK(std::abs(hw - 0.0098) < 1e-12);
  REQUIRE(rlb_margin_of_error(0.3, 1, 0, &hw, &defined) == RLB_OK);
  CHECK(defined == 0);
  CHECK(rlb_margin_of_error(-0.1, 10, 0, &hw, &defined) == RLB_INVALID_ARGUMENT);
  CHECK(std::strlen(rlb_last_error()) > 0);
  CHECK(rlb_margin_of_error(0.5, 10, 0, nullptr, &defined) == RLB_INVALID_ARGUMENT);

  const int32_t labels[] = {5, 9, 5};
  const size_t sizes[] = {2, 1};
  int agreed = -1;
  rlb_agreement_reason reason;
  REQUIRE(rlb_check_agreement(labels, sizes, 2, 5, &agreed, &reason) == RLB_OK);
  CHECK(agreed == 0);
  CHECK(reason == RLB_REASON_LABEL_SETS_DIFFER);
  const size_t same[] = {1, 1};
  const int32_t fives[] = {5, 5};
  REQUIRE(rlb_check_agreement(fives, same, 2, 5, &agreed, &reason) == RLB_OK);
  CHECK(agreed == 1);
  CHECK(reason == RLB_REASON_UNANIMOUS_WITH_ORIGINAL);
  const size_t empty[] = {0, 0};
  REQUIRE(rlb_check_agreement(nullptr, empty, 2, 5, &agreed, &reason) == RLB_OK);
  CHECK(reason == RLB_REASON_ORIGINAL_LABEL_MISSING);
  CHECK(rlb_check_agreement(nullptr, empty, 0, 5, &agreed, &reason) == RLB_INVALID_ARGUMENT);

  const double x[] = {0.6, 0.7, 0.8};
  double y[3];
  for (int i = 0; i < 3; ++i) y[i] = 0.5788 * x[i] + 0.3;
  double slope, intercept, r2;
  REQUIRE(rlb_ols(x, y, 3, &slope, &intercept, &r2) == RLB_OK);
  CHECK(std::abs(slope - 0.5788) < 1e-9);
  CHECK(std::abs(r2 - 1.0) < 1e-9);
  const double flat_x[] = {1, 1};
  CHECK(rlb_ols(flat_x, y, 2, &slope, &intercept, &r2) == RLB_DEGENERATE);
}

TEST_CASE("pipeline through the C API") {
  const fs::path base = TempDir("capi_pipeline");
  const std::string data = (base / "data").string();
  char* out = nullptr;
  REQUIRE(rlb_make_fixture(data.c_str(), R"({"images": 30, "seed": 5})", &out) == RLB_OK);
  CHECK(Take(out)["images"] == 30);

  rlb_workspace* ws = nullptr;
  REQUIRE(rlb_workspace_open((base / "ws").string().c_str(), &ws) == RLB_OK);

  CHECK(rlb_workspace_run(ws, "propose", nullptr, 0, nullptr) == RLB_STAGE_ORDER);
  CHECK(std::string(rlb_last_error()).find("select-model") != std::string::npos);
  CHECK(rlb_workspace_run(ws, "ingest", "{not json", 0, nullptr) == RLB_INVALID_ARGUMENT);
  CHECK(rlb_workspace_run(ws, "ingest", "[]", 0, nullptr) == RLB_INVALID_ARGUMENT);
  CHECK(rlb_workspace_run(ws, "teleport", nullptr, 0, nullptr) == RLB_INVALID_ARGUMENT);

  const json ingest = {{"catalog", data + "/catalog.jsonl"},
                       {"images", data + "/images.jsonl"},
                       {"predictions", {data + "/predictions.jsonl"}},
                       {"reference", data + "/reference.jsonl"}};
  REQUIRE(rlb_workspace_run(ws, "ingest", ingest.dump().c_str(), 0, &out) == RLB_OK);
  CHECK(Take(out)["images"] == 30);
  CHECK(rlb_workspace_run(ws, "ingest", ingest.dump().c_str(), 0, nullptr) == RLB_STAGE_ORDER);

  const json select = {{"reference", data + "/reference.jsonl"}};
  REQUIRE(rlb_workspace_run(ws, "select-model", select.dump().c_str(), 0, nullptr) == RLB_OK);
  REQUIRE(rlb_workspace_run(ws, "propose", R"({"k": 20})", 0, nullptr) == RLB_OK);
  const json batches = {{"roster", data + "/annotators.jsonl"}, {"num_batches", 3}};
  REQUIRE(rlb_workspace_run(ws, "make-batches", batches.dump().c_str(), 0, nullptr) == RLB_OK);

  rlb_server* server = nullptr;
  int port = 0;
  REQUIRE(rlb_server_start(ws, "127.0.0.1", 0, "k", &server, &port) == RLB_OK);
  CHECK(port > 0);
  {
    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/api/login", R"({"admin_key":"k"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
  }
  rlb_server_stop(server);

  const json truth = {{"truth", data + "/truth.jsonl"}, {"stage", "initial"}, {"seed", 2}};
  REQUIRE(rlb_workspace_simulate(ws, truth.dump().c_str(), &out) == RLB_OK);
  CHECK(Take(out)["submissions"] == 60);
  REQUIRE(rlb_workspace_run(ws, "analyze-agreement", nullptr, 0, nullptr) == RLB_OK);
  REQUIRE(rlb_workspace_run(ws, "assign-refinement", nullptr, 0, nullptr) == RLB_OK);
  json refine = truth;
  refine["stage"] = "refinement";
  REQUIRE(rlb_workspace_simulate(ws, refine.dump().c_str(), nullptr) == RLB_OK);
  REQUIRE(rlb_workspace_run(ws, "finalize", nullptr, 0, nullptr) == RLB_OK);

  char* doc = nullptr;
  CHECK(rlb_workspace_report(ws, "heatmap", nullptr, &doc) == RLB_NOT_READY);
  REQUIRE(rlb_workspace_run(ws, "report", R"({"moe_as_written": true})", 0, &out) == RLB_OK);
  Take(out);
  REQUIRE(rlb_workspace_report(ws, "label_distribution", nullptr, &doc) == RLB_OK);
  CHECK(Take(doc)["n_total"] == 30);
  REQUIRE(rlb_workspace_report(ws, "heatmap", "model_00", &doc) == RLB_OK);
  CHECK(std::string(doc).rfind("model_id,", 0) == 0);
  rlb_string_free(doc);
  CHECK(rlb_workspace_report(ws, "nope", nullptr, &doc) == RLB_NOT_FOUND);

  REQUIRE(rlb_workspace_manifest(ws, &out) == RLB_OK);
  const json manifest = Take(out);
  CHECK(manifest["config"]["moe_mode"] == "as_written");
  CHECK(manifest["stages"].size() == 8);
  rlb_workspace_close(ws);
}

}  // namespace
