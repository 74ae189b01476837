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

#ifndef RELABEL_WORKSPACE_HPP_
#define RELABEL_WORKSPACE_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "relabel/catalog.hpp"
#include "relabel/io.hpp"
#include "relabel/metrics.hpp"
#include "relabel/workflow.hpp"

namespace relabel {

// Pipeline stages in the only order they may complete.
inline constexpr const char* kPipelineStages[] = {
    "ingest",          "select-model",      "propose",  "make-batches",
    "analyze-agreement", "assign-refinement", "finalize", "report",
};

struct IngestOptions {
  std::filesystem::path catalog;
  std::filesystem::path images;
  std::vector<std::filesystem::path> predictions;
  std::optional<std::filesystem::path> reference;
};

struct SelectOptions {
  std::optional<std::filesystem::path> reference;
  std::optional<std::string> model;  // operator override
  EmptySetPolicy empty_policy = EmptySetPolicy::kExclude;
};

struct BatchOptions {
  std::filesystem::path roster;
  std::size_t num_batches = 7;
  std::size_t per_batch = 2;
  std::uint64_t seed = 0;
};

struct ReportOptions {
  MarginMode margin_mode = MarginMode::kWald;
  EmptySetPolicy empty_policy = EmptySetPolicy::kExclude;
};

struct SimulateOptions {
  std::filesystem::path truth;
  std::string stage;  // initial, refinement or triage
  double error_rate = 0.1;
  std::uint64_t seed = 0;
};

// Annotator account as stored in the roster file.
struct RosterEntry {
  AnnotatorProfile profile;
  std::string secret;
};

std::vector<RosterEntry> LoadRoster(const std::filesystem::path& path);

struct ReportDocument {
  std::string content_type;
  std::string body;
};

// A directory holding one relabeling run: canonical inputs, the manifest,
// the event log and every derived artifact. Stage commands are gated on the
// manifest and serialized; the workflow is shared with the HTTP service.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  Json manifest() const;
  bool StageCompleted(const std::string& stage) const;

  Json Ingest(const IngestOptions& options, bool force = false);
  Json SelectModel(const SelectOptions& options, bool force = false);
  Json Propose(std::size_t k, bool force = false);
  Json MakeBatches(const BatchOptions& options, bool force = false);
  Json AnalyzeAgreement(bool force = false);
  // Empty `experienced` means every experienced annotator in roster order.
  Json AssignRefinement(const std::vector<std::string>& experienced,
                        bool force = false);
  Json Finalize(bool force = false);
  Json Report(const ReportOptions& options, bool force = false);

  // Drives the workflow with synthetic annotators; fixture use only.
  Json Simulate(const SimulateOptions& options);

  // Available once make-batches has run.
  std::shared_ptr<Workflow> workflow();
  const ClassCatalog& catalog();
  const ImageRegistry& registry();
  std::vector<RosterEntry> roster();

  // kind: label_distribution, leaderboard, regression, heatmap, plot,
  // triage, agreement, agreement_summary, selection.
  ReportDocument ReadReport(const std::string& kind,
                            const std::string& model = {});

 private:
  void BeginStage(const std::string& stage, bool force) const;
  void CompleteStage(const std::string& stage, const Json& details);
  void SaveManifest();
  void LoadStore();
  WorkflowSetup BuildSetup();
  std::filesystem::path Path(const std::string& relative) const;

  std::filesystem::path root_;
  mutable std::recursive_mutex mutex_;
  Json manifest_;
  std::optional<ClassCatalog> catalog_;
  std::optional<ImageRegistry> registry_;
  std::unique_ptr<PredictionStore> store_;
  std::shared_ptr<Workflow> workflow_;
};

}  // namespace relabel

#endif  // RELABEL_WORKSPACE_HPP_
