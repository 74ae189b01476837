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

#include "relabel/workspace.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "relabel/agreement.hpp"
#include "relabel/error.hpp"
#include "relabel/fixture.hpp"
#include "relabel/proposals.hpp"
#include "relabel/reports.hpp"

namespace relabel {
namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kCatalog = "store/catalog.jsonl";
constexpr const char* kImages = "store/images.jsonl";
constexpr const char* kPredictions = "store/predictions.jsonl";
constexpr const char* kReference = "store/reference.jsonl";
constexpr const char* kRoster = "store/annotators.jsonl";
constexpr const char* kSelection = "selection/leaderboard.csv";
constexpr const char* kProposals = "proposals.jsonl";
constexpr const char* kEvents = "events.jsonl";
constexpr const char* kAgreementCsv = "agreement/agreement.csv";
constexpr const char* kAgreementSummary = "agreement/summary.json";
constexpr const char* kQueue = "agreement/queue.txt";
constexpr const char* kSlices = "refinement/slices.json";
constexpr const char* kOverlaps = "refinement/overlaps.csv";
constexpr const char* kFinalLabels = "final_labels.jsonl";

int StageIndex(const std::string& stage) {
  for (std::size_t i = 0; i < std::size(kPipelineStages); ++i) {
    if (stage == kPipelineStages[i]) return static_cast<int>(i);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + stage + "'", "stage");
}

template <typename Writer>
std::string Render(Writer&& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

std::string_view ToString(MarginMode mode) {
  return mode == MarginMode::kWald ? "wald" : "as_written";
}

std::uint64_t Mix(std::uint64_t seed, std::string_view a, std::string_view b) {
  return Fnv1a64(b, Fnv1a64(a, seed ^ 0x51ed270b2c4bb7a9ULL));
}

// Random edit of `labels` drawn from `pool`: drop one, or add one.
void Perturb(LabelSet& labels, const std::vector<ClassId>& pool, SplitMix64& rng) {
  if (!labels.empty() && rng.Uniform() < 0.5) {
    auto it = labels.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng.Below(labels.size())));
    labels.erase(it);
    return;
  }
  if (pool.empty()) return;
  const std::size_t window = std::min<std::size_t>(pool.size(), kProposalGroupSize);
  labels.insert(pool[rng.Below(window)]);
}

}  // namespace

std::vector<RosterEntry> LoadRoster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<RosterEntry> roster;
  std::set<std::string> seen;
  ForEachJsonLine(in, [&](std::size_t line, const Json& object) {
    RosterEntry entry;
    entry.profile.annotator_id = object.at("annotator_id").get<std::string>();
    if (entry.profile.annotator_id.empty() ||
        !seen.insert(entry.profile.annotator_id).second) {
      throw Error(ErrorCode::kDuplicate,
                  "line " + std::to_string(line) + ": empty or repeated annotator_id",
                  "annotator_id");
    }
    entry.profile.tier =
        ParseExperienceTier(object.value("experience_tier", std::string("standard")));
    entry.secret = object.value("secret", std::string());
    roster.push_back(std::move(entry));
  });
  if (roster.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "roster is empty", "roster");
  }
  return roster;
}

Workspace::Workspace(std::filesystem::path root) : root_(std::move(root)) {
  const auto manifest = Path(kManifest);
  if (std::filesystem::exists(manifest)) {
    try {
      manifest_ = Json::parse(ReadFile(manifest));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kParse, "corrupt manifest: " + std::string(e.what()));
    }
  } else {
    manifest_ = Json::object();
    manifest_["stages"] = Json::array();
  }
}

std::filesystem::path Workspace::Path(const std::string& relative) const {
  return root_ / relative;
}

Json Workspace::manifest() const {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  return manifest_;
}

bool Workspace::StageCompleted(const std::string& stage) const {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  for (const auto& entry : manifest_["stages"]) {
    if (entry.at("stage") == stage) return true;
  }
  return false;
}

void Workspace::BeginStage(const std::string& stage, bool force) const {
  const int index = StageIndex(stage);
  if (index > 0 && !StageCompleted(kPipelineStages[index - 1])) {
    throw Error(ErrorCode::kStageOrder,
                "'" + stage + "' requires '" + kPipelineStages[index - 1] +
                    "' to complete first",
                "stage");
  }
  if (StageCompleted(stage)) {
    if (!force) {
      throw Error(ErrorCode::kStageOrder,
                  "'" + stage + "' already completed; rerun with --force", "stage");
    }
    for (std::size_t later = static_cast<std::size_t>(index) + 1;
         later < std::size(kPipelineStages); ++later) {
      if (StageCompleted(kPipelineStages[later])) {
        throw Error(ErrorCode::kStageOrder,
                    "cannot rerun '" + stage + "': '" + kPipelineStages[later] +
                        "' already built on it",
                    "stage");
      }
    }
  }
}

void Workspace::CompleteStage(const std::string& stage, const Json& details) {
  Json& stages = manifest_["stages"];
  Json entry;
  entry["stage"] = stage;
  entry["completed_at"] = FormatTimestamp(NowMillis());
  entry["details"] = details;
  bool replaced = false;
  for (auto& existing : stages) {
    if (existing.at("stage") == stage) {
      existing = entry;
      replaced = true;
    }
  }
  if (!replaced) stages.push_back(entry);
  SaveManifest();
}

void Workspace::SaveManifest() {
  WriteFileAtomic(Path(kManifest), manifest_.dump(2) + "\n");
}

void Workspace::LoadStore() {
  if (catalog_) return;
  if (!StageCompleted("ingest")) {
    throw Error(ErrorCode::kStageOrder, "nothing ingested yet", "stage");
  }
  catalog_ = LoadCatalog(Path(kCatalog));
  registry_ = LoadRegistry(Path(kImages), *catalog_);
  store_ = std::make_unique<PredictionStore>();
  IngestPredictions(Path(kPredictions), *catalog_, *registry_, *store_);
}

const ClassCatalog& Workspace::catalog() {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  LoadStore();
  return *catalog_;
}

const ImageRegistry& Workspace::registry() {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  LoadStore();
  return *registry_;
}

std::vector<RosterEntry> Workspace::roster() {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  if (!std::filesystem::exists(Path(kRoster))) {
    throw Error(ErrorCode::kStageOrder, "no annotator roster yet", "stage");
  }
  return LoadRoster(Path(kRoster));
}

Json Workspace::Ingest(const IngestOptions& options, bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("ingest", force);
  if (options.predictions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "at least one predictions file is required",
                "predictions");
  }
  ClassCatalog catalog = LoadCatalog(options.catalog);
  ImageRegistry registry = LoadRegistry(options.images, catalog);
  auto store = std::make_unique<PredictionStore>();
  if (force && std::filesystem::exists(Path(kPredictions))) {
    if (!(LoadCatalog(Path(kCatalog)) == catalog) ||
        !(LoadRegistry(Path(kImages), catalog) == registry)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "re-ingest must keep the catalog and image registry unchanged");
    }
    IngestPredictions(Path(kPredictions), catalog, registry, *store);
  }

  Json result;
  Json files = Json::array();
  Json warnings = Json::array();
  std::uint64_t digest = Fnv1a64(ReadFile(options.catalog));
  digest = Fnv1a64(ReadFile(options.images), digest);
  for (const auto& path : options.predictions) {
    const IngestSummary summary = IngestPredictions(path, catalog, registry, *store);
    digest = Fnv1a64(ReadFile(path), digest);
    Json file;
    file["path"] = path.filename().string();
    file["added"] = summary.added;
    file["replaced"] = summary.replaced;
    file["unchanged"] = summary.unchanged;
    files.push_back(file);
    if (summary.replaced > 0) {
      warnings.push_back(path.filename().string() + ": replaced " +
                         std::to_string(summary.replaced) +
                         " existing (model_id, image_id) records");
    }
  }
  std::optional<std::vector<MultiLabelGroundTruth>> reference;
  if (options.reference) {
    reference = LoadGroundTruth(*options.reference, catalog, &registry);
    digest = Fnv1a64(ReadFile(*options.reference), digest);
  }

  WriteFileAtomic(Path(kCatalog), Render([&](std::ostream& o) { WriteCatalog(o, catalog); }));
  WriteFileAtomic(Path(kImages), Render([&](std::ostream& o) { WriteRegistry(o, registry); }));
  WriteFileAtomic(Path(kPredictions), Render([&](std::ostream& o) { WriteStore(o, *store); }));
  if (reference) {
    WriteFileAtomic(Path(kReference),
                    Render([&](std::ostream& o) { WriteGroundTruth(o, *reference); }));
  }
  catalog_ = std::move(catalog);
  registry_ = std::move(registry);
  store_ = std::move(store);

  if (!force || !manifest_.contains("run_id")) {
    manifest_["run_id"] = "run-" + HexDigest(digest);
  }
  result["classes"] = catalog_->size();
  result["images"] = registry_->size();
  result["models"] = store_->model_ids();
  result["prediction_records"] = store_->size();
  result["reference_images"] = reference ? Json(reference->size()) : Json(nullptr);
  result["files"] = files;
  result["warnings"] = warnings;
  CompleteStage("ingest", result);
  return result;
}

Json Workspace::SelectModel(const SelectOptions& options, bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("select-model", force);
  LoadStore();
  std::optional<std::vector<MultiLabelGroundTruth>> reference;
  if (options.reference) {
    reference = LoadGroundTruth(*options.reference, *catalog_, &*registry_);
    WriteFileAtomic(Path(kReference),
                    Render([&](std::ostream& o) { WriteGroundTruth(o, *reference); }));
  } else if (std::filesystem::exists(Path(kReference))) {
    reference = LoadGroundTruth(Path(kReference), *catalog_, &*registry_);
  }
  if (!reference && !options.model) {
    throw Error(ErrorCode::kInvalidArgument,
                "model selection needs a multi-label reference or an explicit model",
                "reference");
  }

  Json result;
  std::string selected;
  if (reference) {
    std::vector<ModelPredictions> candidates;
    for (const auto& model : store_->model_ids()) {
      candidates.push_back(CollectTop1(model, store_->ForModel(model)));
    }
    const ModelSelection selection =
        relabel::SelectModel(candidates, *reference, registry_->originals(),
                             options.empty_policy);
    WriteFileAtomic(Path(kSelection), Render([&](std::ostream& o) {
                      WriteLeaderboardCsv(o, selection.leaderboard);
                    }));
    selected = selection.winner.model_id;
    result["winner_real_accuracy"] = selection.winner.real_accuracy;
    result["winner_top1_accuracy"] = selection.winner.top1_accuracy;
    result["n_evaluated"] = selection.winner.n_evaluated;
  }
  if (options.model) {
    const auto models = store_->model_ids();
    if (std::find(models.begin(), models.end(), *options.model) == models.end()) {
      throw Error(ErrorCode::kNotFound, "unknown model '" + *options.model + "'",
                  "model");
    }
    selected = *options.model;
    result["override"] = true;
  }
  result["selected_model"] = selected;
  manifest_["selected_model"] = selected;
  manifest_["config"]["count_empty_as_wrong"] =
      options.empty_policy == EmptySetPolicy::kCountAsWrong;
  CompleteStage("select-model", result);
  return result;
}

Json Workspace::Propose(std::size_t k, bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("propose", force);
  LoadStore();
  const std::string model = manifest_.at("selected_model").get<std::string>();
  std::vector<ProposalSet> sets;
  for (const auto& image : registry_->images()) {
    auto prediction = store_->Find(model, image.image_id);
    if (!prediction) {
      throw Error(ErrorCode::kNotFound,
                  "model '" + model + "' has no prediction for '" + image.image_id + "'",
                  "image_id");
    }
    sets.push_back(GenerateProposals(*prediction, k));
  }
  WriteFileAtomic(Path(kProposals), Render([&](std::ostream& o) { WriteProposals(o, sets); }));
  manifest_["config"]["k"] = k;
  Json result;
  result["model"] = model;
  result["k"] = k;
  result["images"] = sets.size();
  CompleteStage("propose", result);
  return result;
}

WorkflowSetup Workspace::BuildSetup() {
  LoadStore();
  WorkflowSetup setup;
  setup.originals = registry_->originals();
  std::ifstream in(Path(kProposals));
  if (!in) throw Error(ErrorCode::kIo, "cannot open proposals");
  for (auto& set : ParseProposals(in, *catalog_)) {
    setup.proposals.emplace(set.image_id, std::move(set));
  }
  for (const auto& b : manifest_.at("batches")) {
    setup.batches.push_back({b.at("batch_id").get<int>(),
                             b.at("image_ids").get<std::vector<std::string>>(),
                             b.at("annotators").get<std::vector<std::string>>()});
  }
  for (const auto& entry : LoadRoster(Path(kRoster))) {
    setup.roster.push_back(entry.profile);
  }
  setup.display_k = manifest_.at("config").at("k").get<std::size_t>();
  return setup;
}

std::shared_ptr<Workflow> Workspace::workflow() {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  if (workflow_) return workflow_;
  if (!StageCompleted("make-batches")) {
    throw Error(ErrorCode::kStageOrder, "annotation has not started (run make-batches)",
                "stage");
  }
  auto events = LoadEventLog(Path(kEvents));
  workflow_ = Workflow::Replay(BuildSetup(), events,
                               std::make_shared<FileEventSink>(Path(kEvents)));
  return workflow_;
}

Json Workspace::MakeBatches(const BatchOptions& options, bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("make-batches", force);
  LoadStore();
  if (std::filesystem::exists(Path(kEvents))) {
    for (const auto& event : LoadEventLog(Path(kEvents))) {
      if (!std::holds_alternative<PhaseTransition>(event.body)) {
        throw Error(ErrorCode::kStageOrder,
                    "annotations already recorded; batches can no longer change",
                    "stage");
      }
    }
  }
  auto roster = LoadRoster(options.roster);
  std::ifstream roster_in(options.roster);
  std::vector<std::string> initial_pool;
  ForEachJsonLine(roster_in, [&](std::size_t, const Json& object) {
    if (object.value("initial", true)) {
      initial_pool.push_back(object.at("annotator_id").get<std::string>());
    }
  });
  const auto batches = CreateBatches(registry_->image_ids(), options.num_batches,
                                     initial_pool, options.per_batch, options.seed);

  WriteFileAtomic(Path(kRoster), ReadFile(options.roster));
  Json layout = Json::array();
  for (const auto& batch : batches) {
    Json b;
    b["batch_id"] = batch.batch_id;
    b["size"] = batch.image_ids.size();
    b["annotators"] = batch.assigned_annotators;
    b["image_ids"] = batch.image_ids;
    layout.push_back(b);
  }
  Json profiles = Json::array();
  for (const auto& entry : roster) {
    Json p;
    p["annotator_id"] = entry.profile.annotator_id;
    p["experience_tier"] = ToString(entry.profile.tier);
    profiles.push_back(p);
  }
  manifest_["batches"] = layout;
  manifest_["roster"] = profiles;
  manifest_["seed"] = options.seed;
  manifest_["config"]["num_batches"] = options.num_batches;
  manifest_["config"]["per_batch"] = options.per_batch;

  workflow_.reset();
  std::filesystem::remove(Path(kEvents));
  workflow_ = std::make_shared<Workflow>(BuildSetup(),
                                         std::make_shared<FileEventSink>(Path(kEvents)));
  Json result;
  result["batches"] = batches.size();
  Json sizes = Json::array();
  for (const auto& batch : batches) sizes.push_back(batch.image_ids.size());
  result["batch_sizes"] = sizes;
  result["seed"] = options.seed;
  result["annotators"] = roster.size();
  CompleteStage("make-batches", result);
  return result;
}

Json Workspace::AnalyzeAgreement(bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("analyze-agreement", force);
  auto flow = workflow();
  if (flow->phase() == Phase::kInitial) flow->AdvancePhase(Phase::kAnalysis);
  const auto results = flow->AnalyzeAgreement();
  const RefinementQueue queue = BuildRefinementQueue(results);
  WriteFileAtomic(Path(kAgreementCsv),
                  Render([&](std::ostream& o) { WriteAgreementCsv(o, results); }));
  WriteFileAtomic(Path(kAgreementSummary), AgreementSummaryJson(queue.summary));
  WriteFileAtomic(Path(kQueue), Render([&](std::ostream& o) {
                    for (const auto& id : queue.image_ids) o << id << '\n';
                  }));
  Json result;
  result["images"] = queue.summary.total;
  result["agreed"] = queue.summary.agreed;
  result["needs_refinement"] = queue.summary.needs_refinement;
  CompleteStage("analyze-agreement", result);
  return result;
}

Json Workspace::AssignRefinement(const std::vector<std::string>& experienced,
                                 bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("assign-refinement", force);
  auto flow = workflow();
  std::vector<std::string> pool = experienced;
  if (pool.empty()) {
    for (const auto& entry : LoadRoster(Path(kRoster))) {
      if (entry.profile.tier == ExperienceTier::kExperienced) {
        pool.push_back(entry.profile.annotator_id);
      }
    }
  }
  const auto slices = flow->AssignRefinementSlices(pool);
  flow->AdvancePhase(Phase::kRefinement);

  Json layout = Json::array();
  Json sizes = Json::object();
  for (const auto& slice : slices) {
    Json s;
    s["annotator_id"] = slice.annotator_id;
    s["size"] = slice.image_ids.size();
    s["image_ids"] = slice.image_ids;
    layout.push_back(s);
    sizes[slice.annotator_id] = slice.image_ids.size();
  }
  WriteFileAtomic(Path(kSlices), layout.dump(2) + "\n");
  const auto overlaps = flow->RefinerOverlaps();
  WriteFileAtomic(Path(kOverlaps), Render([&](std::ostream& o) {
                    o << "image_id,annotator_id\n";
                    for (const auto& overlap : overlaps) {
                      o << overlap.image_id << ',' << overlap.annotator_id << '\n';
                    }
                  }));
  Json result;
  result["slices"] = sizes;
  result["refiner_overlaps"] = overlaps.size();
  CompleteStage("assign-refinement", result);
  return result;
}

Json Workspace::Finalize(bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("finalize", force);
  auto flow = workflow();
  if (flow->phase() == Phase::kRefinement) flow->AdvancePhase(Phase::kFinal);
  const auto labels = flow->FinalizeAll();
  WriteFileAtomic(Path(kFinalLabels),
                  Render([&](std::ostream& o) { WriteGroundTruth(o, labels); }));
  Json result;
  result["images"] = labels.size();
  result["zero_label_images"] = std::count_if(
      labels.begin(), labels.end(), [](const auto& gt) { return gt.labels.empty(); });
  CompleteStage("finalize", result);
  return result;
}

Json Workspace::Report(const ReportOptions& options, bool force) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  BeginStage("report", force);
  LoadStore();
  auto flow = workflow();
  const auto labels = flow->FinalizeAll();
  const auto originals = registry_->originals();
  std::vector<ModelPredictions> models;
  for (const auto& model : store_->model_ids()) {
    models.push_back(CollectTop1(model, store_->ForModel(model)));
  }

  std::map<std::string, std::string> documents;
  documents["label_distribution.json"] =
      DistributionJson(ComputeLabelCountDistribution(labels));
  const ZooEvaluation zoo =
      EvaluateModelZoo(models, labels, originals, options.empty_policy);
  documents["leaderboard.csv"] =
      Render([&](std::ostream& o) { WriteZooLeaderboardCsv(o, zoo); });
  documents["plot.csv"] = Render([&](std::ostream& o) { WritePlotCsv(o, zoo); });
  documents["regression.json"] = RegressionJson(zoo);
  documents["heatmap.csv"] = Render([&](std::ostream& o) {
    bool header = true;
    for (const auto& model : models) {
      WriteHeatmapCsv(o, AccuracyByLabelCount(model, labels, originals,
                                              options.margin_mode),
                      header);
      header = false;
    }
  });
  const auto triage = flow->triage_records();
  if (!triage.empty()) documents["triage.json"] = TriageJson(SummarizeTriage(triage));

  std::uint64_t digest = Fnv1a64(ToString(options.margin_mode));
  for (const auto& [name, body] : documents) digest = Fnv1a64(name + body, digest);
  const std::string run_id = "report-" + HexDigest(digest);
  for (const auto& [name, body] : documents) {
    WriteFileAtomic(Path("reports/" + run_id + "/" + name), body);
  }
  manifest_["report_run_id"] = run_id;
  manifest_["config"]["moe_mode"] = ToString(options.margin_mode);
  manifest_["config"]["count_empty_as_wrong"] =
      options.empty_policy == EmptySetPolicy::kCountAsWrong;

  Json result;
  result["report_run_id"] = run_id;
  Json names = Json::array();
  for (const auto& [name, body] : documents) names.push_back(name);
  result["documents"] = names;
  result["models"] = zoo.leaderboard.size();
  if (zoo.regression) {
    result["slope"] = zoo.regression->slope;
    result["r_squared"] = zoo.regression->r_squared;
  }
  CompleteStage("report", result);
  return result;
}

ReportDocument Workspace::ReadReport(const std::string& kind, const std::string& model) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  static const std::map<std::string, std::string> kReportFiles = {
      {"label_distribution", "label_distribution.json"},
      {"leaderboard", "leaderboard.csv"},
      {"regression", "regression.json"},
      {"heatmap", "heatmap.csv"},
      {"plot", "plot.csv"},
      {"triage", "triage.json"},
  };
  const auto content_type = [](const std::string& file) {
    return file.ends_with(".json") ? std::string("application/json")
                                   : std::string("text/csv");
  };
  if (kind == "agreement" || kind == "agreement_summary") {
    if (!StageCompleted("analyze-agreement")) {
      throw Error(ErrorCode::kNotReady, "agreement analysis has not run", "kind");
    }
    const std::string file = kind == "agreement" ? kAgreementCsv : kAgreementSummary;
    return {content_type(file), ReadFile(Path(file))};
  }
  if (kind == "selection") {
    if (!std::filesystem::exists(Path(kSelection))) {
      throw Error(ErrorCode::kNotReady, "model selection has not run", "kind");
    }
    return {"text/csv", ReadFile(Path(kSelection))};
  }
  auto file = kReportFiles.find(kind);
  if (file == kReportFiles.end()) {
    throw Error(ErrorCode::kNotFound, "unknown report kind '" + kind + "'", "kind");
  }
  if (!StageCompleted("report") || !manifest_.contains("report_run_id")) {
    throw Error(ErrorCode::kNotReady, "reports have not been generated yet", "kind");
  }
  const auto path =
      Path("reports/" + manifest_["report_run_id"].get<std::string>() + "/" + file->second);
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kNotReady, "no '" + kind + "' report in this run", "kind");
  }
  std::string body = ReadFile(path);
  if (kind == "heatmap" && !model.empty()) {
    std::istringstream in(body);
    std::string line, filtered;
    std::getline(in, line);
    filtered = line + "\n";
    bool found = false;
    while (std::getline(in, line)) {
      if (line.rfind(model + ",", 0) == 0) {
        filtered += line + "\n";
        found = true;
      }
    }
    if (!found) {
      throw Error(ErrorCode::kNotFound, "no heatmap cells for model '" + model + "'",
                  "model");
    }
    body = std::move(filtered);
  }
  return {content_type(file->second), std::move(body)};
}

Json Workspace::Simulate(const SimulateOptions& options) {
  std::lock_guard<std::recursive_mutex> lock(mutex_);
  auto flow = workflow();
  const auto truth_list = LoadGroundTruth(options.truth, *catalog_, &*registry_);
  std::map<std::string, LabelSet> truth;
  for (const auto& gt : truth_list) truth[gt.image_id] = gt.labels;
  const auto truth_of = [&](const std::string& image) -> const LabelSet& {
    auto it = truth.find(image);
    if (it == truth.end()) {
      throw Error(ErrorCode::kNotFound, "truth file lacks image '" + image + "'",
                  "image_id");
    }
    return it->second;
  };
  const WorkflowSetup& setup = flow->setup();
  std::size_t submitted = 0;

  if (options.stage == "initial") {
    for (const auto& batch : setup.batches) {
      for (const auto& annotator : batch.assigned_annotators) {
        for (const auto& image : batch.image_ids) {
          SplitMix64 rng(Mix(options.seed, annotator, image));
          const ProposalSet& proposals = setup.proposals.at(image);
          LabelSet chosen;
          for (ClassId id : truth_of(image)) {
            if (proposals.Contains(id)) chosen.insert(id);
          }
          if (rng.Uniform() < options.error_rate) {
            Perturb(chosen, proposals.ranked_labels, rng);
          }
          flow->Submit(annotator, image, AnnotationStage::kInitial, chosen, std::nullopt);
          ++submitted;
        }
      }
    }
  } else if (options.stage == "refinement") {
    for (const auto& slice : flow->refinement_slices()) {
      for (const auto& image : slice.image_ids) {
        SplitMix64 rng(Mix(options.seed, slice.annotator_id, image));
        const auto presentation = flow->BuildRefinementPresentation(image);
        LabelSet chosen;
        for (ClassId id : truth_of(image)) {
          if (presentation.proposals.Contains(id)) chosen.insert(id);
        }
        if (rng.Uniform() < options.error_rate / 4.0) {
          Perturb(chosen, presentation.proposals.ranked_labels, rng);
        }
        std::optional<std::string> comment;
        if (chosen != presentation.prechecked) {
          comment = "reviewed against exemplars";
        }
        flow->Submit(slice.annotator_id, image, AnnotationStage::kRefinement, chosen,
                     comment);
        ++submitted;
      }
    }
  } else if (options.stage == "triage") {
    std::vector<std::string> reviewers;
    for (const auto& profile : setup.roster) {
      if (profile.tier == ExperienceTier::kExperienced && reviewers.size() < 2) {
        reviewers.push_back(profile.annotator_id);
      }
    }
    // Skewed toward fine-grained and uncertain outcomes.
    static constexpr std::size_t kCategoryWeights[] = {17, 8, 30, 23};
    static constexpr std::size_t kStanceWeights[] = {21, 15, 42};
    const auto pick = [](SplitMix64& rng, const auto& weights) {
      std::size_t total = 0;
      for (auto w : weights) total += w;
      std::size_t draw = rng.Below(total);
      std::size_t index = 0;
      for (auto w : weights) {
        if (draw < w) return index;
        draw -= w;
        ++index;
      }
      return index - 1;
    };
    for (const auto& gt : flow->FinalizeAll()) {
      if (!gt.labels.empty()) continue;
      for (const auto& reviewer : reviewers) {
        SplitMix64 rng(Mix(options.seed, reviewer, gt.image_id));
        TriageRecord record;
        record.image_id = gt.image_id;
        record.annotator_id = reviewer;
        record.quality_category = kAllQualityCategories[pick(rng, kCategoryWeights)];
        record.gt_stance = kAllStances[pick(rng, kStanceWeights)];
        flow->RecordTriage(record);
        ++submitted;
      }
    }
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "simulate stage must be initial, refinement or triage", "stage");
  }
  Json result;
  result["stage"] = options.stage;
  result["submissions"] = submitted;
  return result;
}

}  // namespace relabel
