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

#ifndef RELABEL_WORKFLOW_HPP_
#define RELABEL_WORKFLOW_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "relabel/agreement.hpp"
#include "relabel/catalog.hpp"
#include "relabel/metrics.hpp"
#include "relabel/proposals.hpp"

namespace relabel {

enum class ExperienceTier { kStandard, kExperienced };

struct AnnotatorProfile {
  std::string annotator_id;
  ExperienceTier tier = ExperienceTier::kStandard;

  bool operator==(const AnnotatorProfile&) const = default;
};

struct Batch {
  int batch_id = 0;
  std::vector<std::string> image_ids;
  std::vector<std::string> assigned_annotators;

  bool operator==(const Batch&) const = default;
};

// Splits `image_ids` into `num_batches` contiguous chunks whose sizes differ
// by at most one (larger chunks first) and assigns `per_batch` distinct
// annotators to each, round-robin from an offset chosen by `seed`.
std::vector<Batch> CreateBatches(const std::vector<std::string>& image_ids,
                                 std::size_t num_batches,
                                 const std::vector<std::string>& annotators,
                                 std::size_t per_batch, std::uint64_t seed = 0);

struct RefinementSlice {
  std::string annotator_id;
  std::vector<std::string> image_ids;

  bool operator==(const RefinementSlice&) const = default;
};

// Splits the queue into near-equal contiguous slices, one per experienced
// annotator in the given order. Empty slices are omitted.
std::vector<RefinementSlice> AssignRefinement(
    const std::vector<std::string>& queue,
    const std::vector<std::string>& experienced);

enum class AnnotationStage { kInitial, kRefinement };

// Workflow phases, in the only order they may be entered.
enum class Phase { kInitial, kAnalysis, kRefinement, kFinal };

std::string_view ToString(ExperienceTier tier);
std::string_view ToString(AnnotationStage stage);
std::string_view ToString(Phase phase);
ExperienceTier ParseExperienceTier(std::string_view text);
AnnotationStage ParseAnnotationStage(std::string_view text);
Phase ParsePhase(std::string_view text);

struct AnnotationRecord {
  std::string annotator_id;
  std::string image_id;
  AnnotationStage stage = AnnotationStage::kInitial;
  LabelSet selected_labels;
  std::optional<std::string> comment;
  int revision = 0;
  std::int64_t submitted_at = 0;  // unix milliseconds

  bool operator==(const AnnotationRecord&) const = default;
};

struct PhaseTransition {
  Phase phase = Phase::kInitial;
  std::int64_t at = 0;
};

struct RefinementAssignment {
  std::vector<RefinementSlice> slices;
  std::int64_t at = 0;
};

struct TriageEvent {
  TriageRecord record;
  std::int64_t at = 0;
};

struct Event {
  std::uint64_t seq = 0;
  std::variant<PhaseTransition, AnnotationRecord, RefinementAssignment,
               TriageEvent>
      body;
};

std::string SerializeEvent(const Event& event);
Event ParseEvent(std::string_view line);
std::vector<Event> LoadEventLog(const std::filesystem::path& path);

// Durable destination for workflow events.
class EventSink {
 public:
  virtual ~EventSink() = default;
  // Must either persist the event or throw.
  virtual void Append(const Event& event) = 0;
};

class MemoryEventSink : public EventSink {
 public:
  void Append(const Event& event) override;
  std::vector<Event> events() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Event> events_;
};

// Appends one line per event and flushes before returning.
class FileEventSink : public EventSink {
 public:
  explicit FileEventSink(const std::filesystem::path& path);
  void Append(const Event& event) override;

 private:
  std::mutex mutex_;
  std::ofstream out_;
  std::filesystem::path path_;
};

struct WorkflowSetup {
  std::map<std::string, ClassId> originals;
  // Proposals shown during initial annotation, keyed by image_id.
  std::map<std::string, ProposalSet> proposals;
  std::vector<Batch> batches;
  std::vector<AnnotatorProfile> roster;
  // Number of ranked proposals shown ahead of any extra group at refinement.
  std::size_t display_k = kDefaultProposalCount;
};

struct SubmitResult {
  int revision = 0;
  bool duplicate = false;  // identical to the latest revision; nothing logged
};

struct RefinementPresentation {
  LabelSet prechecked;
  ProposalSet proposals;
};

struct Task {
  std::string image_id;
  enum class Kind { kInitial, kRefinement, kTriage } kind = Kind::kInitial;
  std::size_t done = 0;
  std::size_t total = 0;
};

struct Progress {
  std::size_t done = 0;
  std::size_t total = 0;
};

struct RefinerOverlap {
  std::string image_id;
  std::string annotator_id;
};

// Event-sourced state for batches, submissions, refinement and triage.
// Thread-safe. Every mutation is validated, appended to the sink and only
// then applied, all under one lock, so the log order is the apply order.
class Workflow {
 public:
  using Clock = std::function<std::int64_t()>;

  // Starts a new workflow and logs the initial phase.
  Workflow(WorkflowSetup setup, std::shared_ptr<EventSink> sink,
           Clock clock = {});
  // Rebuilds state from a previously written log; new events go to `sink`.
  static std::unique_ptr<Workflow> Replay(WorkflowSetup setup,
                                          const std::vector<Event>& events,
                                          std::shared_ptr<EventSink> sink,
                                          Clock clock = {});

  Workflow(const Workflow&) = delete;
  Workflow& operator=(const Workflow&) = delete;

  Phase phase() const;
  const WorkflowSetup& setup() const { return setup_; }
  std::uint64_t last_seq() const;

  SubmitResult Submit(const std::string& annotator_id,
                      const std::string& image_id, AnnotationStage stage,
                      LabelSet selected_labels,
                      std::optional<std::string> comment);

  // Moves to the next phase; `target` must be exactly one step ahead.
  void AdvancePhase(Phase target);

  // Available from the analysis phase onwards.
  std::vector<AgreementResult> AnalyzeAgreement() const;
  RefinementQueue BuildQueue() const;

  // Only during analysis. Every annotator must be experienced.
  std::vector<RefinementSlice> AssignRefinementSlices(
      const std::vector<std::string>& experienced);
  std::vector<RefinementSlice> refinement_slices() const;

  RefinementPresentation BuildRefinementPresentation(
      const std::string& image_id) const;

  MultiLabelGroundTruth FinalizeLabels(const std::string& image_id) const;
  // Final labels for every image; requires the final phase.
  std::vector<MultiLabelGroundTruth> FinalizeAll() const;

  void RecordTriage(const TriageRecord& record);
  std::vector<TriageRecord> triage_records() const;

  std::optional<AnnotationRecord> Latest(const std::string& annotator_id,
                                         const std::string& image_id,
                                         AnnotationStage stage) const;
  std::vector<AnnotationRecord> History(const std::string& annotator_id,
                                        const std::string& image_id,
                                        AnnotationStage stage) const;
  // Every annotation in log order.
  std::vector<AnnotationRecord> records() const;

  std::optional<Task> NextTask(const std::string& annotator_id) const;
  Progress ProgressFor(const std::string& annotator_id) const;

  const AnnotatorProfile* FindAnnotator(std::string_view annotator_id) const;
  std::vector<RefinerOverlap> RefinerOverlaps() const;

 private:
  using Key = std::tuple<std::string, std::string, AnnotationStage>;

  struct Private {};

 public:
  Workflow(Private, WorkflowSetup setup, std::shared_ptr<EventSink> sink,
           Clock clock);

 private:
  void Apply(const Event& event);
  void ValidateSubmission(const AnnotationRecord& record) const;
  void ValidateTransition(Phase target) const;
  void ValidateTriage(const TriageRecord& record) const;
  void ValidateAssignment(const std::vector<RefinementSlice>& slices) const;
  std::vector<AgreementResult> ComputeAgreementLocked() const;
  RefinementPresentation PresentationLocked(const std::string& image_id) const;
  MultiLabelGroundTruth FinalizeLocked(const std::string& image_id) const;
  std::vector<std::string> AssignedImagesLocked(const std::string& annotator_id,
                                                Phase phase) const;
  bool DoneLocked(const std::string& annotator_id,
                  const std::string& image_id, Phase phase) const;
  void Commit(Event event);

  WorkflowSetup setup_;
  std::shared_ptr<EventSink> sink_;
  Clock clock_;

  std::map<std::string, const Batch*> batch_of_image_;
  std::map<std::string, ExperienceTier> tiers_;

  // Guards the fields below.
  mutable std::mutex state_mutex_;
  std::uint64_t seq_ = 0;
  Phase phase_ = Phase::kInitial;
  std::map<Key, std::vector<AnnotationRecord>> history_;
  std::vector<AnnotationRecord> log_order_;
  std::vector<RefinementSlice> slices_;
  std::map<std::string, std::string> refiner_of_image_;
  std::vector<TriageRecord> triage_;
  // Cached when the analysis phase begins; initial records are frozen then.
  std::vector<AgreementResult> agreement_;
  std::map<std::string, const AgreementResult*> agreement_by_image_;
};

}  // namespace relabel

#endif  // RELABEL_WORKFLOW_HPP_
