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

#include "relabel/workflow.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <set>

#include "relabel/error.hpp"
#include "relabel/io.hpp"

namespace relabel {
namespace {

bool IsBlank(const std::optional<std::string>& text) {
  return !text || text->find_first_not_of(" \t\r\n") == std::string::npos;
}

std::int64_t ParseTimestamp(const std::string& text) {
  int year, month, day, hour, minute, second, millis = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d.%dZ", &year, &month, &day,
                  &hour, &minute, &second, &millis) < 6) {
    throw Error(ErrorCode::kParse, "bad timestamp '" + text + "'");
  }
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  return static_cast<std::int64_t>(timegm(&tm)) * 1000 + millis;
}

Json LabelsJson(const LabelSet& labels) {
  return Json(std::vector<ClassId>(labels.begin(), labels.end()));
}

}  // namespace

std::vector<Batch> CreateBatches(const std::vector<std::string>& image_ids,
                                 std::size_t num_batches,
                                 const std::vector<std::string>& annotators,
                                 std::size_t per_batch, std::uint64_t seed) {
  if (num_batches == 0) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one batch",
                "num_batches");
  }
  if (per_batch == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "need at least one annotator per batch", "per_batch");
  }
  std::vector<std::string> distinct;
  for (const auto& id : annotators) {
    if (std::find(distinct.begin(), distinct.end(), id) == distinct.end()) {
      distinct.push_back(id);
    }
  }
  if (distinct.size() < per_batch) {
    throw Error(ErrorCode::kInvalidArgument,
                std::to_string(distinct.size()) +
                    " distinct annotators cannot staff batches of " +
                    std::to_string(per_batch),
                "per_batch");
  }
  const std::size_t n = image_ids.size();
  const std::size_t base = n / num_batches;
  const std::size_t larger = n % num_batches;
  const std::size_t offset = static_cast<std::size_t>(seed % distinct.size());

  std::vector<Batch> batches;
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < num_batches; ++b) {
    Batch batch;
    batch.batch_id = static_cast<int>(b);
    const std::size_t size = base + (b < larger ? 1 : 0);
    batch.image_ids.assign(
        image_ids.begin() + static_cast<std::ptrdiff_t>(cursor),
        image_ids.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
    for (std::size_t j = 0; j < per_batch; ++j) {
      batch.assigned_annotators.push_back(
          distinct[(offset + b * per_batch + j) % distinct.size()]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<RefinementSlice> AssignRefinement(
    const std::vector<std::string>& queue,
    const std::vector<std::string>& experienced) {
  if (experienced.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "refinement needs at least one experienced annotator",
                "experienced");
  }
  std::set<std::string> unique(experienced.begin(), experienced.end());
  if (unique.size() != experienced.size()) {
    throw Error(ErrorCode::kDuplicate, "experienced annotators repeat",
                "experienced");
  }
  const std::size_t m = experienced.size();
  const std::size_t base = queue.size() / m;
  const std::size_t larger = queue.size() % m;
  std::vector<RefinementSlice> slices;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t size = base + (i < larger ? 1 : 0);
    if (size == 0) continue;
    RefinementSlice slice;
    slice.annotator_id = experienced[i];
    slice.image_ids.assign(
        queue.begin() + static_cast<std::ptrdiff_t>(cursor),
        queue.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
    slices.push_back(std::move(slice));
  }
  return slices;
}

std::string_view ToString(ExperienceTier tier) {
  return tier == ExperienceTier::kExperienced ? "experienced" : "standard";
}

std::string_view ToString(AnnotationStage stage) {
  return stage == AnnotationStage::kInitial ? "initial" : "refinement";
}

std::string_view ToString(Phase phase) {
  switch (phase) {
    case Phase::kInitial: return "initial";
    case Phase::kAnalysis: return "analysis";
    case Phase::kRefinement: return "refinement";
    case Phase::kFinal: return "final";
  }
  return "unknown";
}

ExperienceTier ParseExperienceTier(std::string_view text) {
  if (text == "standard") return ExperienceTier::kStandard;
  if (text == "experienced") return ExperienceTier::kExperienced;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown experience tier '" + std::string(text) + "'",
              "experience_tier");
}

AnnotationStage ParseAnnotationStage(std::string_view text) {
  if (text == "initial") return AnnotationStage::kInitial;
  if (text == "refinement") return AnnotationStage::kRefinement;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown stage '" + std::string(text) + "'", "stage");
}

Phase ParsePhase(std::string_view text) {
  for (Phase p : {Phase::kInitial, Phase::kAnalysis, Phase::kRefinement,
                  Phase::kFinal}) {
    if (ToString(p) == text) return p;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown stage '" + std::string(text) + "'", "stage");
}

std::string SerializeEvent(const Event& event) {
  OrderedJson line;
  line["seq"] = event.seq;
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, PhaseTransition>) {
          line["type"] = "stage";
          line["stage"] = ToString(body.phase);
          line["at"] = FormatTimestamp(body.at);
        } else if constexpr (std::is_same_v<T, AnnotationRecord>) {
          line["type"] = "annotation";
          line["annotator_id"] = body.annotator_id;
          line["image_id"] = body.image_id;
          line["stage"] = ToString(body.stage);
          line["labels"] = LabelsJson(body.selected_labels);
          line["comment"] = body.comment ? Json(*body.comment) : Json(nullptr);
          line["revision"] = body.revision;
          line["submitted_at"] = FormatTimestamp(body.submitted_at);
        } else if constexpr (std::is_same_v<T, RefinementAssignment>) {
          line["type"] = "refinement_assignment";
          OrderedJson slices = OrderedJson::array();
          for (const auto& slice : body.slices) {
            OrderedJson s;
            s["annotator_id"] = slice.annotator_id;
            s["image_ids"] = slice.image_ids;
            slices.push_back(s);
          }
          line["slices"] = slices;
          line["at"] = FormatTimestamp(body.at);
        } else {
          line["type"] = "triage";
          line["image_id"] = body.record.image_id;
          line["annotator_id"] = body.record.annotator_id;
          line["quality_category"] = ToString(body.record.quality_category);
          line["gt_stance"] = ToString(body.record.gt_stance);
          line["at"] = FormatTimestamp(body.at);
        }
      },
      event.body);
  return line.dump();
}

Event ParseEvent(std::string_view text) {
  Json line;
  try {
    line = Json::parse(text);
    Event event;
    event.seq = line.at("seq").get<std::uint64_t>();
    const std::string type = line.at("type").get<std::string>();
    if (type == "stage") {
      event.body = PhaseTransition{ParsePhase(line.at("stage").get<std::string>()),
                                   ParseTimestamp(line.at("at").get<std::string>())};
    } else if (type == "annotation") {
      AnnotationRecord record;
      record.annotator_id = line.at("annotator_id").get<std::string>();
      record.image_id = line.at("image_id").get<std::string>();
      record.stage = ParseAnnotationStage(line.at("stage").get<std::string>());
      for (const auto& id : line.at("labels")) {
        record.selected_labels.insert(id.get<ClassId>());
      }
      if (auto c = line.find("comment"); c != line.end() && !c->is_null()) {
        record.comment = c->get<std::string>();
      }
      record.revision = line.at("revision").get<int>();
      record.submitted_at =
          ParseTimestamp(line.at("submitted_at").get<std::string>());
      event.body = std::move(record);
    } else if (type == "refinement_assignment") {
      RefinementAssignment assignment;
      for (const auto& s : line.at("slices")) {
        assignment.slices.push_back(
            {s.at("annotator_id").get<std::string>(),
             s.at("image_ids").get<std::vector<std::string>>()});
      }
      assignment.at = ParseTimestamp(line.at("at").get<std::string>());
      event.body = std::move(assignment);
    } else if (type == "triage") {
      TriageEvent triage;
      triage.record.image_id = line.at("image_id").get<std::string>();
      triage.record.annotator_id = line.at("annotator_id").get<std::string>();
      triage.record.quality_category =
          ParseQualityCategory(line.at("quality_category").get<std::string>());
      triage.record.gt_stance =
          ParseGroundTruthStance(line.at("gt_stance").get<std::string>());
      triage.at = ParseTimestamp(line.at("at").get<std::string>());
      event.body = std::move(triage);
    } else {
      throw Error(ErrorCode::kParse, "unknown event type '" + type + "'");
    }
    return event;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad event: ") + e.what());
  }
}

std::vector<Event> LoadEventLog(const std::filesystem::path& path) {
  std::vector<Event> events;
  if (!std::filesystem::exists(path)) return events;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(ParseEvent(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, path.string() + " line " +
                                         std::to_string(number) + ": " +
                                         e.what());
    }
    if (events.size() > 1 && events.back().seq <= events[events.size() - 2].seq) {
      throw Error(ErrorCode::kParse, path.string() + " line " +
                                         std::to_string(number) +
                                         ": sequence numbers must increase");
    }
  }
  return events;
}

void MemoryEventSink::Append(const Event& event) {
  std::lock_guard<std::mutex> lock(mutex_);
  events_.push_back(event);
}

std::vector<Event> MemoryEventSink::events() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_;
}

std::size_t MemoryEventSink::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_.size();
}

FileEventSink::FileEventSink(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorCode::kIo, "cannot open event log " + path.string());
}

void FileEventSink::Append(const Event& event) {
  std::lock_guard<std::mutex> lock(mutex_);
  const std::string line = SerializeEvent(event) + "\n";
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIo, "write to " + path_.string() + " failed");
}

Workflow::Workflow(Private, WorkflowSetup setup,
                   std::shared_ptr<EventSink> sink, Clock clock)
    : setup_(std::move(setup)),
      sink_(std::move(sink)),
      clock_(clock ? std::move(clock) : Clock(&NowMillis)) {
  if (!sink_) throw Error(ErrorCode::kInvalidArgument, "workflow needs an event sink");
  for (const auto& profile : setup_.roster) {
    if (!tiers_.emplace(profile.annotator_id, profile.tier).second) {
      throw Error(ErrorCode::kDuplicate,
                  "duplicate annotator '" + profile.annotator_id + "'",
                  "annotator_id");
    }
  }
  for (const auto& batch : setup_.batches) {
    for (const auto& annotator : batch.assigned_annotators) {
      if (!tiers_.count(annotator)) {
        throw Error(ErrorCode::kNotFound,
                    "batch " + std::to_string(batch.batch_id) +
                        " names unknown annotator '" + annotator + "'",
                    "annotator_id");
      }
    }
    for (const auto& image : batch.image_ids) {
      if (!setup_.originals.count(image)) {
        throw Error(ErrorCode::kNotFound, "batched image '" + image + "' is not registered",
                    "image_id");
      }
      if (!setup_.proposals.count(image)) {
        throw Error(ErrorCode::kNotFound, "image '" + image + "' has no proposals",
                    "image_id");
      }
      if (!batch_of_image_.emplace(image, &batch).second) {
        throw Error(ErrorCode::kDuplicate,
                    "image '" + image + "' appears in two batches", "image_id");
      }
    }
  }
  if (batch_of_image_.size() != setup_.originals.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "batches do not cover every registered image", "batches");
  }
}

Workflow::Workflow(WorkflowSetup setup, std::shared_ptr<EventSink> sink,
                   Clock clock)
    : Workflow(Private{}, std::move(setup), std::move(sink), std::move(clock)) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  Commit(Event{0, PhaseTransition{Phase::kInitial, clock_()}});
}

std::unique_ptr<Workflow> Workflow::Replay(WorkflowSetup setup,
                                           const std::vector<Event>& events,
                                           std::shared_ptr<EventSink> sink,
                                           Clock clock) {
  auto workflow = std::make_unique<Workflow>(Private{}, std::move(setup),
                                             std::move(sink), std::move(clock));
  std::lock_guard<std::mutex> lock(workflow->state_mutex_);
  bool first = true;
  for (const auto& event : events) {
    if (event.seq <= workflow->seq_ && !first) {
      throw Error(ErrorCode::kParse, "event sequence numbers must increase");
    }
    if (first) {
      const auto* start = std::get_if<PhaseTransition>(&event.body);
      if (!start || start->phase != Phase::kInitial) {
        throw Error(ErrorCode::kParse, "event log must open with the initial stage");
      }
      first = false;
    } else {
      std::visit(
          [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, PhaseTransition>) {
              workflow->ValidateTransition(body.phase);
            } else if constexpr (std::is_same_v<T, AnnotationRecord>) {
              workflow->ValidateSubmission(body);
              const auto it = workflow->history_.find(
                  Key{body.annotator_id, body.image_id, body.stage});
              const int expected =
                  it == workflow->history_.end() ? 1 : static_cast<int>(it->second.size()) + 1;
              if (body.revision != expected) {
                throw Error(ErrorCode::kParse,
                            "event " + std::to_string(event.seq) +
                                ": revision gap for " + body.annotator_id + "/" +
                                body.image_id);
              }
            } else if constexpr (std::is_same_v<T, RefinementAssignment>) {
              workflow->ValidateAssignment(body.slices);
            } else {
              workflow->ValidateTriage(body.record);
            }
          },
          event.body);
    }
    workflow->Apply(event);
  }
  if (first) {
    throw Error(ErrorCode::kParse, "event log is empty");
  }
  return workflow;
}

Phase Workflow::phase() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return phase_;
}

std::uint64_t Workflow::last_seq() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return seq_;
}

void Workflow::Commit(Event event) {
  event.seq = seq_ + 1;
  sink_->Append(event);
  Apply(event);
}

void Workflow::Apply(const Event& event) {
  seq_ = event.seq;
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, PhaseTransition>) {
          phase_ = body.phase;
          if (phase_ == Phase::kAnalysis) {
            agreement_ = ComputeAgreementLocked();
            agreement_by_image_.clear();
            for (const auto& r : agreement_) agreement_by_image_[r.image_id] = &r;
          }
        } else if constexpr (std::is_same_v<T, AnnotationRecord>) {
          history_[Key{body.annotator_id, body.image_id, body.stage}].push_back(body);
          log_order_.push_back(body);
        } else if constexpr (std::is_same_v<T, RefinementAssignment>) {
          slices_ = body.slices;
          refiner_of_image_.clear();
          for (const auto& slice : slices_) {
            for (const auto& image : slice.image_ids) {
              refiner_of_image_[image] = slice.annotator_id;
            }
          }
        } else {
          triage_.push_back(body.record);
        }
      },
      event.body);
}

const AnnotatorProfile* Workflow::FindAnnotator(
    std::string_view annotator_id) const {
  for (const auto& profile : setup_.roster) {
    if (profile.annotator_id == annotator_id) return &profile;
  }
  return nullptr;
}

void Workflow::ValidateSubmission(const AnnotationRecord& record) const {
  auto tier = tiers_.find(record.annotator_id);
  if (tier == tiers_.end()) {
    throw Error(ErrorCode::kForbidden,
                "unknown annotator '" + record.annotator_id + "'", "annotator_id");
  }
  auto batch = batch_of_image_.find(record.image_id);
  if (batch == batch_of_image_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown image '" + record.image_id + "'",
                "image_id");
  }
  if (record.stage == AnnotationStage::kInitial) {
    if (phase_ != Phase::kInitial) {
      throw Error(ErrorCode::kStageOrder,
                  "initial annotation is closed (stage is " +
                      std::string(ToString(phase_)) + ")",
                  "stage");
    }
    const auto& assigned = batch->second->assigned_annotators;
    if (std::find(assigned.begin(), assigned.end(), record.annotator_id) ==
        assigned.end()) {
      throw Error(ErrorCode::kForbidden,
                  "annotator '" + record.annotator_id +
                      "' is not assigned to the batch of '" + record.image_id + "'",
                  "annotator_id");
    }
    const ProposalSet& proposals = setup_.proposals.at(record.image_id);
    for (ClassId id : record.selected_labels) {
      if (!proposals.Contains(id)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "label " + std::to_string(id) + " is not proposed for '" +
                        record.image_id + "'",
                    "labels");
      }
    }
    return;
  }

  if (phase_ != Phase::kRefinement) {
    throw Error(ErrorCode::kStageOrder,
                "refinement is not open (stage is " +
                    std::string(ToString(phase_)) + ")",
                "stage");
  }
  auto refiner = refiner_of_image_.find(record.image_id);
  if (refiner == refiner_of_image_.end()) {
    throw Error(ErrorCode::kStageOrder,
                "image '" + record.image_id + "' is not queued for refinement",
                "stage");
  }
  if (refiner->second != record.annotator_id) {
    throw Error(ErrorCode::kForbidden,
                "annotator '" + record.annotator_id +
                    "' does not hold the refinement slice for '" +
                    record.image_id + "'",
                "annotator_id");
  }
  const RefinementPresentation presentation = PresentationLocked(record.image_id);
  for (ClassId id : record.selected_labels) {
    if (!presentation.proposals.Contains(id)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(id) + " is not presented for '" +
                      record.image_id + "'",
                  "labels");
    }
  }
  if (record.selected_labels != presentation.prechecked && IsBlank(record.comment)) {
    throw Error(ErrorCode::kInvalidArgument,
                "a comment is required when refinement changes the pre-checked labels",
                "comment");
  }
}

SubmitResult Workflow::Submit(const std::string& annotator_id,
                              const std::string& image_id,
                              AnnotationStage stage, LabelSet selected_labels,
                              std::optional<std::string> comment) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  AnnotationRecord record;
  record.annotator_id = annotator_id;
  record.image_id = image_id;
  record.stage = stage;
  record.selected_labels = std::move(selected_labels);
  record.comment = std::move(comment);
  ValidateSubmission(record);

  auto& versions = history_[Key{annotator_id, image_id, stage}];
  if (!versions.empty() &&
      versions.back().selected_labels == record.selected_labels &&
      versions.back().comment == record.comment) {
    return {versions.back().revision, true};
  }
  record.revision = static_cast<int>(versions.size()) + 1;
  record.submitted_at = clock_();
  const int revision = record.revision;
  Commit(Event{0, std::move(record)});
  return {revision, false};
}

void Workflow::ValidateTransition(Phase target) const {
  if (static_cast<int>(target) != static_cast<int>(phase_) + 1) {
    throw Error(ErrorCode::kStageOrder,
                "cannot move from " + std::string(ToString(phase_)) + " to " +
                    std::string(ToString(target)),
                "stage");
  }
  if (target == Phase::kRefinement) {
    std::size_t queued = 0;
    for (const auto& r : agreement_) {
      if (r.agreed()) continue;
      ++queued;
      if (!refiner_of_image_.count(r.image_id)) {
        throw Error(ErrorCode::kNotReady,
                    "queued image '" + r.image_id + "' has no refiner; assign refinement first",
                    "stage");
      }
    }
    if (queued != refiner_of_image_.size()) {
      throw Error(ErrorCode::kNotReady, "refinement assignment does not match the queue",
                  "stage");
    }
  }
  if (target == Phase::kFinal) {
    std::size_t missing = 0;
    for (const auto& [image, refiner] : refiner_of_image_) {
      if (!history_.count(Key{refiner, image, AnnotationStage::kRefinement})) ++missing;
    }
    if (missing > 0) {
      throw Error(ErrorCode::kNotReady,
                  std::to_string(missing) + " queued images are not refined yet",
                  "stage");
    }
  }
}

void Workflow::AdvancePhase(Phase target) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  ValidateTransition(target);
  Commit(Event{0, PhaseTransition{target, clock_()}});
}

std::vector<AgreementResult> Workflow::ComputeAgreementLocked() const {
  std::vector<AgreementResult> results;
  results.reserve(setup_.originals.size());
  for (const auto& [image, original] : setup_.originals) {
    const Batch* batch = batch_of_image_.at(image);
    std::vector<std::optional<LabelSet>> sets;
    for (const auto& annotator : batch->assigned_annotators) {
      auto it = history_.find(Key{annotator, image, AnnotationStage::kInitial});
      if (it == history_.end() || it->second.empty()) {
        sets.emplace_back();
      } else {
        sets.emplace_back(it->second.back().selected_labels);
      }
    }
    results.push_back(CheckAgreement(image, sets, original));
  }
  return results;
}

std::vector<AgreementResult> Workflow::AnalyzeAgreement() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (phase_ == Phase::kInitial) {
    throw Error(ErrorCode::kNotReady,
                "agreement analysis runs after initial annotation closes", "stage");
  }
  return agreement_;
}

RefinementQueue Workflow::BuildQueue() const {
  const auto results = AnalyzeAgreement();
  return BuildRefinementQueue(results);
}

void Workflow::ValidateAssignment(const std::vector<RefinementSlice>& slices) const {
  if (phase_ != Phase::kAnalysis) {
    throw Error(ErrorCode::kStageOrder,
                "refinement is assigned during analysis only", "stage");
  }
  std::set<std::string> covered;
  for (const auto& slice : slices) {
    auto tier = tiers_.find(slice.annotator_id);
    if (tier == tiers_.end()) {
      throw Error(ErrorCode::kNotFound,
                  "unknown annotator '" + slice.annotator_id + "'", "annotator_id");
    }
    if (tier->second != ExperienceTier::kExperienced) {
      throw Error(ErrorCode::kForbidden,
                  "annotator '" + slice.annotator_id + "' is not experienced",
                  "annotator_id");
    }
    for (const auto& image : slice.image_ids) {
      auto result = agreement_by_image_.find(image);
      if (result == agreement_by_image_.end() || result->second->agreed()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "image '" + image + "' is not in the refinement queue", "image_id");
      }
      if (!covered.insert(image).second) {
        throw Error(ErrorCode::kDuplicate,
                    "image '" + image + "' assigned twice", "image_id");
      }
    }
  }
  const std::size_t queued = static_cast<std::size_t>(
      std::count_if(agreement_.begin(), agreement_.end(),
                    [](const AgreementResult& r) { return !r.agreed(); }));
  if (covered.size() != queued) {
    throw Error(ErrorCode::kInvalidArgument,
                "refinement slices must cover the whole queue", "slices");
  }
}

std::vector<RefinementSlice> Workflow::AssignRefinementSlices(
    const std::vector<std::string>& experienced) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (phase_ != Phase::kAnalysis) {
    throw Error(ErrorCode::kStageOrder,
                "refinement is assigned during analysis only", "stage");
  }
  std::vector<std::string> queue;
  for (const auto& r : agreement_) {
    if (!r.agreed()) queue.push_back(r.image_id);
  }
  auto slices = AssignRefinement(queue, experienced);
  // An empty queue still needs the experienced roster to be valid.
  for (const auto& id : experienced) {
    auto tier = tiers_.find(id);
    if (tier == tiers_.end() || tier->second != ExperienceTier::kExperienced) {
      throw Error(ErrorCode::kForbidden,
                  "annotator '" + id + "' is not an experienced annotator",
                  "annotator_id");
    }
  }
  ValidateAssignment(slices);
  Commit(Event{0, RefinementAssignment{slices, clock_()}});
  return slices;
}

std::vector<RefinementSlice> Workflow::refinement_slices() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return slices_;
}

RefinementPresentation Workflow::PresentationLocked(
    const std::string& image_id) const {
  auto result = agreement_by_image_.find(image_id);
  if (phase_ == Phase::kInitial || result == agreement_by_image_.end()) {
    throw Error(ErrorCode::kNotReady,
                "image '" + image_id + "' has not been analysed yet", "image_id");
  }
  if (result->second->agreed()) {
    throw Error(ErrorCode::kInvalidArgument,
                "image '" + image_id + "' is not queued for refinement", "image_id");
  }
  RefinementPresentation presentation;
  for (const auto& annotator : batch_of_image_.at(image_id)->assigned_annotators) {
    auto it = history_.find(Key{annotator, image_id, AnnotationStage::kInitial});
    if (it != history_.end() && !it->second.empty()) {
      const auto& labels = it->second.back().selected_labels;
      presentation.prechecked.insert(labels.begin(), labels.end());
    }
  }
  const ProposalSet& stored = setup_.proposals.at(image_id);
  ProposalSet& shown = presentation.proposals;
  shown.image_id = image_id;
  const std::size_t head = std::min(setup_.display_k, stored.ranked_labels.size());
  shown.ranked_labels.assign(stored.ranked_labels.begin(),
                             stored.ranked_labels.begin() + static_cast<std::ptrdiff_t>(head));
  shown.groups = PartitionIntoGroups(shown.ranked_labels);

  // Human selections ranked below the display cut, in model rank order.
  std::vector<ClassId> extras;
  for (ClassId id : stored.ranked_labels) {
    if (presentation.prechecked.count(id) && !shown.Contains(id)) extras.push_back(id);
  }
  for (ClassId id : presentation.prechecked) {
    if (!shown.Contains(id) &&
        std::find(extras.begin(), extras.end(), id) == extras.end()) {
      extras.push_back(id);
    }
  }
  for (auto& group : PartitionIntoGroups(extras)) {
    shown.groups.push_back(std::move(group));
  }
  shown.ranked_labels.insert(shown.ranked_labels.end(), extras.begin(), extras.end());
  return presentation;
}

RefinementPresentation Workflow::BuildRefinementPresentation(
    const std::string& image_id) const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return PresentationLocked(image_id);
}

MultiLabelGroundTruth Workflow::FinalizeLocked(const std::string& image_id) const {
  if (!setup_.originals.count(image_id)) {
    throw Error(ErrorCode::kNotFound, "unknown image '" + image_id + "'", "image_id");
  }
  auto result = agreement_by_image_.find(image_id);
  if (phase_ == Phase::kInitial || result == agreement_by_image_.end()) {
    throw Error(ErrorCode::kNotReady,
                "image '" + image_id + "' has not been analysed yet", "image_id");
  }
  if (result->second->agreed()) {
    return {image_id, result->second->annotator_sets.front()};
  }
  auto refiner = refiner_of_image_.find(image_id);
  if (refiner == refiner_of_image_.end()) {
    throw Error(ErrorCode::kNotReady,
                "image '" + image_id + "' awaits a refinement assignment", "image_id");
  }
  auto it = history_.find(Key{refiner->second, image_id, AnnotationStage::kRefinement});
  if (it == history_.end() || it->second.empty()) {
    throw Error(ErrorCode::kNotReady, "image '" + image_id + "' is not refined yet",
                "image_id");
  }
  return {image_id, it->second.back().selected_labels};
}

MultiLabelGroundTruth Workflow::FinalizeLabels(const std::string& image_id) const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return FinalizeLocked(image_id);
}

std::vector<MultiLabelGroundTruth> Workflow::FinalizeAll() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (phase_ != Phase::kFinal) {
    throw Error(ErrorCode::kNotReady,
                "labels are final only after refinement closes", "stage");
  }
  std::vector<MultiLabelGroundTruth> out;
  out.reserve(setup_.originals.size());
  for (const auto& [image, original] : setup_.originals) {
    out.push_back(FinalizeLocked(image));
  }
  return out;
}

void Workflow::ValidateTriage(const TriageRecord& record) const {
  auto tier = tiers_.find(record.annotator_id);
  if (tier == tiers_.end()) {
    throw Error(ErrorCode::kForbidden,
                "unknown annotator '" + record.annotator_id + "'", "annotator_id");
  }
  if (tier->second != ExperienceTier::kExperienced) {
    throw Error(ErrorCode::kForbidden, "triage is reserved for experienced annotators",
                "annotator_id");
  }
  if (!FinalizeLocked(record.image_id).labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "image '" + record.image_id + "' has final labels; only zero-label images are triaged",
                "image_id");
  }
}

void Workflow::RecordTriage(const TriageRecord& record) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  ValidateTriage(record);
  for (auto it = triage_.rbegin(); it != triage_.rend(); ++it) {
    if (it->image_id == record.image_id && it->annotator_id == record.annotator_id) {
      if (it->quality_category == record.quality_category &&
          it->gt_stance == record.gt_stance) {
        return;
      }
      break;
    }
  }
  Commit(Event{0, TriageEvent{record, clock_()}});
}

std::vector<TriageRecord> Workflow::triage_records() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  std::map<std::pair<std::string, std::string>, TriageRecord> latest;
  for (const auto& record : triage_) {
    latest[{record.image_id, record.annotator_id}] = record;
  }
  std::vector<TriageRecord> out;
  for (auto& [key, record] : latest) out.push_back(std::move(record));
  return out;
}

std::optional<AnnotationRecord> Workflow::Latest(const std::string& annotator_id,
                                                 const std::string& image_id,
                                                 AnnotationStage stage) const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  auto it = history_.find(Key{annotator_id, image_id, stage});
  if (it == history_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

std::vector<AnnotationRecord> Workflow::History(const std::string& annotator_id,
                                                const std::string& image_id,
                                                AnnotationStage stage) const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  auto it = history_.find(Key{annotator_id, image_id, stage});
  return it == history_.end() ? std::vector<AnnotationRecord>{} : it->second;
}

std::vector<AnnotationRecord> Workflow::records() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return log_order_;
}

std::vector<std::string> Workflow::AssignedImagesLocked(
    const std::string& annotator_id, Phase phase) const {
  std::vector<std::string> images;
  switch (phase) {
    case Phase::kInitial:
      for (const auto& batch : setup_.batches) {
        const auto& who = batch.assigned_annotators;
        if (std::find(who.begin(), who.end(), annotator_id) != who.end()) {
          images.insert(images.end(), batch.image_ids.begin(), batch.image_ids.end());
        }
      }
      break;
    case Phase::kRefinement:
      for (const auto& slice : slices_) {
        if (slice.annotator_id == annotator_id) {
          images.insert(images.end(), slice.image_ids.begin(), slice.image_ids.end());
        }
      }
      break;
    case Phase::kFinal: {
      auto tier = tiers_.find(annotator_id);
      if (tier == tiers_.end() || tier->second != ExperienceTier::kExperienced) break;
      for (const auto& [image, refiner] : refiner_of_image_) {
        if (FinalizeLocked(image).labels.empty()) images.push_back(image);
      }
      break;
    }
    case Phase::kAnalysis:
      break;
  }
  return images;
}

bool Workflow::DoneLocked(const std::string& annotator_id,
                          const std::string& image_id, Phase phase) const {
  switch (phase) {
    case Phase::kInitial:
      return history_.count(Key{annotator_id, image_id, AnnotationStage::kInitial}) > 0;
    case Phase::kRefinement:
      return history_.count(Key{annotator_id, image_id, AnnotationStage::kRefinement}) > 0;
    case Phase::kFinal:
      return std::any_of(triage_.begin(), triage_.end(), [&](const TriageRecord& t) {
        return t.annotator_id == annotator_id && t.image_id == image_id;
      });
    case Phase::kAnalysis:
      return true;
  }
  return true;
}

std::optional<Task> Workflow::NextTask(const std::string& annotator_id) const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  const auto images = AssignedImagesLocked(annotator_id, phase_);
  std::optional<std::string> next;
  std::size_t done = 0;
  for (const auto& image : images) {
    if (DoneLocked(annotator_id, image, phase_)) {
      ++done;
    } else if (!next) {
      next = image;
    }
  }
  if (!next) return std::nullopt;
  Task task;
  task.image_id = *next;
  task.kind = phase_ == Phase::kInitial      ? Task::Kind::kInitial
              : phase_ == Phase::kRefinement ? Task::Kind::kRefinement
                                             : Task::Kind::kTriage;
  task.done = done;
  task.total = images.size();
  return task;
}

Progress Workflow::ProgressFor(const std::string& annotator_id) const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  const auto images = AssignedImagesLocked(annotator_id, phase_);
  Progress progress;
  progress.total = images.size();
  for (const auto& image : images) {
    if (DoneLocked(annotator_id, image, phase_)) ++progress.done;
  }
  return progress;
}

std::vector<RefinerOverlap> Workflow::RefinerOverlaps() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  std::vector<RefinerOverlap> overlaps;
  for (const auto& [image, refiner] : refiner_of_image_) {
    const auto& initial = batch_of_image_.at(image)->assigned_annotators;
    if (std::find(initial.begin(), initial.end(), refiner) != initial.end()) {
      overlaps.push_back({image, refiner});
    }
  }
  return overlaps;
}

}  // namespace relabel
