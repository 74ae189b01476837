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

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "relabel/io.hpp"
#include "relabel/workflow.hpp"
#include "test_util.hpp"

namespace relabel {
namespace {

std::string ImageId(std::size_t i) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "img%05zu", i);
  return buffer;
}

std::vector<std::string> ImageIds(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(ImageId(i));
  return ids;
}

// Image i has original label i % 10 and proposals ranked original first,
// then ascending class ids, over `num_classes` classes.
WorkflowSetup MakeSetup(std::size_t images, std::size_t num_batches,
                        std::vector<AnnotatorProfile> roster, std::size_t per_batch = 2,
                        std::size_t num_classes = 30, std::size_t proposal_k = 20) {
  WorkflowSetup setup;
  setup.roster = std::move(roster);
  for (std::size_t i = 0; i < images; ++i) {
    const std::string id = ImageId(i);
    const ClassId original = static_cast<ClassId>(i % 10);
    setup.originals[id] = original;
    PredictionRecord pred{"m", id, std::vector<double>(num_classes, 0.01), {}};
    pred.probs[original] = 0.9;
    setup.proposals[id] = GenerateProposals(pred, proposal_k);
  }
  std::vector<std::string> standard;
  for (const auto& p : setup.roster) {
    if (p.tier == ExperienceTier::kStandard) standard.push_back(p.annotator_id);
  }
  setup.batches = CreateBatches(ImageIds(images), num_batches, standard, per_batch);
  return setup;
}

std::vector<AnnotatorProfile> Roster(std::size_t standard, std::size_t experienced) {
  std::vector<AnnotatorProfile> roster;
  for (std::size_t i = 0; i < standard; ++i) {
    roster.push_back({"s" + std::to_string(i), ExperienceTier::kStandard});
  }
  for (std::size_t i = 0; i < experienced; ++i) {
    roster.push_back({"e" + std::to_string(i), ExperienceTier::kExperienced});
  }
  return roster;
}

Workflow::Clock Ticker() {
  auto t = std::make_shared<std::int64_t>(1700000000000);
  return [t] { return (*t)++; };
}

struct Harness {
  explicit Harness(WorkflowSetup setup)
      : sink(std::make_shared<MemoryEventSink>()),
        flow(std::make_unique<Workflow>(std::move(setup), sink, Ticker())) {}
  std::shared_ptr<MemoryEventSink> sink;
  std::unique_ptr<Workflow> flow;
};

TEST_CASE("batch arithmetic") {
  const auto batches = CreateBatches(ImageIds(10000), 7, {"a", "b", "c"}, 2);
  REQUIRE(batches.size() == 7);
  std::vector<std::size_t> sizes;
  std::vector<std::string> joined;
  for (const auto& b : batches) {
    sizes.push_back(b.image_ids.size());
    joined.insert(joined.end(), b.image_ids.begin(), b.image_ids.end());
    CHECK(b.assigned_annotators.size() == 2);
    CHECK(b.assigned_annotators[0] != b.assigned_annotators[1]);
  }
  CHECK(std::count(sizes.begin(), sizes.end(), 1429) == 4);
  CHECK(std::count(sizes.begin(), sizes.end(), 1428) == 3);
  CHECK(joined == ImageIds(10000));

  const auto one = CreateBatches(ImageIds(10), 1, {"a", "b"}, 2);
  REQUIRE(one.size() == 1);
  CHECK(one[0].image_ids.size() == 10);
  CHECK(std::is_permutation(one[0].assigned_annotators.begin(),
                            one[0].assigned_annotators.end(),
                            std::vector<std::string>{"a", "b"}.begin()));
  CHECK_ERROR_CODE(CreateBatches(ImageIds(10), 1, {"a"}, 2), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(CreateBatches(ImageIds(10), 1, {"a", "a"}, 2), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(CreateBatches(ImageIds(10), 0, {"a", "b"}, 2), ErrorCode::kInvalidArgument);

  // The seed rotates the starting annotator only.
  const auto rotated = CreateBatches(ImageIds(10), 2, {"a", "b", "c"}, 2, 1);
  CHECK(rotated[0].assigned_annotators == std::vector<std::string>{"b", "c"});
  CHECK(rotated[1].assigned_annotators == std::vector<std::string>{"a", "b"});
}

TEST_CASE("refinement slice arithmetic") {
  const auto queue = ImageIds(6425);
  const auto slices = AssignRefinement(queue, {"e0", "e1", "e2", "e3", "e4"});
  REQUIRE(slices.size() == 5);
  std::vector<std::string> joined;
  for (const auto& s : slices) {
    CHECK(s.image_ids.size() == 1285);
    joined.insert(joined.end(), s.image_ids.begin(), s.image_ids.end());
  }
  CHECK(joined == queue);

  const auto seven = AssignRefinement(ImageIds(7), {"a", "b", "c"});
  REQUIRE(seven.size() == 3);
  CHECK(seven[0].image_ids.size() == 3);
  CHECK(seven[1].image_ids.size() == 2);
  CHECK(seven[2].image_ids.size() == 2);

  CHECK(AssignRefinement({}, {"a", "b"}).empty());
  CHECK(AssignRefinement(ImageIds(1), {"a", "b"}).size() == 1);
  CHECK_ERROR_CODE(AssignRefinement(ImageIds(3), {}), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(AssignRefinement(ImageIds(3), {"a", "a"}), ErrorCode::kDuplicate);
}

TEST_CASE("submissions and revisions") {
  Harness h(MakeSetup(4, 1, Roster(2, 1)));
  Workflow& flow = *h.flow;
  const std::string img = ImageId(1);
  CHECK(h.sink->size() == 1);

  const SubmitResult first = flow.Submit("s0", img, AnnotationStage::kInitial, {1, 2}, {});
  CHECK(first.revision == 1);
  CHECK_FALSE(first.duplicate);
  const SubmitResult second = flow.Submit("s0", img, AnnotationStage::kInitial, {1}, {});
  CHECK(second.revision == 2);
  const auto history = flow.History("s0", img, AnnotationStage::kInitial);
  REQUIRE(history.size() == 2);
  CHECK(history[0].selected_labels == LabelSet{1, 2});
  CHECK(flow.Latest("s0", img, AnnotationStage::kInitial)->selected_labels == LabelSet{1});

  const std::size_t logged = h.sink->size();
  const SubmitResult again = flow.Submit("s0", img, AnnotationStage::kInitial, {1}, {});
  CHECK(again.duplicate);
  CHECK(again.revision == 2);
  CHECK(h.sink->size() == logged);

  // Class 29 exists in the catalog but is not among the 20 proposals.
  CHECK_ERROR_CODE(flow.Submit("s0", img, AnnotationStage::kInitial, {29}, {}),
                   ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(flow.Submit("e0", img, AnnotationStage::kInitial, {1}, {}),
                   ErrorCode::kForbidden);
  CHECK_ERROR_CODE(flow.Submit("nobody", img, AnnotationStage::kInitial, {1}, {}),
                   ErrorCode::kForbidden);
  CHECK_ERROR_CODE(flow.Submit("s0", "img99999", AnnotationStage::kInitial, {1}, {}),
                   ErrorCode::kNotFound);
  CHECK_ERROR_CODE(flow.Submit("s0", img, AnnotationStage::kRefinement, {1}, {}),
                   ErrorCode::kStageOrder);
  // Empty selections are legal.
  CHECK(flow.Submit("s1", img, AnnotationStage::kInitial, {}, {}).revision == 1);
}

// Drives initial annotation so that image i agrees iff agree(i).
template <typename Agree>
void AnnotateInitial(Workflow& flow, Agree agree) {
  for (const auto& batch : flow.setup().batches) {
    for (const auto& image : batch.image_ids) {
      const ClassId original = flow.setup().originals.at(image);
      for (std::size_t j = 0; j < batch.assigned_annotators.size(); ++j) {
        LabelSet labels{original};
        if (!agree(image) && j == 1) labels.insert((original + 1) % 10);
        flow.Submit(batch.assigned_annotators[j], image, AnnotationStage::kInitial, labels, {});
      }
    }
  }
}

TEST_CASE("phase order") {
  Harness h(MakeSetup(6, 2, Roster(2, 2)));
  Workflow& flow = *h.flow;
  CHECK(flow.phase() == Phase::kInitial);
  CHECK_ERROR_CODE(flow.AdvancePhase(Phase::kRefinement), ErrorCode::kStageOrder);
  CHECK_ERROR_CODE(flow.AnalyzeAgreement(), ErrorCode::kNotReady);
  CHECK_ERROR_CODE(flow.AssignRefinementSlices({"e0"}), ErrorCode::kStageOrder);
  AnnotateInitial(flow, [](const std::string& id) { return id != ImageId(2); });
  flow.AdvancePhase(Phase::kAnalysis);
  CHECK_ERROR_CODE(flow.Submit("s0", ImageId(0), AnnotationStage::kInitial, {0}, {}),
                   ErrorCode::kStageOrder);
  CHECK_ERROR_CODE(flow.AdvancePhase(Phase::kRefinement), ErrorCode::kNotReady);
  CHECK_ERROR_CODE(flow.AssignRefinementSlices({"s0"}), ErrorCode::kForbidden);
  const auto slices = flow.AssignRefinementSlices({"e0", "e1"});
  REQUIRE(slices.size() == 1);
  CHECK(slices[0].image_ids == std::vector<std::string>{ImageId(2)});
  flow.AdvancePhase(Phase::kRefinement);
  CHECK_ERROR_CODE(flow.AdvancePhase(Phase::kFinal), ErrorCode::kNotReady);
  CHECK_ERROR_CODE(flow.FinalizeAll(), ErrorCode::kNotReady);
  const auto presentation = flow.BuildRefinementPresentation(ImageId(2));
  flow.Submit("e0", ImageId(2), AnnotationStage::kRefinement, presentation.prechecked, {});
  flow.AdvancePhase(Phase::kFinal);
  CHECK_ERROR_CODE(flow.AdvancePhase(Phase::kFinal), ErrorCode::kStageOrder);
  CHECK(flow.FinalizeAll().size() == 6);
}

TEST_CASE("unsubmitted images go to refinement") {
  Harness h(MakeSetup(4, 1, Roster(2, 1)));
  h.flow->Submit("s0", ImageId(0), AnnotationStage::kInitial, {0}, {});
  h.flow->AdvancePhase(Phase::kAnalysis);
  const RefinementQueue queue = h.flow->BuildQueue();
  CHECK(queue.image_ids.size() == 4);
  CHECK(queue.summary.missing_submission == 4);
}

TEST_CASE("refinement presentation and comments") {
  WorkflowSetup setup = MakeSetup(4, 1, Roster(2, 1), 2, 30, 25);
  setup.display_k = 20;
  // Image 0 (original 0) ranks classes 0,1,...; class 21 sits at rank 22.
  Harness h(std::move(setup));
  Workflow& flow = *h.flow;
  const std::string img0 = ImageId(0), img1 = ImageId(1), img2 = ImageId(2);
  const auto& ranked = flow.setup().proposals.at(img0).ranked_labels;
  REQUIRE(ranked.size() == 25);
  CHECK(std::find(ranked.begin(), ranked.end(), 21) - ranked.begin() == 21);

  flow.Submit("s0", img0, AnnotationStage::kInitial, {1, 2}, {});
  flow.Submit("s1", img0, AnnotationStage::kInitial, {2, 3, 21}, {});
  flow.Submit("s0", img1, AnnotationStage::kInitial, {}, {});
  flow.Submit("s1", img1, AnnotationStage::kInitial, {}, {});
  flow.Submit("s0", img2, AnnotationStage::kInitial, {2}, {});
  flow.Submit("s1", img2, AnnotationStage::kInitial, {2}, {});
  flow.Submit("s0", ImageId(3), AnnotationStage::kInitial, {3}, {});
  flow.Submit("s1", ImageId(3), AnnotationStage::kInitial, {3, 4}, {});
  flow.AdvancePhase(Phase::kAnalysis);
  flow.AssignRefinementSlices({"e0"});
  flow.AdvancePhase(Phase::kRefinement);

  const auto p0 = flow.BuildRefinementPresentation(img0);
  CHECK(p0.prechecked == LabelSet{1, 2, 3, 21});
  REQUIRE(p0.proposals.groups.size() == 5);
  for (int g = 0; g < 4; ++g) CHECK(p0.proposals.groups[g].size() == 5);
  CHECK(p0.proposals.groups[4] == std::vector<ClassId>{21});
  CHECK(p0.proposals.ranked_labels.size() == 21);
  CHECK(std::equal(p0.proposals.ranked_labels.begin(), p0.proposals.ranked_labels.begin() + 20,
                   ranked.begin()));

  const auto p1 = flow.BuildRefinementPresentation(img1);
  CHECK(p1.prechecked.empty());
  CHECK(p1.proposals.ranked_labels.size() == 20);
  CHECK(p1.proposals.groups.size() == 4);

  CHECK_ERROR_CODE(flow.BuildRefinementPresentation(img2), ErrorCode::kInvalidArgument);

  // Changing the prechecked set needs a comment; keeping it does not.
  CHECK_ERROR_CODE(flow.Submit("e0", img0, AnnotationStage::kRefinement, {1, 2}, {}),
                   ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(flow.Submit("e0", img0, AnnotationStage::kRefinement, {1, 2}, "  "),
                   ErrorCode::kInvalidArgument);
  CHECK(flow.Submit("e0", img0, AnnotationStage::kRefinement, {1, 2}, "3 and 21 absent")
            .revision == 1);
  CHECK(flow.Submit("e0", img1, AnnotationStage::kRefinement, {}, {}).revision == 1);
  CHECK_ERROR_CODE(flow.Submit("e0", ImageId(3), AnnotationStage::kRefinement, {3, 29}, "x"),
                   ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(flow.Submit("s0", ImageId(3), AnnotationStage::kRefinement, {3}, "x"),
                   ErrorCode::kForbidden);
  CHECK_ERROR_CODE(flow.Submit("e0", img2, AnnotationStage::kRefinement, {2}, {}),
                   ErrorCode::kStageOrder);
  flow.Submit("e0", ImageId(3), AnnotationStage::kRefinement, {3, 4}, {});
  flow.AdvancePhase(Phase::kFinal);

  SUBCASE("final labels") {
    CHECK(flow.FinalizeLabels(img2).labels == LabelSet{2});
    CHECK(flow.FinalizeLabels(img0).labels == LabelSet{1, 2});
    CHECK(flow.FinalizeLabels(img1).labels.empty());
    CHECK(flow.FinalizeLabels(ImageId(3)).labels == LabelSet{3, 4});
  }
  SUBCASE("triage") {
    const auto task = flow.NextTask("e0");
    REQUIRE(task.has_value());
    CHECK(task->image_id == img1);
    CHECK(task->kind == Task::Kind::kTriage);
    CHECK_FALSE(flow.NextTask("s0").has_value());

    const TriageRecord record{img1, QualityCategory::kFineGrainedNeedsExpert,
                              GroundTruthStance::kUncertain, "e0"};
    flow.RecordTriage(record);
    const std::size_t logged = h.sink->size();
    flow.RecordTriage(record);
    CHECK(h.sink->size() == logged);
    REQUIRE(flow.triage_records().size() == 1);
    CHECK(flow.triage_records()[0].quality_category ==
          QualityCategory::kFineGrainedNeedsExpert);
    CHECK_FALSE(flow.NextTask("e0").has_value());

    CHECK_ERROR_CODE(flow.RecordTriage({img2, QualityCategory::kNoValidProposal,
                                        GroundTruthStance::kAgree, "e0"}),
                     ErrorCode::kInvalidArgument);
    CHECK_ERROR_CODE(flow.RecordTriage({img1, QualityCategory::kNoValidProposal,
                                        GroundTruthStance::kAgree, "s0"}),
                     ErrorCode::kForbidden);
  }
}

TEST_CASE("next task for a 1,285-image slice") {
  Harness h(MakeSetup(6425, 5, Roster(10, 5)));
  Workflow& flow = *h.flow;
  AnnotateInitial(flow, [](const std::string&) { return false; });
  flow.AdvancePhase(Phase::kAnalysis);
  CHECK(flow.BuildQueue().image_ids.size() == 6425);
  flow.AssignRefinementSlices({"e0", "e1", "e2", "e3", "e4"});
  flow.AdvancePhase(Phase::kRefinement);

  const auto first = flow.NextTask("e2");
  REQUIRE(first.has_value());
  CHECK(first->image_id == ImageId(2 * 1285));
  CHECK(first->kind == Task::Kind::kRefinement);
  CHECK(first->done == 0);
  CHECK(first->total == 1285);
  const auto again = flow.NextTask("e2");
  REQUIRE(again.has_value());
  CHECK(again->image_id == first->image_id);
  CHECK(flow.ProgressFor("e2").total == 1285);

  for (const auto& slice : flow.refinement_slices()) {
    if (slice.annotator_id != "e2") continue;
    for (const auto& image : slice.image_ids) {
      const auto p = flow.BuildRefinementPresentation(image);
      flow.Submit("e2", image, AnnotationStage::kRefinement, p.prechecked, {});
    }
  }
  CHECK_FALSE(flow.NextTask("e2").has_value());
  CHECK(flow.ProgressFor("e2").done == 1285);
}

TEST_CASE("event log replay reconstructs state") {
  const auto dir = testing::TempDir("workflow_replay");
  const auto path = dir / "events.jsonl";
  const WorkflowSetup setup = MakeSetup(20, 2, Roster(3, 2));
  {
    auto sink = std::make_shared<FileEventSink>(path);
    Workflow flow(setup, sink, Ticker());
    AnnotateInitial(flow, [](const std::string& id) { return id.back() % 3 != 0; });
    flow.Submit("s0", ImageId(0), AnnotationStage::kInitial, {0, 5}, {});
    flow.AdvancePhase(Phase::kAnalysis);
    flow.AssignRefinementSlices({"e0", "e1"});
    flow.AdvancePhase(Phase::kRefinement);
    for (const auto& slice : flow.refinement_slices()) {
      for (const auto& image : slice.image_ids) {
        flow.Submit(slice.annotator_id, image, AnnotationStage::kRefinement, {}, "none fit");
      }
    }
    flow.AdvancePhase(Phase::kFinal);
    const auto finals = flow.FinalizeAll();
    const auto zero = std::find_if(finals.begin(), finals.end(),
                                   [](const auto& gt) { return gt.labels.empty(); });
    REQUIRE(zero != finals.end());
    flow.RecordTriage({zero->image_id, QualityCategory::kUncommonOrAtypicalViewpoint,
                       GroundTruthStance::kDisagree, "e1"});
  }

  const auto events = LoadEventLog(path);
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);

  auto memory = std::make_shared<MemoryEventSink>();
  Workflow original(setup, memory, Ticker());
  auto replayed = Workflow::Replay(setup, events, std::make_shared<MemoryEventSink>());
  CHECK(replayed->phase() == Phase::kFinal);
  CHECK(replayed->last_seq() == events.size());
  CHECK(replayed->records().size() == 20 * 2 + 1 + replayed->refinement_slices()[0].image_ids.size() +
                                          replayed->refinement_slices()[1].image_ids.size());
  CHECK(replayed->History("s0", ImageId(0), AnnotationStage::kInitial).size() == 2);
  CHECK(replayed->triage_records().size() == 1);
  const auto finals = replayed->FinalizeAll();
  CHECK(std::count_if(finals.begin(), finals.end(),
                      [](const auto& gt) { return gt.labels.empty(); }) ==
        static_cast<long>(replayed->BuildQueue().image_ids.size()));

  // Each event serializes back to the exact line it was read from.
  const std::string text = ReadFile(path);
  std::string rebuilt;
  for (const auto& e : events) rebuilt += SerializeEvent(e) + "\n";
  CHECK(rebuilt == text);

  SUBCASE("tampered logs are rejected") {
    auto broken = events;
    std::get<AnnotationRecord>(broken[2].body).revision = 5;
    CHECK_ERROR_CODE(Workflow::Replay(setup, broken, std::make_shared<MemoryEventSink>()),
                     ErrorCode::kParse);
    auto reordered = events;
    std::swap(reordered[1], reordered[2]);
    CHECK_ERROR_CODE(Workflow::Replay(setup, reordered, std::make_shared<MemoryEventSink>()),
                     ErrorCode::kParse);
    CHECK_ERROR_CODE(Workflow::Replay(setup, {}, std::make_shared<MemoryEventSink>()),
                     ErrorCode::kParse);
    CHECK_ERROR_CODE(ParseEvent("{\"seq\":1,\"type\":\"bogus\"}"), ErrorCode::kParse);
  }
}

TEST_CASE("concurrent submissions keep a gap-free log") {
  auto roster = Roster(8, 0);
  Harness h(MakeSetup(400, 4, roster));
  Workflow& flow = *h.flow;
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (const auto& profile : roster) {
    threads.emplace_back([&, id = profile.annotator_id] {
      try {
        while (auto task = flow.NextTask(id)) {
          flow.Submit(id, task->image_id, AnnotationStage::kInitial,
                      {flow.setup().originals.at(task->image_id)}, {});
        }
      } catch (...) {
        ++failures;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(failures == 0);
  const auto events = h.sink->events();
  CHECK(events.size() == 1 + 400 * 2);
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
  flow.AdvancePhase(Phase::kAnalysis);
  CHECK(flow.BuildQueue().image_ids.empty());
}

TEST_CASE("enum names round trip") {
  for (Phase p : {Phase::kInitial, Phase::kAnalysis, Phase::kRefinement, Phase::kFinal}) {
    CHECK(ParsePhase(ToString(p)) == p);
  }
  CHECK(ParseExperienceTier("experienced") == ExperienceTier::kExperienced);
  CHECK(ParseAnnotationStage("refinement") == AnnotationStage::kRefinement);
  CHECK_ERROR_CODE(ParsePhase("done"), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace relabel
