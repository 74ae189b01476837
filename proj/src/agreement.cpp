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

#include "relabel/agreement.hpp"

#include <algorithm>
#include <ostream>

#include "relabel/error.hpp"
#include "relabel/io.hpp"

namespace relabel {

std::string_view ToString(AgreementStatus status) {
  return status == AgreementStatus::kAgreed ? "agreed" : "needs_refinement";
}

std::string_view ToString(AgreementReason reason) {
  switch (reason) {
    case AgreementReason::kUnanimousWithOriginal: return "unanimous_with_original";
    case AgreementReason::kLabelSetsDiffer: return "label_sets_differ";
    case AgreementReason::kOriginalLabelMissing: return "original_label_missing";
    case AgreementReason::kBoth: return "both";
    case AgreementReason::kMissingSubmission: return "missing_submission";
  }
  return "unknown";
}

AgreementResult CheckAgreement(std::span<const LabelSet> sets,
                               ClassId original_label) {
  if (sets.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "agreement needs at least one annotator label set");
  }
  AgreementResult result;
  result.annotator_sets.assign(sets.begin(), sets.end());
  const bool identical =
      std::all_of(sets.begin(), sets.end(),
                  [&](const LabelSet& s) { return s == sets.front(); });
  // The original must lie in the common set, i.e. in every set.
  const bool all_have_original =
      std::all_of(sets.begin(), sets.end(), [&](const LabelSet& s) {
        return s.count(original_label) > 0;
      });
  if (identical) {
    result.reason = all_have_original ? AgreementReason::kUnanimousWithOriginal
                                      : AgreementReason::kOriginalLabelMissing;
  } else {
    result.reason = all_have_original ? AgreementReason::kLabelSetsDiffer
                                      : AgreementReason::kBoth;
  }
  result.status = result.reason == AgreementReason::kUnanimousWithOriginal
                      ? AgreementStatus::kAgreed
                      : AgreementStatus::kNeedsRefinement;
  return result;
}

AgreementResult CheckAgreement(std::string image_id,
                               std::span<const std::optional<LabelSet>> sets,
                               ClassId original_label) {
  if (sets.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "agreement needs at least one assigned annotator");
  }
  AgreementResult result;
  std::vector<LabelSet> present;
  for (const auto& set : sets) {
    if (set) present.push_back(*set);
  }
  if (present.size() != sets.size()) {
    result.status = AgreementStatus::kNeedsRefinement;
    result.reason = AgreementReason::kMissingSubmission;
    result.annotator_sets = std::move(present);
  } else {
    result = CheckAgreement(present, original_label);
  }
  result.image_id = std::move(image_id);
  return result;
}

RefinementQueue BuildRefinementQueue(std::span<const AgreementResult> results) {
  std::vector<const AgreementResult*> ordered;
  ordered.reserve(results.size());
  for (const auto& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->image_id < b->image_id; });

  RefinementQueue queue;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const AgreementResult& r = *ordered[i];
    if (i > 0 && ordered[i - 1]->image_id == r.image_id) {
      throw Error(ErrorCode::kDuplicate,
                  "duplicate agreement result for '" + r.image_id + "'",
                  "image_id");
    }
    ++queue.summary.total;
    if (r.agreed()) {
      ++queue.summary.agreed;
      continue;
    }
    ++queue.summary.needs_refinement;
    queue.image_ids.push_back(r.image_id);
    switch (r.reason) {
      case AgreementReason::kLabelSetsDiffer: ++queue.summary.label_sets_differ; break;
      case AgreementReason::kOriginalLabelMissing: ++queue.summary.original_label_missing; break;
      case AgreementReason::kBoth: ++queue.summary.both; break;
      case AgreementReason::kMissingSubmission: ++queue.summary.missing_submission; break;
      case AgreementReason::kUnanimousWithOriginal: break;
    }
  }
  return queue;
}

void WriteAgreementCsv(std::ostream& out,
                       std::span<const AgreementResult> results) {
  std::vector<const AgreementResult*> ordered;
  for (const auto& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
  out << "image_id,status,reason\n";
  for (const auto* r : ordered) {
    out << r->image_id << ',' << ToString(r->status) << ','
        << ToString(r->reason) << '\n';
  }
}

std::string AgreementSummaryJson(const AgreementSummary& summary) {
  const auto fraction = [&](std::size_t count) {
    return summary.total == 0 ? 0.0
                              : static_cast<double>(count) /
                                    static_cast<double>(summary.total);
  };
  OrderedJson doc;
  doc["total"] = summary.total;
  OrderedJson counts;
  counts["agreed"] = summary.agreed;
  counts["needs_refinement"] = summary.needs_refinement;
  counts["label_sets_differ"] = summary.label_sets_differ;
  counts["original_label_missing"] = summary.original_label_missing;
  counts["both"] = summary.both;
  counts["missing_submission"] = summary.missing_submission;
  doc["counts"] = counts;
  OrderedJson percentages;
  for (const auto& [key, value] : counts.items()) {
    percentages[key] = FormatPercent(fraction(value.get<std::size_t>()));
  }
  doc["percentages"] = percentages;
  return doc.dump(2) + "\n";
}

}  // namespace relabel
