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

#ifndef RELABEL_AGREEMENT_HPP_
#define RELABEL_AGREEMENT_HPP_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relabel/catalog.hpp"

namespace relabel {

enum class AgreementStatus { kAgreed, kNeedsRefinement };

enum class AgreementReason {
  kUnanimousWithOriginal,
  kLabelSetsDiffer,       // sets differ, every one holds the original label
  kOriginalLabelMissing,  // sets identical but without the original label
  kBoth,                  // sets differ and some set lacks the original label
  kMissingSubmission,     // an assigned annotator never submitted
};

std::string_view ToString(AgreementStatus status);
std::string_view ToString(AgreementReason reason);

struct AgreementResult {
  std::string image_id;
  AgreementStatus status = AgreementStatus::kNeedsRefinement;
  AgreementReason reason = AgreementReason::kBoth;
  std::vector<LabelSet> annotator_sets;

  bool agreed() const { return status == AgreementStatus::kAgreed; }
};

// An image passes only when every annotator chose the same label set and
// that set contains the originally provided label.
AgreementResult CheckAgreement(std::span<const LabelSet> sets,
                               ClassId original_label);

// Variant for workflow data where some assigned annotators may not have
// submitted; any gap routes the image to refinement.
AgreementResult CheckAgreement(std::string image_id,
                               std::span<const std::optional<LabelSet>> sets,
                               ClassId original_label);

struct AgreementSummary {
  std::size_t total = 0;
  std::size_t agreed = 0;
  std::size_t needs_refinement = 0;
  std::size_t label_sets_differ = 0;
  std::size_t original_label_missing = 0;
  std::size_t both = 0;
  std::size_t missing_submission = 0;
};

struct RefinementQueue {
  std::vector<std::string> image_ids;  // ascending image_id
  AgreementSummary summary;
};

// One result per image; duplicates are rejected.
RefinementQueue BuildRefinementQueue(std::span<const AgreementResult> results);

// Agreement report CSV (image_id,status,reason) in image_id order.
void WriteAgreementCsv(std::ostream& out,
                       std::span<const AgreementResult> results);
// Summary counts and percentages as JSON text.
std::string AgreementSummaryJson(const AgreementSummary& summary);

}  // namespace relabel

#endif  // RELABEL_AGREEMENT_HPP_
