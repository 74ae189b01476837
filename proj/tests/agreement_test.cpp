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
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "relabel/agreement.hpp"
#include "relabel/io.hpp"
#include "test_util.hpp"

namespace relabel {
namespace {

// Naive restatement of the predicate over sorted vectors: pairwise equality
// against the first set, then a linear membership scan of every set.
bool NaiveAgreed(const std::vector<std::vector<int>>& sets, int original) {
  for (const auto& s : sets) {
    if (s.size() != sets[0].size()) return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != sets[0][i]) return false;
    }
  }
  for (int label : sets[0]) {
    if (label == original) return true;
  }
  return false;
}

std::vector<std::vector<int>> RandomSets(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4), size(0, 5), cls(0, 19), coin(0, 2);
  std::vector<std::vector<int>> sets(count(rng));
  for (auto& s : sets) {
    // Bias toward copies of the first set so agreement actually occurs.
    if (&s != &sets[0] && coin(rng) != 0) {
      s = sets[0];
      continue;
    }
    const int n = size(rng);
    while (static_cast<int>(s.size()) < n) {
      const int c = cls(rng);
      if (std::find(s.begin(), s.end(), c) == s.end()) s.push_back(c);
    }
    std::sort(s.begin(), s.end());
  }
  return sets;
}

std::vector<LabelSet> ToLabelSets(const std::vector<std::vector<int>>& sets) {
  std::vector<LabelSet> out;
  for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
  return out;
}

TEST_CASE("agreement examples") {
  auto check = [](std::vector<LabelSet> sets, ClassId original) {
    return CheckAgreement(sets, original);
  };
  const auto agreed = check({{5}, {5}}, 5);
  CHECK(agreed.agreed());
  CHECK(agreed.reason == AgreementReason::kUnanimousWithOriginal);

  const auto differ = check({{5, 9}, {5}}, 5);
  CHECK_FALSE(differ.agreed());
  CHECK(differ.reason == AgreementReason::kLabelSetsDiffer);

  CHECK(check({{9}, {9}}, 5).reason == AgreementReason::kOriginalLabelMissing);
  CHECK(check({{}, {}}, 5).reason == AgreementReason::kOriginalLabelMissing);
  CHECK(check({{5}, {9}}, 5).reason == AgreementReason::kBoth);
  CHECK(check({{1}, {9}}, 5).reason == AgreementReason::kBoth);
  CHECK(check({{5}}, 5).agreed());
  CHECK_ERROR_CODE(check({}, 5), ErrorCode::kInvalidArgument);
}

TEST_CASE("missing submissions route to refinement") {
  std::vector<std::optional<LabelSet>> sets{LabelSet{5}, std::nullopt};
  const auto r = CheckAgreement("img", sets, 5);
  CHECK(r.image_id == "img");
  CHECK(r.reason == AgreementReason::kMissingSubmission);
  CHECK_FALSE(r.agreed());
  std::vector<std::optional<LabelSet>> full{LabelSet{5}, LabelSet{5}};
  CHECK(CheckAgreement("img", full, 5).agreed());
}

TEST_CASE("predicate properties on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    auto sets = RandomSets(rng);
    const int original = static_cast<int>(rng() % 20);
    const auto labels = ToLabelSets(sets);
    const auto result = CheckAgreement(labels, original);
    CHECK(result.agreed() == NaiveAgreed(sets, original));
    CHECK(result.agreed() == (result.reason == AgreementReason::kUnanimousWithOriginal));

    auto shuffled = labels;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(CheckAgreement(shuffled, original).reason == result.reason);

    auto doubled = labels;
    doubled.push_back(labels[rng() % labels.size()]);
    CHECK(CheckAgreement(doubled, original).reason == result.reason);

    if (result.agreed()) {
      for (const auto& s : labels) {
        CHECK(s == labels[0]);
        CHECK(s.count(original) == 1);
      }
    }
  }
}

TEST_CASE("queue arithmetic") {
  std::vector<AgreementResult> results;
  for (int i = 0; i < 10000; ++i) {
    AgreementResult r;
    r.image_id = "img" + std::to_string(100000 + i);
    if (i % 10000 < 6425) {
      r.status = AgreementStatus::kNeedsRefinement;
      r.reason = AgreementReason::kLabelSetsDiffer;
    } else {
      r.status = AgreementStatus::kAgreed;
      r.reason = AgreementReason::kUnanimousWithOriginal;
    }
    results.push_back(r);
  }
  std::shuffle(results.begin(), results.end(), std::mt19937_64(3));
  const RefinementQueue queue = BuildRefinementQueue(results);
  CHECK(queue.image_ids.size() == 6425);
  CHECK(queue.summary.agreed + queue.summary.needs_refinement == 10000);
  CHECK(std::is_sorted(queue.image_ids.begin(), queue.image_ids.end()));

  std::vector<AgreementResult> all_agreed(3);
  for (int i = 0; i < 3; ++i) {
    all_agreed[i].image_id = std::to_string(i);
    all_agreed[i].status = AgreementStatus::kAgreed;
    all_agreed[i].reason = AgreementReason::kUnanimousWithOriginal;
  }
  CHECK(BuildRefinementQueue(all_agreed).image_ids.empty());
  all_agreed.push_back(all_agreed[0]);
  CHECK_ERROR_CODE(BuildRefinementQueue(all_agreed), ErrorCode::kDuplicate);
}

TEST_CASE("queue matches a brute-force filter") {
  std::mt19937_64 rng(1000);
  std::vector<AgreementResult> results;
  std::vector<std::string> expected;
  for (int i = 0; i < 1000; ++i) {
    const auto sets = RandomSets(rng);
    const int original = static_cast<int>(rng() % 20);
    auto r = CheckAgreement(ToLabelSets(sets), original);
    char id[16];
    std::snprintf(id, sizeof(id), "im%04d", i);
    r.image_id = id;
    results.push_back(r);
    if (!NaiveAgreed(sets, original)) expected.push_back(id);
  }
  std::reverse(results.begin(), results.end());
  const RefinementQueue queue = BuildRefinementQueue(results);
  CHECK(queue.image_ids == expected);
  CHECK(queue.summary.label_sets_differ + queue.summary.original_label_missing +
            queue.summary.both ==
        queue.summary.needs_refinement);
}

TEST_CASE("agreement report formats") {
  std::vector<AgreementResult> results(2);
  results[0].image_id = "b";
  results[0].reason = AgreementReason::kBoth;
  results[1].image_id = "a";
  results[1].status = AgreementStatus::kAgreed;
  results[1].reason = AgreementReason::kUnanimousWithOriginal;
  std::ostringstream csv;
  WriteAgreementCsv(csv, results);
  CHECK(csv.str() ==
        "image_id,status,reason\n"
        "a,agreed,unanimous_with_original\n"
        "b,needs_refinement,both\n");
  const auto summary = Json::parse(AgreementSummaryJson(BuildRefinementQueue(results).summary));
  CHECK(summary["total"] == 2);
  CHECK(summary["counts"]["both"] == 1);
  CHECK(summary["percentages"]["agreed"] == "50.00");
}

}  // namespace
}  // namespace relabel
