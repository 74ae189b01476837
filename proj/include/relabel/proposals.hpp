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

#ifndef RELABEL_PROPOSALS_HPP_
#define RELABEL_PROPOSALS_HPP_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "relabel/catalog.hpp"

namespace relabel {

inline constexpr std::size_t kDefaultProposalCount = 20;
inline constexpr std::size_t kProposalGroupSize = 5;

// Ordered candidate labels for one image, displayed in groups of five.
struct ProposalSet {
  std::string image_id;
  std::vector<ClassId> ranked_labels;
  // Group g holds ranked positions [5g, 5g+5). Presentations may append
  // further groups; the concatenation always equals ranked_labels.
  std::vector<std::vector<ClassId>> groups;

  bool Contains(ClassId id) const;
  bool operator==(const ProposalSet&) const = default;
};

// Splits `labels` into consecutive groups of at most five.
std::vector<std::vector<ClassId>> PartitionIntoGroups(
    const std::vector<ClassId>& labels);

// Class ids of the k highest scores, descending; equal scores rank by
// ascending class id. Returns min(k, available) labels.
ProposalSet GenerateProposals(const PredictionRecord& prediction,
                              std::size_t k = kDefaultProposalCount);

// Highest-ranked class under the same ordering as GenerateProposals.
ClassId TopPrediction(const PredictionRecord& prediction);

enum class EmptySetPolicy {
  kExclude,       // images without labels leave numerator and denominator
  kCountAsWrong,  // they stay in the denominator and never score
};

struct MetricValue {
  double value = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_evaluated = 0;
};

// Fraction of images whose top-1 prediction lies in the image's label set.
// Every ground-truth image needs a prediction.
MetricValue RealAccuracy(const std::map<std::string, ClassId>& predictions,
                         const std::vector<MultiLabelGroundTruth>& truth,
                         EmptySetPolicy policy = EmptySetPolicy::kExclude);

// Fraction of images whose prediction equals the original label. Key sets
// must match.
MetricValue Top1Accuracy(const std::map<std::string, ClassId>& predictions,
                         const std::map<std::string, ClassId>& originals);

struct ModelScore {
  std::string model_id;
  double real_accuracy = 0.0;
  double top1_accuracy = 0.0;
  std::size_t n_evaluated = 0;

  bool operator==(const ModelScore&) const = default;
};

struct ModelPredictions {
  std::string model_id;
  std::map<std::string, ClassId> top1;
};

// Top-1 map for one model's records.
ModelPredictions CollectTop1(const std::string& model_id,
                             const std::vector<PredictionRecord>& records);

// Scores one model. Top-1 is measured over the ground-truth images against
// `originals`; n_evaluated is the ReaL denominator.
ModelScore ScoreModel(const ModelPredictions& model,
                      const std::vector<MultiLabelGroundTruth>& truth,
                      const std::map<std::string, ClassId>& originals,
                      EmptySetPolicy policy = EmptySetPolicy::kExclude);

struct ModelSelection {
  ModelScore winner;
  std::vector<ModelScore> leaderboard;  // ordered by model_id
};

// Picks the candidate with the highest ReaL accuracy; ties go to the
// lexicographically smallest model_id. All candidates must cover the same
// images.
ModelSelection SelectModel(const std::vector<ModelPredictions>& candidates,
                           const std::vector<MultiLabelGroundTruth>& truth,
                           const std::map<std::string, ClassId>& originals,
                           EmptySetPolicy policy = EmptySetPolicy::kExclude);

// Model leaderboard CSV: model_id,real_accuracy,top1_accuracy,n_evaluated.
void WriteLeaderboardCsv(std::ostream& out,
                         const std::vector<ModelScore>& rows);

// Proposal export, one {"image_id","proposals"} object per line.
void WriteProposals(std::ostream& out, const std::vector<ProposalSet>& sets);
std::vector<ProposalSet> ParseProposals(std::istream& in,
                                        const ClassCatalog& catalog);

}  // namespace relabel

#endif  // RELABEL_PROPOSALS_HPP_
