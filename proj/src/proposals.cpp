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

#include "relabel/proposals.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

#include "relabel/error.hpp"
#include "relabel/io.hpp"

namespace relabel {

bool ProposalSet::Contains(ClassId id) const {
  return std::find(ranked_labels.begin(), ranked_labels.end(), id) !=
         ranked_labels.end();
}

std::vector<std::vector<ClassId>> PartitionIntoGroups(
    const std::vector<ClassId>& labels) {
  std::vector<std::vector<ClassId>> groups;
  for (std::size_t start = 0; start < labels.size();
       start += kProposalGroupSize) {
    const std::size_t end = std::min(labels.size(), start + kProposalGroupSize);
    groups.emplace_back(labels.begin() + static_cast<std::ptrdiff_t>(start),
                        labels.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return groups;
}

ProposalSet GenerateProposals(const PredictionRecord& prediction,
                              std::size_t k) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "k must be at least 1", "k");
  }
  std::vector<ScoredClass> scored;
  if (prediction.has_probs()) {
    scored.reserve(prediction.probs.size());
    for (std::size_t i = 0; i < prediction.probs.size(); ++i) {
      scored.push_back({static_cast<ClassId>(i), prediction.probs[i]});
    }
  } else {
    scored = prediction.ranked_topk;
  }
  if (scored.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "prediction for '" + prediction.image_id + "' has no scores",
                "probs");
  }
  const auto by_rank = [](const ScoredClass& a, const ScoredClass& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.class_id < b.class_id;
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(),
                    scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), by_rank);

  ProposalSet set;
  set.image_id = prediction.image_id;
  set.ranked_labels.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    set.ranked_labels.push_back(scored[i].class_id);
  }
  set.groups = PartitionIntoGroups(set.ranked_labels);
  return set;
}

ClassId TopPrediction(const PredictionRecord& prediction) {
  return GenerateProposals(prediction, 1).ranked_labels.front();
}

MetricValue RealAccuracy(const std::map<std::string, ClassId>& predictions,
                         const std::vector<MultiLabelGroundTruth>& truth,
                         EmptySetPolicy policy) {
  MetricValue metric;
  for (const auto& gt : truth) {
    auto it = predictions.find(gt.image_id);
    if (it == predictions.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "no prediction for image '" + gt.image_id + "'", "image_id");
    }
    if (gt.labels.empty() && policy == EmptySetPolicy::kExclude) continue;
    ++metric.n_evaluated;
    if (gt.labels.count(it->second)) ++metric.n_correct;
  }
  if (metric.n_evaluated == 0) {
    throw Error(ErrorCode::kUndefinedMetric,
                "ReaL accuracy is undefined: no image has a non-empty label set");
  }
  metric.value = static_cast<double>(metric.n_correct) /
                 static_cast<double>(metric.n_evaluated);
  return metric;
}

MetricValue Top1Accuracy(const std::map<std::string, ClassId>& predictions,
                         const std::map<std::string, ClassId>& originals) {
  if (predictions.empty() && originals.empty()) {
    throw Error(ErrorCode::kUndefinedMetric,
                "top-1 accuracy is undefined on an empty input");
  }
  if (predictions.size() != originals.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "prediction and original label image sets differ");
  }
  MetricValue metric;
  auto p = predictions.begin();
  for (auto o = originals.begin(); o != originals.end(); ++o, ++p) {
    if (p->first != o->first) {
      throw Error(ErrorCode::kInvalidArgument,
                  "prediction and original label image sets differ at '" +
                      o->first + "'",
                  "image_id");
    }
    ++metric.n_evaluated;
    if (p->second == o->second) ++metric.n_correct;
  }
  metric.value = static_cast<double>(metric.n_correct) /
                 static_cast<double>(metric.n_evaluated);
  return metric;
}

ModelPredictions CollectTop1(const std::string& model_id,
                             const std::vector<PredictionRecord>& records) {
  ModelPredictions model{model_id, {}};
  for (const auto& record : records) {
    model.top1.emplace(record.image_id, TopPrediction(record));
  }
  return model;
}

ModelScore ScoreModel(const ModelPredictions& model,
                      const std::vector<MultiLabelGroundTruth>& truth,
                      const std::map<std::string, ClassId>& originals,
                      EmptySetPolicy policy) {
  const MetricValue real = RealAccuracy(model.top1, truth, policy);
  std::map<std::string, ClassId> predicted;
  std::map<std::string, ClassId> expected;
  for (const auto& gt : truth) {
    auto original = originals.find(gt.image_id);
    if (original == originals.end()) {
      throw Error(ErrorCode::kNotFound,
                  "no original label for image '" + gt.image_id + "'",
                  "image_id");
    }
    expected.emplace(gt.image_id, original->second);
    predicted.emplace(gt.image_id, model.top1.at(gt.image_id));
  }
  const MetricValue top1 = Top1Accuracy(predicted, expected);
  return {model.model_id, real.value, top1.value, real.n_evaluated};
}

ModelSelection SelectModel(const std::vector<ModelPredictions>& candidates,
                           const std::vector<MultiLabelGroundTruth>& truth,
                           const std::map<std::string, ClassId>& originals,
                           EmptySetPolicy policy) {
  if (candidates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no candidate models");
  }
  const auto& reference = candidates.front().top1;
  for (const auto& candidate : candidates) {
    const bool same = candidate.top1.size() == reference.size() &&
                      std::equal(candidate.top1.begin(), candidate.top1.end(),
                                 reference.begin(), [](const auto& a, const auto& b) {
                                   return a.first == b.first;
                                 });
    if (!same) {
      throw Error(ErrorCode::kInvalidArgument,
                  "model '" + candidate.model_id +
                      "' covers a different image set than '" +
                      candidates.front().model_id + "'",
                  "model_id");
    }
  }
  ModelSelection selection;
  for (const auto& candidate : candidates) {
    selection.leaderboard.push_back(
        ScoreModel(candidate, truth, originals, policy));
  }
  std::sort(selection.leaderboard.begin(), selection.leaderboard.end(),
            [](const ModelScore& a, const ModelScore& b) {
              return a.model_id < b.model_id;
            });
  for (std::size_t i = 1; i < selection.leaderboard.size(); ++i) {
    if (selection.leaderboard[i].model_id ==
        selection.leaderboard[i - 1].model_id) {
      throw Error(ErrorCode::kDuplicate,
                  "duplicate candidate '" + selection.leaderboard[i].model_id +
                      "'",
                  "model_id");
    }
  }
  // Leaderboard is in model_id order, so strict > keeps the smallest id on
  // ties.
  const ModelScore* best = &selection.leaderboard.front();
  for (const auto& row : selection.leaderboard) {
    if (row.real_accuracy > best->real_accuracy) best = &row;
  }
  selection.winner = *best;
  return selection;
}

void WriteLeaderboardCsv(std::ostream& out,
                         const std::vector<ModelScore>& rows) {
  out << "model_id,real_accuracy,top1_accuracy,n_evaluated\n";
  for (const auto& row : rows) {
    out << row.model_id << ',' << FormatDouble(row.real_accuracy) << ','
        << FormatDouble(row.top1_accuracy) << ',' << row.n_evaluated << '\n';
  }
}

void WriteProposals(std::ostream& out, const std::vector<ProposalSet>& sets) {
  for (const auto& set : sets) {
    OrderedJson line;
    line["image_id"] = set.image_id;
    line["proposals"] = set.ranked_labels;
    out << line.dump() << '\n';
  }
}

std::vector<ProposalSet> ParseProposals(std::istream& in,
                                        const ClassCatalog& catalog) {
  std::vector<ProposalSet> sets;
  ForEachJsonLine(in, [&](std::size_t line, const Json& object) {
    ProposalSet set;
    set.image_id = object.at("image_id").get<std::string>();
    LabelSet seen;
    for (const auto& label : object.at("proposals")) {
      const auto id = label.get<ClassId>();
      if (!catalog.contains(id) || !seen.insert(id).second) {
        throw Error(ErrorCode::kParse,
                    "line " + std::to_string(line) +
                        ": invalid or repeated proposal " + std::to_string(id),
                    "proposals");
      }
      set.ranked_labels.push_back(id);
    }
    set.groups = PartitionIntoGroups(set.ranked_labels);
    sets.push_back(std::move(set));
  });
  return sets;
}

}  // namespace relabel
