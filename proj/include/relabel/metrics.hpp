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

#ifndef RELABEL_METRICS_HPP_
#define RELABEL_METRICS_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relabel/catalog.hpp"
#include "relabel/error.hpp"
#include "relabel/proposals.hpp"

namespace relabel {

struct LabelCountDistribution {
  std::map<std::size_t, std::size_t> counts;  // label count -> images
  std::map<std::size_t, double> fractions;    // label count -> share of N
  std::size_t n_total = 0;

  // Share of images with at least `min_labels` labels.
  double FractionAtLeast(std::size_t min_labels) const;
  // Buckets 0, 1, 2 and a "3+" rollup.
  std::map<std::string, std::size_t> RolledUpCounts() const;
};

LabelCountDistribution ComputeLabelCountDistribution(
    std::span<const MultiLabelGroundTruth> labels);

enum class MarginMode {
  kWald,       // 1.96 * sqrt(p(1-p)/n)
  kAsWritten,  // 1.96 * sqrt(p(1-p)/n) / sqrt(n), the literal composition
};

inline constexpr double kZ95 = 1.96;

// 95% half-width for a proportion p observed over n trials; nullopt when
// n <= 1.
std::optional<double> MarginOfError(double p, std::size_t n,
                                    MarginMode mode = MarginMode::kWald);

struct HeatmapCell {
  std::string model_id;
  std::size_t label_count = 0;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  std::optional<double> accuracy;    // undefined when n <= 1
  std::optional<double> half_width;  // undefined when n <= 1
};

// Top-1 accuracy against the original labels, grouped by final label count.
// Cells come out in ascending label count.
std::vector<HeatmapCell> AccuracyByLabelCount(
    const ModelPredictions& model,
    std::span<const MultiLabelGroundTruth> final_labels,
    const std::map<std::string, ClassId>& originals,
    MarginMode mode = MarginMode::kWald);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
  double residual_sd = 0.0;  // sqrt(SS_res / (n - 2)), 0 when n == 2
};

RegressionFit OlsRegression(std::span<const Point2> points);

struct ZooEntry {
  ModelScore score;
  double fitted = 0.0;
  double residual = 0.0;
  bool outlier = false;
};

struct ZooEvaluation {
  std::vector<ZooEntry> leaderboard;  // ordered by model_id
  std::optional<RegressionFit> regression;
  // Set when the (top1, real) points admit no fit.
  std::optional<Error> regression_error;
};

inline constexpr double kOutlierResidualSds = 2.0;

// Scores every model, fits ReaL on top-1 and flags models whose residual
// exceeds twice the residual standard deviation.
ZooEvaluation EvaluateModelZoo(
    const std::vector<ModelPredictions>& models,
    const std::vector<MultiLabelGroundTruth>& final_labels,
    const std::map<std::string, ClassId>& originals,
    EmptySetPolicy policy = EmptySetPolicy::kExclude);

enum class QualityCategory {
  kNoValidProposal,
  kLowResolutionAmbiguous,
  kFineGrainedNeedsExpert,
  kUncommonOrAtypicalViewpoint,
};

enum class GroundTruthStance { kAgree, kDisagree, kUncertain };

std::string_view ToString(QualityCategory category);
std::string_view ToString(GroundTruthStance stance);
QualityCategory ParseQualityCategory(std::string_view text);
GroundTruthStance ParseGroundTruthStance(std::string_view text);

inline constexpr QualityCategory kAllQualityCategories[] = {
    QualityCategory::kNoValidProposal,
    QualityCategory::kLowResolutionAmbiguous,
    QualityCategory::kFineGrainedNeedsExpert,
    QualityCategory::kUncommonOrAtypicalViewpoint,
};
inline constexpr GroundTruthStance kAllStances[] = {
    GroundTruthStance::kAgree,
    GroundTruthStance::kDisagree,
    GroundTruthStance::kUncertain,
};

struct TriageRecord {
  std::string image_id;
  QualityCategory quality_category = QualityCategory::kNoValidProposal;
  GroundTruthStance gt_stance = GroundTruthStance::kUncertain;
  std::string annotator_id;
};

struct TriageSummary {
  std::size_t n = 0;
  std::map<QualityCategory, std::size_t> category_counts;
  std::map<GroundTruthStance, std::size_t> stance_counts;

  double CategoryFraction(QualityCategory category) const;
  double StanceFraction(GroundTruthStance stance) const;
};

TriageSummary SummarizeTriage(std::span<const TriageRecord> records);

}  // namespace relabel

#endif  // RELABEL_METRICS_HPP_
