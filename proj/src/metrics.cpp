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

#include "relabel/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace relabel {

double LabelCountDistribution::FractionAtLeast(std::size_t min_labels) const {
  std::size_t total = 0;
  for (auto it = counts.lower_bound(min_labels); it != counts.end(); ++it) {
    total += it->second;
  }
  return n_total == 0 ? 0.0
                      : static_cast<double>(total) / static_cast<double>(n_total);
}

std::map<std::string, std::size_t> LabelCountDistribution::RolledUpCounts()
    const {
  std::map<std::string, std::size_t> out{{"0", 0}, {"1", 0}, {"2", 0}, {"3+", 0}};
  for (const auto& [labels, images] : counts) {
    out[labels >= 3 ? "3+" : std::to_string(labels)] += images;
  }
  return out;
}

LabelCountDistribution ComputeLabelCountDistribution(
    std::span<const MultiLabelGroundTruth> labels) {
  if (labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "label-count distribution needs at least one image");
  }
  LabelCountDistribution dist;
  dist.n_total = labels.size();
  for (const auto& gt : labels) ++dist.counts[gt.labels.size()];
  for (const auto& [k, count] : dist.counts) {
    dist.fractions[k] =
        static_cast<double>(count) / static_cast<double>(dist.n_total);
  }
  return dist;
}

std::optional<double> MarginOfError(double p, std::size_t n, MarginMode mode) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "proportion outside [0, 1]", "p");
  }
  if (n <= 1) return std::nullopt;
  const double trials = static_cast<double>(n);
  const double sd = std::sqrt(p * (1.0 - p) / trials);
  return mode == MarginMode::kWald ? kZ95 * sd : kZ95 * sd / std::sqrt(trials);
}

std::vector<HeatmapCell> AccuracyByLabelCount(
    const ModelPredictions& model,
    std::span<const MultiLabelGroundTruth> final_labels,
    const std::map<std::string, ClassId>& originals, MarginMode mode) {
  if (final_labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no images to group");
  }
  std::map<std::size_t, HeatmapCell> cells;
  for (const auto& gt : final_labels) {
    auto predicted = model.top1.find(gt.image_id);
    auto original = originals.find(gt.image_id);
    if (predicted == model.top1.end() || original == originals.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "image '" + gt.image_id + "' lacks a prediction from '" +
                      model.model_id + "' or an original label",
                  "image_id");
    }
    HeatmapCell& cell = cells[gt.labels.size()];
    ++cell.n;
    if (predicted->second == original->second) ++cell.n_correct;
  }
  std::vector<HeatmapCell> out;
  for (auto& [label_count, cell] : cells) {
    cell.model_id = model.model_id;
    cell.label_count = label_count;
    if (cell.n > 1) {
      const double p =
          static_cast<double>(cell.n_correct) / static_cast<double>(cell.n);
      cell.accuracy = p;
      cell.half_width = MarginOfError(p, cell.n, mode);
    }
    out.push_back(cell);
  }
  return out;
}

RegressionFit OlsRegression(std::span<const Point2> points) {
  if (points.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "regression needs at least two points");
  }
  const bool same_x = std::all_of(points.begin(), points.end(), [&](const Point2& p) {
    return p.x == points.front().x;
  });
  if (same_x) {
    throw Error(ErrorCode::kDegenerate,
                "regression is undefined: every x value is equal");
  }
  const double n = static_cast<double>(points.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& p : points) {
    mean_x += p.x;
    mean_y += p.y;
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    const double dx = p.x - mean_x;
    const double dy = p.y - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RegressionFit fit;
  fit.n_points = points.size();
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double r = p.y - (fit.intercept + fit.slope * p.x);
    ss_res += r * r;
  }
  // Constant y is fitted exactly by the zero-slope line.
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  fit.residual_sd =
      points.size() > 2 ? std::sqrt(ss_res / (n - 2.0)) : 0.0;
  return fit;
}

ZooEvaluation EvaluateModelZoo(
    const std::vector<ModelPredictions>& models,
    const std::vector<MultiLabelGroundTruth>& final_labels,
    const std::map<std::string, ClassId>& originals, EmptySetPolicy policy) {
  if (models.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no models to evaluate");
  }
  for (const auto& model : models) {
    for (const auto& gt : final_labels) {
      if (!model.top1.count(gt.image_id)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "model '" + model.model_id + "' does not cover image '" +
                        gt.image_id + "'",
                    "model_id");
      }
    }
  }
  ZooEvaluation zoo;
  for (const auto& model : models) {
    zoo.leaderboard.push_back(
        {ScoreModel(model, final_labels, originals, policy), 0.0, 0.0, false});
  }
  std::sort(zoo.leaderboard.begin(), zoo.leaderboard.end(),
            [](const ZooEntry& a, const ZooEntry& b) {
              return a.score.model_id < b.score.model_id;
            });

  std::vector<Point2> points;
  for (const auto& entry : zoo.leaderboard) {
    points.push_back({entry.score.top1_accuracy, entry.score.real_accuracy});
  }
  try {
    zoo.regression = OlsRegression(points);
  } catch (const Error& e) {
    zoo.regression_error = e;
    return zoo;
  }
  const RegressionFit& fit = *zoo.regression;
  for (auto& entry : zoo.leaderboard) {
    entry.fitted = fit.intercept + fit.slope * entry.score.top1_accuracy;
    entry.residual = entry.score.real_accuracy - entry.fitted;
    entry.outlier = fit.residual_sd > 0.0 &&
                    std::fabs(entry.residual) > kOutlierResidualSds * fit.residual_sd;
  }
  return zoo;
}

std::string_view ToString(QualityCategory category) {
  switch (category) {
    case QualityCategory::kNoValidProposal: return "no_valid_proposal";
    case QualityCategory::kLowResolutionAmbiguous: return "low_resolution_ambiguous";
    case QualityCategory::kFineGrainedNeedsExpert: return "fine_grained_needs_expert";
    case QualityCategory::kUncommonOrAtypicalViewpoint: return "uncommon_or_atypical_viewpoint";
  }
  return "unknown";
}

std::string_view ToString(GroundTruthStance stance) {
  switch (stance) {
    case GroundTruthStance::kAgree: return "agree";
    case GroundTruthStance::kDisagree: return "disagree";
    case GroundTruthStance::kUncertain: return "uncertain";
  }
  return "unknown";
}

QualityCategory ParseQualityCategory(std::string_view text) {
  for (auto category : kAllQualityCategories) {
    if (ToString(category) == text) return category;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown quality_category '" + std::string(text) + "'",
              "quality_category");
}

GroundTruthStance ParseGroundTruthStance(std::string_view text) {
  for (auto stance : kAllStances) {
    if (ToString(stance) == text) return stance;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown gt_stance '" + std::string(text) + "'", "gt_stance");
}

double TriageSummary::CategoryFraction(QualityCategory category) const {
  auto it = category_counts.find(category);
  const std::size_t count = it == category_counts.end() ? 0 : it->second;
  return static_cast<double>(count) / static_cast<double>(n);
}

double TriageSummary::StanceFraction(GroundTruthStance stance) const {
  auto it = stance_counts.find(stance);
  const std::size_t count = it == stance_counts.end() ? 0 : it->second;
  return static_cast<double>(count) / static_cast<double>(n);
}

TriageSummary SummarizeTriage(std::span<const TriageRecord> records) {
  if (records.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no triage records");
  }
  TriageSummary summary;
  for (auto category : kAllQualityCategories) summary.category_counts[category] = 0;
  for (auto stance : kAllStances) summary.stance_counts[stance] = 0;
  for (const auto& record : records) {
    ++summary.n;
    ++summary.category_counts[record.quality_category];
    ++summary.stance_counts[record.gt_stance];
  }
  return summary;
}

}  // namespace relabel
