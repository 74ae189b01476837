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

#include "relabel/reports.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "relabel/io.hpp"

namespace relabel {
namespace {

std::string OptionalNumber(const std::optional<double>& value) {
  return FormatDouble(value ? *value : std::numeric_limits<double>::quiet_NaN());
}

}  // namespace

std::string DistributionJson(const LabelCountDistribution& dist) {
  OrderedJson doc;
  doc["n_total"] = dist.n_total;
  OrderedJson counts = OrderedJson::object();
  OrderedJson fractions = OrderedJson::object();
  OrderedJson percents = OrderedJson::object();
  for (const auto& [labels, count] : dist.counts) {
    const std::string key = std::to_string(labels);
    counts[key] = count;
    fractions[key] = dist.fractions.at(labels);
    percents[key] = FormatPercent(dist.fractions.at(labels));
  }
  doc["counts"] = counts;
  doc["fractions"] = fractions;
  doc["percent"] = percents;

  OrderedJson rolled_counts = OrderedJson::object();
  OrderedJson rolled_percents = OrderedJson::object();
  for (const auto& [bucket, count] : dist.RolledUpCounts()) {
    rolled_counts[bucket] = count;
    rolled_percents[bucket] = FormatPercent(static_cast<double>(count) /
                                            static_cast<double>(dist.n_total));
  }
  doc["rollup_counts"] = rolled_counts;
  doc["rollup_percent"] = rolled_percents;
  doc["at_least_two_fraction"] = dist.FractionAtLeast(2);
  doc["at_least_two_percent"] = FormatPercent(dist.FractionAtLeast(2));
  return doc.dump(2) + "\n";
}

void WriteHeatmapCsv(std::ostream& out, std::span<const HeatmapCell> cells,
                     bool header) {
  if (header) out << "model_id,label_count,n,n_correct,accuracy,half_width\n";
  for (const auto& cell : cells) {
    out << cell.model_id << ',' << cell.label_count << ',' << cell.n << ','
        << cell.n_correct << ',' << OptionalNumber(cell.accuracy) << ','
        << OptionalNumber(cell.half_width) << '\n';
  }
}

void WriteZooLeaderboardCsv(std::ostream& out, const ZooEvaluation& zoo) {
  out << "model_id,real_accuracy,top1_accuracy,n_evaluated\n";
  for (const auto& entry : zoo.leaderboard) {
    out << entry.score.model_id << ',' << FormatDouble(entry.score.real_accuracy)
        << ',' << FormatDouble(entry.score.top1_accuracy) << ','
        << entry.score.n_evaluated << '\n';
  }
}

void WritePlotCsv(std::ostream& out, const ZooEvaluation& zoo) {
  out << "model_id,top1_accuracy,real_accuracy,fitted,residual,outlier\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& entry : zoo.leaderboard) {
    out << entry.score.model_id << ',' << FormatDouble(entry.score.top1_accuracy)
        << ',' << FormatDouble(entry.score.real_accuracy) << ','
        << FormatDouble(zoo.regression ? entry.fitted : nan) << ','
        << FormatDouble(zoo.regression ? entry.residual : nan) << ','
        << (entry.outlier ? 1 : 0) << '\n';
  }
}

std::string RegressionJson(const ZooEvaluation& zoo) {
  OrderedJson doc;
  doc["n_models"] = zoo.leaderboard.size();
  if (zoo.regression) {
    const auto& fit = *zoo.regression;
    doc["slope"] = fit.slope;
    doc["intercept"] = fit.intercept;
    doc["r_squared"] = fit.r_squared;
    doc["r_squared_percent"] = FormatPercent(fit.r_squared);
    doc["n_points"] = fit.n_points;
    doc["residual_sd"] = fit.residual_sd;
    doc["outlier_threshold_sds"] = kOutlierResidualSds;
    OrderedJson outliers = OrderedJson::array();
    for (const auto& entry : zoo.leaderboard) {
      if (entry.outlier) outliers.push_back(entry.score.model_id);
    }
    doc["outliers"] = outliers;
  } else {
    doc["error"] = zoo.regression_error ? zoo.regression_error->what()
                                        : "no regression";
  }
  return doc.dump(2) + "\n";
}

std::string TriageJson(const TriageSummary& summary) {
  OrderedJson doc;
  doc["n"] = summary.n;
  OrderedJson categories = OrderedJson::object();
  for (auto category : kAllQualityCategories) {
    OrderedJson row;
    row["count"] = summary.category_counts.at(category);
    row["fraction"] = summary.CategoryFraction(category);
    row["percent"] = FormatPercent(summary.CategoryFraction(category));
    categories[std::string(ToString(category))] = row;
  }
  doc["quality_category"] = categories;
  OrderedJson stances = OrderedJson::object();
  for (auto stance : kAllStances) {
    OrderedJson row;
    row["count"] = summary.stance_counts.at(stance);
    row["fraction"] = summary.StanceFraction(stance);
    row["percent"] = FormatPercent(summary.StanceFraction(stance));
    stances[std::string(ToString(stance))] = row;
  }
  doc["gt_stance"] = stances;
  return doc.dump(2) + "\n";
}

}  // namespace relabel
