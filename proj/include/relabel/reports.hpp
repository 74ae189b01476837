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

#ifndef RELABEL_REPORTS_HPP_
#define RELABEL_REPORTS_HPP_

#include <iosfwd>
#include <span>
#include <string>

#include "relabel/metrics.hpp"

namespace relabel {

// Report documents. Fractions are written in [0,1]; "*_percent" fields are
// two-decimal strings rounded half-up. Column orders are fixed:
//
//   heatmap.csv      model_id,label_count,n,n_correct,accuracy,half_width
//   leaderboard.csv  model_id,real_accuracy,top1_accuracy,n_evaluated
//   plot.csv         model_id,top1_accuracy,real_accuracy,fitted,residual,outlier
//
// Undefined heatmap values are written as NaN.

std::string DistributionJson(const LabelCountDistribution& dist);
void WriteHeatmapCsv(std::ostream& out, std::span<const HeatmapCell> cells,
                     bool header = true);
void WriteZooLeaderboardCsv(std::ostream& out, const ZooEvaluation& zoo);
void WritePlotCsv(std::ostream& out, const ZooEvaluation& zoo);
std::string RegressionJson(const ZooEvaluation& zoo);
std::string TriageJson(const TriageSummary& summary);

}  // namespace relabel

#endif  // RELABEL_REPORTS_HPP_
