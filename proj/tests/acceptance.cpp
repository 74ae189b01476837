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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cli_pipeline.hpp"
#include "relabel/agreement.hpp"
#include "relabel/metrics.hpp"
#include "relabel/proposals.hpp"
#include "relabel/workflow.hpp"

namespace relabel {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), format, a, b);
  return buf;
}

// Brute force: compare every pair of sets element by element, then scan
// the first set for the original.
bool OracleAgreed(const std::vector<std::vector<int>>& sets, int original) {
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = 0; b < sets.size(); ++b) {
      if (sets[a].size() != sets[b].size()) return false;
      for (int x : sets[a]) {
        if (std::count(sets[b].begin(), sets[b].end(), x) == 0) return false;
      }
    }
  }
  return std::count(sets[0].begin(), sets[0].end(), original) > 0;
}

Outcome AgreementOracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> n_annotators(1, 4), size(0, 5), cls(0, 19), coin(0, 1);
  std::size_t mismatches = 0, agreed = 0;
  const std::size_t kCases = 10000;
  for (std::size_t i = 0; i < kCases; ++i) {
    std::vector<std::vector<int>> sets(n_annotators(rng));
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (s > 0 && coin(rng)) {
        sets[s] = sets[0];
        std::shuffle(sets[s].begin(), sets[s].end(), rng);
        continue;
      }
      const int n = size(rng);
      while (static_cast<int>(sets[s].size()) < n) {
        const int c = cls(rng);
        if (std::count(sets[s].begin(), sets[s].end(), c) == 0) sets[s].push_back(c);
      }
    }
    const int original = cls(rng);
    std::vector<LabelSet> label_sets;
    for (const auto& s : sets) label_sets.emplace_back(s.begin(), s.end());
    const bool got = CheckAgreement(label_sets, original).agreed();
    const bool want = OracleAgreed(sets, original);
    agreed += want;
    mismatches += got != want;
  }
  const double elapsed = Seconds(start);
  return {mismatches == 0 && elapsed < 5.0,
          std::to_string(kCases) + " cases, " + std::to_string(agreed) + " agreed, " +
              std::to_string(mismatches) + " mismatches, " + Fmt("%.2fs", elapsed)};
}

Outcome PipelineDeterminism() {
  const auto start = Clock::now();
  const std::filesystem::path root = std::filesystem::path(RELABEL_TEST_TMP) / "acceptance";
  const std::string first = testing::RunFullPipeline(root / "a", 42);
  if (!first.empty()) return {false, "first run: " + first};
  const std::string second = testing::RunFullPipeline(root / "b", 42);
  if (!second.empty()) return {false, "second run: " + second};
  const auto a = testing::ArtifactDigest(root / "a" / "ws");
  const auto b = testing::ArtifactDigest(root / "b" / "ws");
  std::size_t differing = 0;
  std::string first_diff;
  for (const auto& [path, body] : a) {
    auto it = b.find(path);
    if (it == b.end() || it->second != body) {
      if (first_diff.empty()) first_diff = path;
      ++differing;
    }
  }
  if (a.size() != b.size() && first_diff.empty()) first_diff = "file set";
  const double elapsed = Seconds(start);
  const bool has_core = a.count("agreement/queue.txt") && a.count("final_labels.jsonl") &&
                        a.count("proposals.jsonl");
  return {differing == 0 && a.size() == b.size() && has_core && elapsed < 30.0,
          std::to_string(a.size()) + " artifacts, " + std::to_string(differing) +
              " differ" + (first_diff.empty() ? "" : " (" + first_diff + ")") + ", " +
              Fmt("%.2fs", elapsed)};
}

Outcome LabelDistribution() {
  const std::map<std::size_t, std::size_t> counts{{0, 129}, {1, 5083}, {2, 2385}, {3, 2403}};
  std::vector<MultiLabelGroundTruth> labels;
  for (const auto& [n_labels, n_images] : counts) {
    for (std::size_t i = 0; i < n_images; ++i) {
      MultiLabelGroundTruth gt{"img" + std::to_string(labels.size()), {}};
      for (std::size_t c = 0; c < n_labels; ++c) gt.labels.insert(static_cast<ClassId>(c));
      labels.push_back(std::move(gt));
    }
  }
  const auto d = ComputeLabelCountDistribution(labels);
  const double p0 = 100 * d.fractions.at(0), p1 = 100 * d.fractions.at(1);
  const double p2 = 100 * d.fractions.at(2), p3 = 100 * d.FractionAtLeast(3);
  const double multi = 100 * d.FractionAtLeast(2);
  const bool ok = std::abs(p0 - 1.29) < 0.01 && std::abs(p1 - 50.83) < 0.01 &&
                  std::abs(p2 - 23.85) < 0.01 && std::abs(p3 - 24.03) < 0.01 &&
                  std::abs(multi - 47.88) < 0.01 && d.n_total == 10000;
  return {ok, Fmt("0:%.2f 1:%.2f ", p0, p1) + Fmt("2:%.2f 3+:%.2f ", p2, p3) +
                  Fmt(">=2:%.2f", multi)};
}

Outcome RefinementSlices() {
  std::vector<std::string> queue;
  for (int i = 0; i < 6425; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "img%05d", i);
    queue.push_back(id);
  }
  const auto slices = AssignRefinement(queue, {"e0", "e1", "e2", "e3", "e4"});
  bool ok = slices.size() == 5;
  std::vector<std::string> joined;
  std::string sizes;
  for (const auto& s : slices) {
    ok = ok && s.image_ids.size() == 1285;
    joined.insert(joined.end(), s.image_ids.begin(), s.image_ids.end());
    sizes += (sizes.empty() ? "" : " ") + std::to_string(s.image_ids.size());
  }
  ok = ok && joined == queue;
  return {ok, std::to_string(slices.size()) + " slices: " + sizes};
}

Outcome MarginOfErrorChecks() {
  bool ok = MarginOfError(0.0, 50).value() == 0.0;
  const double half = MarginOfError(0.5, 100).value();
  ok = ok && std::abs(half - 0.0980) < 1e-4;
  ok = ok && !MarginOfError(0.5, 1).has_value() && !MarginOfError(0.5, 0).has_value();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> n(2, 100000);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double pi = p(rng);
    const std::size_t ni = n(rng);
    worst = std::max(worst, std::abs(*MarginOfError(pi, ni) - *MarginOfError(1.0 - pi, ni)));
  }
  ok = ok && worst < 1e-12;
  return {ok, Fmt("p=0.5,n=100 -> %.6f; max asymmetry %.2e", half, worst)};
}

// Closed-form normal equations in long double, solved by Cramer's rule.
std::pair<long double, long double> NormalEquations(const std::vector<Point2>& pts) {
  long double n = pts.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    sx += p.x;
    sy += p.y;
    sxx += static_cast<long double>(p.x) * p.x;
    sxy += static_cast<long double>(p.x) * p.y;
  }
  const long double det = n * sxx - sx * sx;
  return {(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

Outcome Regression() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> x(0.5, 0.9), noise(-0.02, 0.02);
  std::vector<Point2> line;
  for (int i = 0; i < 40; ++i) {
    const double xi = x(rng);
    line.push_back({xi, 0.5788 * xi + 0.3});
  }
  const auto exact = OlsRegression(line);
  bool ok = std::abs(exact.slope - 0.5788) < 1e-9 && std::abs(exact.r_squared - 1.0) < 1e-9;

  std::vector<Point2> scatter;
  for (int i = 0; i < 57; ++i) {
    const double xi = x(rng);
    scatter.push_back({xi, 0.6 * xi + 0.25 + noise(rng)});
  }
  const auto fit = OlsRegression(scatter);
  const auto [slope, intercept] = NormalEquations(scatter);
  const double ds = std::abs(fit.slope - static_cast<double>(slope));
  const double di = std::abs(fit.intercept - static_cast<double>(intercept));
  ok = ok && ds < 1e-9 && di < 1e-9 && fit.n_points == 57;
  return {ok, Fmt("noiseless slope %.10f r2 %.10f; ", exact.slope, exact.r_squared) +
                  Fmt("57-point deltas %.1e / %.1e", ds, di)};
}

Outcome RealAtLeastTop1() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> cls(0, 9), extra(0, 3), images(20, 200), empty(0, 9);
  std::size_t violations = 0;
  double min_gap = 1.0;
  for (int d = 0; d < 100; ++d) {
    std::map<std::string, ClassId> predictions, originals;
    std::vector<MultiLabelGroundTruth> truth;
    const int n = images(rng);
    for (int i = 0; i < n; ++i) {
      const std::string id = "d" + std::to_string(d) + "_" + std::to_string(i);
      if (empty(rng) == 0) continue;  // empty-set images fall outside the comparison
      const ClassId original = cls(rng);
      MultiLabelGroundTruth gt{id, {original}};
      for (int e = extra(rng); e > 0; --e) gt.labels.insert(cls(rng));
      truth.push_back(std::move(gt));
      originals[id] = original;
      predictions[id] = cls(rng);
    }
    if (truth.empty()) continue;
    const double real = RealAccuracy(predictions, truth).value;
    const double top1 = Top1Accuracy(predictions, originals).value;
    min_gap = std::min(min_gap, real - top1);
    violations += real < top1;
  }
  return {violations == 0, std::to_string(violations) + " violations, min gap " +
                               Fmt("%.4f", min_gap)};
}

Outcome ProposalRanking() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> logit(-6.0, 6.0);
  std::uniform_int_distribution<int> tie(0, 19);
  std::size_t failures = 0;
  for (int v = 0; v < 1000; ++v) {
    PredictionRecord raw{"m", "img", std::vector<double>(1000), {}};
    for (auto& s : raw.probs) s = tie(rng) == 0 ? 1.0 : logit(rng) + 6.0;
    PredictionRecord transformed = raw;
    for (auto& s : transformed.probs) s = std::exp(s);

    std::vector<ClassId> order(raw.probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](ClassId a, ClassId b) {
      if (raw.probs[a] != raw.probs[b]) return raw.probs[a] > raw.probs[b];
      return a < b;
    });
    order.resize(20);

    const auto got = GenerateProposals(raw, 20).ranked_labels;
    failures += got != order || GenerateProposals(transformed, 20).ranked_labels != got;
  }
  return {failures == 0, "1000 vectors, " + std::to_string(failures) + " failures"};
}

Outcome TriagePercentages() {
  std::vector<TriageRecord> records;
  const std::pair<QualityCategory, int> categories[] = {
      {QualityCategory::kNoValidProposal, 17},
      {QualityCategory::kLowResolutionAmbiguous, 8},
      {QualityCategory::kFineGrainedNeedsExpert, 30},
      {QualityCategory::kUncommonOrAtypicalViewpoint, 23}};
  std::vector<GroundTruthStance> stances;
  stances.insert(stances.end(), 21, GroundTruthStance::kAgree);
  stances.insert(stances.end(), 15, GroundTruthStance::kDisagree);
  stances.insert(stances.end(), 42, GroundTruthStance::kUncertain);
  for (const auto& [category, n] : categories) {
    for (int i = 0; i < n; ++i) {
      records.push_back({"t" + std::to_string(records.size()), category,
                         stances[records.size()], "x"});
    }
  }
  const auto s = SummarizeTriage(records);
  bool ok = s.n == 78;
  std::string detail;
  for (const auto& [category, n] : categories) {
    const double got = 100 * s.CategoryFraction(category);
    ok = ok && std::abs(got - 100.0 * n / 78.0) < 1e-9;
    detail += Fmt("%.2f ", got);
  }
  detail += "|";
  const std::pair<GroundTruthStance, int> stance_counts[] = {
      {GroundTruthStance::kAgree, 21},
      {GroundTruthStance::kDisagree, 15},
      {GroundTruthStance::kUncertain, 42}};
  for (const auto& [stance, n] : stance_counts) {
    const double got = 100 * s.StanceFraction(stance);
    ok = ok && std::abs(got - 100.0 * n / 78.0) < 1e-9;
    detail += Fmt(" %.2f", got);
  }
  ok = ok && std::abs(100 * s.CategoryFraction(QualityCategory::kNoValidProposal) - 21.79) < 0.01;
  return {ok, detail};
}

}  // namespace
}  // namespace relabel

int main() {
  using relabel::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"agreement-oracle", relabel::AgreementOracle},
      {"cli-pipeline-determinism", relabel::PipelineDeterminism},
      {"label-count-distribution", relabel::LabelDistribution},
      {"refinement-slices", relabel::RefinementSlices},
      {"margin-of-error", relabel::MarginOfErrorChecks},
      {"ols-regression", relabel::Regression},
      {"real-at-least-top1", relabel::RealAtLeastTop1},
      {"proposal-ranking", relabel::ProposalRanking},
      {"triage-percentages", relabel::TriagePercentages},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                outcome.detail.c_str());
    failed += !outcome.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
