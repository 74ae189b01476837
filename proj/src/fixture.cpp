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

#include "relabel/fixture.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <vector>

#include "relabel/error.hpp"

namespace relabel {
namespace {

std::string Padded(const char* prefix, std::size_t value, int width) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%s%0*zu", prefix, width, value);
  return buffer;
}

// Label-count mix for synthetic truth: 0..4 labels per image.
constexpr double kLabelCountWeights[] = {0.02, 0.50, 0.25, 0.15, 0.08};

std::size_t DrawLabelCount(SplitMix64& rng, std::size_t classes) {
  double u = rng.Uniform();
  std::size_t count = 0;
  for (double w : kLabelCountWeights) {
    if (u < w) break;
    u -= w;
    ++count;
  }
  return std::min({count, std::size(kLabelCountWeights) - 1, classes});
}

}  // namespace

Json MakeFixture(const std::filesystem::path& out, const FixtureOptions& options) {
  if (options.images == 0 || options.classes < 2 || options.models == 0 ||
      options.standard_annotators + options.experienced_annotators < 2 ||
      options.experienced_annotators == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "fixture needs images, >= 2 classes, models, >= 2 annotators and "
                "an experienced annotator");
  }
  SplitMix64 rng(options.seed ^ 0x6a09e667f3bcc909ULL);
  std::filesystem::create_directories(out);

  std::ostringstream catalog;
  for (std::size_t c = 0; c < options.classes; ++c) {
    OrderedJson line;
    line["class_id"] = c;
    line["name"] = Padded("class_", c, 3);
    line["synonyms"] = {Padded("synonym_a_", c, 3), Padded("synonym_b_", c, 3)};
    std::vector<std::string> exemplars;
    for (std::size_t j = 0; j < 10; ++j) {
      exemplars.push_back("exemplars/" + Padded("c", c, 3) + "/" + std::to_string(j) + ".jpg");
    }
    line["exemplars"] = exemplars;
    catalog << line.dump() << '\n';
  }

  std::vector<std::string> ids;
  std::vector<std::set<std::size_t>> truth(options.images);
  std::vector<std::size_t> originals(options.images);
  std::ostringstream images;
  std::ostringstream truth_out;
  std::ostringstream reference;
  for (std::size_t i = 0; i < options.images; ++i) {
    ids.push_back(Padded("img_", i, 5));
    const std::size_t count = DrawLabelCount(rng, options.classes);
    while (truth[i].size() < count) truth[i].insert(rng.Below(options.classes));
    // The dataset's single label is usually one of the true objects.
    if (!truth[i].empty() && rng.Uniform() < 0.9) {
      auto it = truth[i].begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng.Below(truth[i].size())));
      originals[i] = *it;
    } else {
      originals[i] = rng.Below(options.classes);
    }
    OrderedJson image;
    image["image_id"] = ids[i];
    image["uri"] = "images/" + ids[i] + ".jpg";
    image["original_label"] = originals[i];
    images << image.dump() << '\n';

    OrderedJson t;
    t["image_id"] = ids[i];
    t["labels"] = std::vector<std::size_t>(truth[i].begin(), truth[i].end());
    truth_out << t.dump() << '\n';
    // Prior reference labels: the truth, plus the original label as earlier
    // relabeling efforts tend to keep it.
    std::set<std::size_t> ref = truth[i];
    if (!ref.empty()) ref.insert(originals[i]);
    OrderedJson r;
    r["image_id"] = ids[i];
    r["labels"] = std::vector<std::size_t>(ref.begin(), ref.end());
    reference << r.dump() << '\n';
  }

  std::ostringstream predictions;
  Json model_names = Json::array();
  for (std::size_t m = 0; m < options.models; ++m) {
    const std::string model = Padded("model_", m, 2);
    model_names.push_back(model);
    const double skill = 0.55 + 0.4 * static_cast<double>(m + 1) /
                                    static_cast<double>(options.models + 1);
    for (std::size_t i = 0; i < options.images; ++i) {
      std::vector<double> scores(options.classes);
      for (auto& s : scores) s = rng.Uniform() * 0.05;
      for (std::size_t c : truth[i]) scores[c] += 0.2 + 0.2 * rng.Uniform();
      std::size_t top;
      if (rng.Uniform() < skill) {
        top = (truth[i].empty() || rng.Uniform() < 0.6) ? originals[i]
                                                       : *truth[i].begin();
      } else {
        top = rng.Below(options.classes);
      }
      scores[top] += 1.0;
      double total = 0.0;
      for (double s : scores) total += s;
      std::ostringstream line;
      line << "{\"model_id\":\"" << model << "\",\"image_id\":\"" << ids[i]
           << "\",\"probs\":[";
      for (std::size_t c = 0; c < scores.size(); ++c) {
        if (c) line << ',';
        // Fixed precision keeps the files compact and byte-stable.
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "%.6f", scores[c] / total);
        line << buffer;
      }
      line << "]}";
      predictions << line.str() << '\n';
    }
  }

  std::ostringstream roster;
  const std::size_t total_annotators =
      options.standard_annotators + options.experienced_annotators;
  for (std::size_t a = 0; a < total_annotators; ++a) {
    const bool experienced = a >= options.standard_annotators;
    OrderedJson line;
    line["annotator_id"] = Padded(experienced ? "expert_" : "annotator_", a, 2);
    line["experience_tier"] = experienced ? "experienced" : "standard";
    line["secret"] = "secret-" + std::to_string(a);
    roster << line.dump() << '\n';
  }

  const auto write = [&](const char* name, const std::ostringstream& body) {
    WriteFileAtomic(out / name, body.str());
  };
  write("catalog.jsonl", catalog);
  write("images.jsonl", images);
  write("predictions.jsonl", predictions);
  write("reference.jsonl", reference);
  write("truth.jsonl", truth_out);
  write("annotators.jsonl", roster);

  Json summary;
  summary["images"] = options.images;
  summary["classes"] = options.classes;
  summary["models"] = model_names;
  summary["annotators"] = total_annotators;
  summary["seed"] = options.seed;
  return summary;
}

}  // namespace relabel
