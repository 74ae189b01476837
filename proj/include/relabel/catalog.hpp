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

#ifndef RELABEL_CATALOG_HPP_
#define RELABEL_CATALOG_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace relabel {

using ClassId = std::int32_t;
using LabelSet = std::set<ClassId>;

struct ClassEntry {
  ClassId class_id = 0;
  std::string name;
  std::vector<std::string> synonyms;
  std::vector<std::string> exemplar_refs;

  bool operator==(const ClassEntry&) const = default;
};

// The K classes of a dataset, indexed densely by class_id.
class ClassCatalog {
 public:
  ClassCatalog() = default;
  // Validates ids are unique and cover [0, K) and names are non-empty.
  explicit ClassCatalog(std::vector<ClassEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool contains(ClassId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < entries_.size();
  }
  const ClassEntry& at(ClassId id) const;
  const std::vector<ClassEntry>& entries() const { return entries_; }

  bool operator==(const ClassCatalog&) const = default;

 private:
  std::vector<ClassEntry> entries_;
};

struct ImageRecord {
  std::string image_id;
  std::string uri;
  ClassId original_label = 0;

  bool operator==(const ImageRecord&) const = default;
};

// Images ordered by image_id.
class ImageRegistry {
 public:
  ImageRegistry() = default;
  ImageRegistry(std::vector<ImageRecord> images, const ClassCatalog& catalog);

  std::size_t size() const { return images_.size(); }
  bool contains(std::string_view image_id) const;
  const ImageRecord& at(std::string_view image_id) const;
  const std::vector<ImageRecord>& images() const { return images_; }
  std::vector<std::string> image_ids() const;
  std::map<std::string, ClassId> originals() const;

  bool operator==(const ImageRegistry&) const = default;

 private:
  std::vector<ImageRecord> images_;
};

struct ScoredClass {
  ClassId class_id = 0;
  double score = 0.0;

  bool operator==(const ScoredClass&) const = default;
};

// Either a dense score vector of length K or a pre-ranked list. Scores may be
// probabilities or logits: only their order is consumed downstream.
struct PredictionRecord {
  std::string model_id;
  std::string image_id;
  std::vector<double> probs;
  std::vector<ScoredClass> ranked_topk;

  bool has_probs() const { return !probs.empty(); }
  bool operator==(const PredictionRecord&) const = default;
};

struct MultiLabelGroundTruth {
  std::string image_id;
  LabelSet labels;

  bool operator==(const MultiLabelGroundTruth&) const = default;
};

// Checks the per-record invariants against the catalog. Throws Error.
void ValidatePrediction(const PredictionRecord& record,
                        const ClassCatalog& catalog);

struct IngestSummary {
  std::size_t added = 0;
  std::size_t replaced = 0;
  std::size_t unchanged = 0;
};

// Prediction records keyed by (model_id, image_id). Ingestion is
// all-or-nothing and single-writer; readers take an immutable snapshot.
class PredictionStore {
 public:
  using Key = std::pair<std::string, std::string>;
  using Snapshot = std::map<Key, PredictionRecord>;

  PredictionStore();

  IngestSummary Ingest(std::vector<PredictionRecord> records,
                       const ClassCatalog& catalog,
                       const ImageRegistry& registry);

  std::shared_ptr<const Snapshot> snapshot() const;
  std::optional<PredictionRecord> Find(std::string_view model_id,
                                       std::string_view image_id) const;
  std::vector<std::string> model_ids() const;
  // All records of one model, ordered by image_id.
  std::vector<PredictionRecord> ForModel(std::string_view model_id) const;
  std::size_t size() const;

 private:
  mutable std::mutex write_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

// Line-delimited JSON formats.
ClassCatalog ParseCatalog(std::istream& in);
ClassCatalog LoadCatalog(const std::filesystem::path& path);
void WriteCatalog(std::ostream& out, const ClassCatalog& catalog);

ImageRegistry ParseRegistry(std::istream& in, const ClassCatalog& catalog);
ImageRegistry LoadRegistry(const std::filesystem::path& path,
                           const ClassCatalog& catalog);
void WriteRegistry(std::ostream& out, const ImageRegistry& registry);

std::vector<PredictionRecord> ParsePredictions(std::istream& in,
                                               const ClassCatalog& catalog,
                                               const ImageRegistry& registry);
// Parses and ingests one file; nothing is stored if any line is invalid.
IngestSummary IngestPredictions(const std::filesystem::path& path,
                                const ClassCatalog& catalog,
                                const ImageRegistry& registry,
                                PredictionStore& store);
void WritePredictions(std::ostream& out,
                      const std::vector<PredictionRecord>& records);
void WriteStore(std::ostream& out, const PredictionStore& store);

// Registry is optional; when given, unknown image ids are rejected.
std::vector<MultiLabelGroundTruth> ParseGroundTruth(
    std::istream& in, const ClassCatalog& catalog,
    const ImageRegistry* registry = nullptr);
std::vector<MultiLabelGroundTruth> LoadGroundTruth(
    const std::filesystem::path& path, const ClassCatalog& catalog,
    const ImageRegistry* registry = nullptr);
void WriteGroundTruth(std::ostream& out,
                      const std::vector<MultiLabelGroundTruth>& labels);

}  // namespace relabel

#endif  // RELABEL_CATALOG_HPP_
