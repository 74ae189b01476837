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

#include "relabel/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "relabel/error.hpp"
#include "relabel/io.hpp"

namespace relabel {
namespace {

std::string LinePrefix(std::size_t line) {
  return "line " + std::to_string(line) + ": ";
}

ClassId ParseClassId(const Json& value, std::size_t line,
                     const char* field) {
  if (!value.is_number_integer()) {
    throw Error(ErrorCode::kParse, LinePrefix(line) + field +
                                       " must be an integer",
                field);
  }
  const auto id = value.get<std::int64_t>();
  if (id < 0 || id > INT32_MAX) {
    throw Error(ErrorCode::kParse,
                LinePrefix(line) + field + " out of range", field);
  }
  return static_cast<ClassId>(id);
}

std::string RequireString(const Json& object, const char* field,
                          std::size_t line) {
  auto it = object.find(field);
  if (it == object.end() || !it->is_string()) {
    throw Error(ErrorCode::kParse,
                LinePrefix(line) + "missing string field '" + field + "'",
                field);
  }
  return it->get<std::string>();
}

std::vector<std::string> OptionalStringArray(const Json& object,
                                             const char* field,
                                             std::size_t line) {
  auto it = object.find(field);
  if (it == object.end() || it->is_null()) return {};
  if (!it->is_array()) {
    throw Error(ErrorCode::kParse,
                LinePrefix(line) + "'" + field + "' must be an array", field);
  }
  std::vector<std::string> values;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw Error(ErrorCode::kParse,
                  LinePrefix(line) + "'" + field + "' must hold strings",
                  field);
    }
    values.push_back(v.get<std::string>());
  }
  return values;
}

void CheckImage(const ImageRegistry& registry, const std::string& image_id,
                std::size_t line) {
  if (!registry.contains(image_id)) {
    throw Error(ErrorCode::kNotFound,
                LinePrefix(line) + "unknown image_id '" + image_id + "'",
                "image_id");
  }
}

}  // namespace

ClassCatalog::ClassCatalog(std::vector<ClassEntry> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "catalog has no classes");
  }
  std::sort(entries_.begin(), entries_.end(),
            [](const ClassEntry& a, const ClassEntry& b) {
              return a.class_id < b.class_id;
            });
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i - 1].class_id == entries_[i].class_id) {
      throw Error(ErrorCode::kDuplicate,
                  "duplicate class_id " + std::to_string(entries_[i].class_id),
                  "class_id");
    }
  }
  for (const auto& entry : entries_) {
    if (entry.class_id < 0 ||
        static_cast<std::size_t>(entry.class_id) >= entries_.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "class_id " + std::to_string(entry.class_id) +
                      " outside [0, " + std::to_string(entries_.size()) + ")",
                  "class_id");
    }
    if (entry.name.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "class " + std::to_string(entry.class_id) +
                      " has an empty name",
                  "name");
    }
  }
}

const ClassEntry& ClassCatalog::at(ClassId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::kNotFound,
                "unknown class_id " + std::to_string(id), "class_id");
  }
  return entries_[static_cast<std::size_t>(id)];
}

ImageRegistry::ImageRegistry(std::vector<ImageRecord> images,
                             const ClassCatalog& catalog)
    : images_(std::move(images)) {
  std::sort(images_.begin(), images_.end(),
            [](const ImageRecord& a, const ImageRecord& b) {
              return a.image_id < b.image_id;
            });
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (images_[i].image_id.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "empty image_id", "image_id");
    }
    if (i > 0 && images_[i - 1].image_id == images_[i].image_id) {
      throw Error(ErrorCode::kDuplicate,
                  "duplicate image_id '" + images_[i].image_id + "'",
                  "image_id");
    }
    if (!catalog.contains(images_[i].original_label)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "image '" + images_[i].image_id +
                      "' has original_label outside the catalog",
                  "original_label");
    }
  }
}

bool ImageRegistry::contains(std::string_view image_id) const {
  auto it = std::lower_bound(
      images_.begin(), images_.end(), image_id,
      [](const ImageRecord& a, std::string_view id) { return a.image_id < id; });
  return it != images_.end() && it->image_id == image_id;
}

const ImageRecord& ImageRegistry::at(std::string_view image_id) const {
  auto it = std::lower_bound(
      images_.begin(), images_.end(), image_id,
      [](const ImageRecord& a, std::string_view id) { return a.image_id < id; });
  if (it == images_.end() || it->image_id != image_id) {
    throw Error(ErrorCode::kNotFound,
                "unknown image_id '" + std::string(image_id) + "'",
                "image_id");
  }
  return *it;
}

std::vector<std::string> ImageRegistry::image_ids() const {
  std::vector<std::string> ids;
  ids.reserve(images_.size());
  for (const auto& image : images_) ids.push_back(image.image_id);
  return ids;
}

std::map<std::string, ClassId> ImageRegistry::originals() const {
  std::map<std::string, ClassId> out;
  for (const auto& image : images_) out.emplace(image.image_id, image.original_label);
  return out;
}

void ValidatePrediction(const PredictionRecord& record,
                        const ClassCatalog& catalog) {
  if (record.model_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty model_id", "model_id");
  }
  if (record.has_probs() == !record.ranked_topk.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "prediction needs exactly one of probs or topk", "probs");
  }
  if (record.has_probs()) {
    if (record.probs.size() != catalog.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "probs has length " + std::to_string(record.probs.size()) +
                      ", expected K=" + std::to_string(catalog.size()),
                  "probs");
    }
    for (double p : record.probs) {
      if (!std::isfinite(p)) {
        throw Error(ErrorCode::kInvalidArgument, "non-finite score", "probs");
      }
      if (p < 0.0) {
        throw Error(ErrorCode::kInvalidArgument, "negative score", "probs");
      }
    }
    return;
  }
  LabelSet seen;
  for (std::size_t i = 0; i < record.ranked_topk.size(); ++i) {
    const auto& [id, score] = record.ranked_topk[i];
    if (!catalog.contains(id)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "topk class_id " + std::to_string(id) + " outside catalog",
                  "topk");
    }
    if (!std::isfinite(score)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite score", "topk");
    }
    if (score < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "negative score", "topk");
    }
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "topk repeats class_id " + std::to_string(id), "topk");
    }
    if (i > 0 && score > record.ranked_topk[i - 1].score) {
      throw Error(ErrorCode::kInvalidArgument,
                  "topk scores must be non-increasing", "topk");
    }
  }
}

PredictionStore::PredictionStore()
    : snapshot_(std::make_shared<const Snapshot>()) {}

IngestSummary PredictionStore::Ingest(std::vector<PredictionRecord> records,
                                      const ClassCatalog& catalog,
                                      const ImageRegistry& registry) {
  std::lock_guard<std::mutex> writer(write_mutex_);
  for (const auto& record : records) {
    ValidatePrediction(record, catalog);
    if (!registry.contains(record.image_id)) {
      throw Error(ErrorCode::kNotFound,
                  "unknown image_id '" + record.image_id + "'", "image_id");
    }
  }
  auto next = std::make_shared<Snapshot>(*snapshot());
  IngestSummary summary;
  for (auto& record : records) {
    Key key{record.model_id, record.image_id};
    auto it = next->find(key);
    if (it == next->end()) {
      next->emplace(std::move(key), std::move(record));
      ++summary.added;
    } else if (it->second == record) {
      ++summary.unchanged;
    } else {
      it->second = std::move(record);
      ++summary.replaced;
    }
  }
  std::lock_guard<std::mutex> lock(snapshot_mutex_);
  snapshot_ = std::move(next);
  return summary;
}

std::shared_ptr<const PredictionStore::Snapshot> PredictionStore::snapshot()
    const {
  std::lock_guard<std::mutex> lock(snapshot_mutex_);
  return snapshot_;
}

std::optional<PredictionRecord> PredictionStore::Find(
    std::string_view model_id, std::string_view image_id) const {
  auto snap = snapshot();
  auto it = snap->find(Key{std::string(model_id), std::string(image_id)});
  if (it == snap->end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> PredictionStore::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& [key, record] : *snapshot()) {
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  }
  return ids;
}

std::vector<PredictionRecord> PredictionStore::ForModel(
    std::string_view model_id) const {
  std::vector<PredictionRecord> out;
  auto snap = snapshot();
  for (auto it = snap->lower_bound(Key{std::string(model_id), std::string()});
       it != snap->end() && it->first.first == model_id; ++it) {
    out.push_back(it->second);
  }
  return out;
}

std::size_t PredictionStore::size() const { return snapshot()->size(); }

ClassCatalog ParseCatalog(std::istream& in) {
  std::vector<ClassEntry> entries;
  ForEachJsonLine(in, [&](std::size_t line, const Json& object) {
    auto id = object.find("class_id");
    if (id == object.end()) {
      throw Error(ErrorCode::kParse, LinePrefix(line) + "missing class_id",
                  "class_id");
    }
    ClassEntry entry;
    entry.class_id = ParseClassId(*id, line, "class_id");
    entry.name = RequireString(object, "name", line);
    entry.synonyms = OptionalStringArray(object, "synonyms", line);
    entry.exemplar_refs = OptionalStringArray(object, "exemplars", line);
    entries.push_back(std::move(entry));
  });
  return ClassCatalog(std::move(entries));
}

ClassCatalog LoadCatalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ParseCatalog(in);
}

void WriteCatalog(std::ostream& out, const ClassCatalog& catalog) {
  for (const auto& entry : catalog.entries()) {
    OrderedJson line;
    line["class_id"] = entry.class_id;
    line["name"] = entry.name;
    line["synonyms"] = entry.synonyms;
    line["exemplars"] = entry.exemplar_refs;
    out << line.dump() << '\n';
  }
}

ImageRegistry ParseRegistry(std::istream& in, const ClassCatalog& catalog) {
  std::vector<ImageRecord> images;
  ForEachJsonLine(in, [&](std::size_t line, const Json& object) {
    ImageRecord image;
    image.image_id = RequireString(object, "image_id", line);
    image.uri = RequireString(object, "uri", line);
    auto label = object.find("original_label");
    if (label == object.end()) {
      throw Error(ErrorCode::kParse,
                  LinePrefix(line) + "missing original_label",
                  "original_label");
    }
    image.original_label = ParseClassId(*label, line, "original_label");
    images.push_back(std::move(image));
  });
  return ImageRegistry(std::move(images), catalog);
}

ImageRegistry LoadRegistry(const std::filesystem::path& path,
                           const ClassCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ParseRegistry(in, catalog);
}

void WriteRegistry(std::ostream& out, const ImageRegistry& registry) {
  for (const auto& image : registry.images()) {
    OrderedJson line;
    line["image_id"] = image.image_id;
    line["uri"] = image.uri;
    line["original_label"] = image.original_label;
    out << line.dump() << '\n';
  }
}

std::vector<PredictionRecord> ParsePredictions(std::istream& in,
                                               const ClassCatalog& catalog,
                                               const ImageRegistry& registry) {
  std::vector<PredictionRecord> records;
  ForEachJsonLine(in, [&](std::size_t line, const Json& object) {
    PredictionRecord record;
    record.model_id = RequireString(object, "model_id", line);
    record.image_id = RequireString(object, "image_id", line);
    CheckImage(registry, record.image_id, line);
    if (auto probs = object.find("probs"); probs != object.end()) {
      if (!probs->is_array()) {
        throw Error(ErrorCode::kParse, LinePrefix(line) + "probs must be an array",
                    "probs");
      }
      for (const auto& p : *probs) {
        if (!p.is_number()) {
          throw Error(ErrorCode::kParse,
                      LinePrefix(line) + "probs must hold numbers", "probs");
        }
        record.probs.push_back(p.get<double>());
      }
      if (record.probs.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    LinePrefix(line) + "empty probs vector", "probs");
      }
    }
    if (auto topk = object.find("topk"); topk != object.end()) {
      if (!topk->is_array()) {
        throw Error(ErrorCode::kParse, LinePrefix(line) + "topk must be an array",
                    "topk");
      }
      for (const auto& pair : *topk) {
        if (!pair.is_array() || pair.size() != 2 || !pair[1].is_number()) {
          throw Error(ErrorCode::kParse,
                      LinePrefix(line) + "topk entries must be [class_id, score]",
                      "topk");
        }
        record.ranked_topk.push_back(
            {ParseClassId(pair[0], line, "topk"), pair[1].get<double>()});
      }
    }
    try {
      ValidatePrediction(record, catalog);
    } catch (const Error& e) {
      throw Error(e.code(), LinePrefix(line) + e.what(), e.field());
    }
    records.push_back(std::move(record));
  });
  return records;
}

IngestSummary IngestPredictions(const std::filesystem::path& path,
                                const ClassCatalog& catalog,
                                const ImageRegistry& registry,
                                PredictionStore& store) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  auto records = ParsePredictions(in, catalog, registry);
  return store.Ingest(std::move(records), catalog, registry);
}

void WritePredictions(std::ostream& out,
                      const std::vector<PredictionRecord>& records) {
  for (const auto& record : records) {
    // Emitted by hand so doubles keep their shortest round-trip form.
    out << "{\"model_id\":" << Json(record.model_id).dump()
        << ",\"image_id\":" << Json(record.image_id).dump();
    if (record.has_probs()) {
      out << ",\"probs\":[";
      for (std::size_t i = 0; i < record.probs.size(); ++i) {
        if (i) out << ',';
        out << FormatDouble(record.probs[i]);
      }
    } else {
      out << ",\"topk\":[";
      for (std::size_t i = 0; i < record.ranked_topk.size(); ++i) {
        if (i) out << ',';
        out << '[' << record.ranked_topk[i].class_id << ','
            << FormatDouble(record.ranked_topk[i].score) << ']';
      }
    }
    out << "]}\n";
  }
}

void WriteStore(std::ostream& out, const PredictionStore& store) {
  std::vector<PredictionRecord> records;
  for (const auto& [key, record] : *store.snapshot()) records.push_back(record);
  WritePredictions(out, records);
}

std::vector<MultiLabelGroundTruth> ParseGroundTruth(
    std::istream& in, const ClassCatalog& catalog,
    const ImageRegistry* registry) {
  std::vector<MultiLabelGroundTruth> out;
  std::set<std::string> seen;
  ForEachJsonLine(in, [&](std::size_t line, const Json& object) {
    MultiLabelGroundTruth gt;
    gt.image_id = RequireString(object, "image_id", line);
    if (registry) CheckImage(*registry, gt.image_id, line);
    if (!seen.insert(gt.image_id).second) {
      throw Error(ErrorCode::kDuplicate,
                  LinePrefix(line) + "duplicate image_id '" + gt.image_id + "'",
                  "image_id");
    }
    auto labels = object.find("labels");
    if (labels == object.end() || !labels->is_array()) {
      throw Error(ErrorCode::kParse, LinePrefix(line) + "missing labels array",
                  "labels");
    }
    for (const auto& label : *labels) {
      ClassId id = ParseClassId(label, line, "labels");
      if (!catalog.contains(id)) {
        throw Error(ErrorCode::kInvalidArgument,
                    LinePrefix(line) + "label " + std::to_string(id) +
                        " outside catalog",
                    "labels");
      }
      gt.labels.insert(id);
    }
    out.push_back(std::move(gt));
  });
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return out;
}

std::vector<MultiLabelGroundTruth> LoadGroundTruth(
    const std::filesystem::path& path, const ClassCatalog& catalog,
    const ImageRegistry* registry) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ParseGroundTruth(in, catalog, registry);
}

void WriteGroundTruth(std::ostream& out,
                      const std::vector<MultiLabelGroundTruth>& labels) {
  for (const auto& gt : labels) {
    OrderedJson line;
    line["image_id"] = gt.image_id;
    line["labels"] = std::vector<ClassId>(gt.labels.begin(), gt.labels.end());
    out << line.dump() << '\n';
  }
}

}  // namespace relabel
