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

#ifndef RELABEL_FIXTURE_HPP_
#define RELABEL_FIXTURE_HPP_

#include <cstdint>
#include <filesystem>

#include "relabel/io.hpp"

namespace relabel {

// SplitMix64. Used instead of <random> distributions so generated fixtures
// are identical across standard library implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t Next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }
  // Uniform in [0, n); n must be positive.
  std::size_t Below(std::size_t n) {
    return static_cast<std::size_t>(Uniform() * static_cast<double>(n));
  }

 private:
  std::uint64_t state_;
};

struct FixtureOptions {
  std::size_t images = 200;
  std::size_t classes = 10;
  std::size_t models = 3;
  std::size_t standard_annotators = 4;
  std::size_t experienced_annotators = 2;
  std::uint64_t seed = 0;
};

// Writes a synthetic dataset into `out`: catalog.jsonl, images.jsonl,
// predictions.jsonl, reference.jsonl, annotators.jsonl and truth.jsonl (the
// hidden label sets the annotator simulation works from). Returns a summary.
Json MakeFixture(const std::filesystem::path& out, const FixtureOptions& options);

}  // namespace relabel

#endif  // RELABEL_FIXTURE_HPP_
