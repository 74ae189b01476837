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

#ifndef RELABEL_IO_HPP_
#define RELABEL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"

namespace relabel {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Calls `fn(line_number, object)` for every non-blank line. Lines must be
// JSON objects; anything else is a kParse error naming the line.
void ForEachJsonLine(std::istream& in,
                     const std::function<void(std::size_t, const Json&)>& fn);

// Shortest round-trip decimal form; "NaN" for NaN.
std::string FormatDouble(double value);

// Rounds half away from zero at `decimals` places; tolerant of binary
// representation error just below the midpoint.
double RoundHalfUp(double value, int decimals);
// Fraction in [0,1] as a percent string with two decimals, e.g. "47.88".
std::string FormatPercent(double fraction);

std::string ReadFile(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over `path`.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);

std::uint64_t Fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string HexDigest(std::uint64_t value);

// UTC ISO-8601 with millisecond precision.
std::string FormatTimestamp(std::int64_t unix_millis);
std::int64_t NowMillis();

}  // namespace relabel

#endif  // RELABEL_IO_HPP_
