// Copyright 2026 The snowdepth Authors.
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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "snow/annotations.hpp"
#include "snow/geometry.hpp"
#include "snow/losses.hpp"

namespace snow {

using Json = nlohmann::ordered_json;

// DMAP1: "DMAP1\n<width> <height>\n" followed by width*height float32
// little-endian values, row-major, top row first.
// NMAP1: same layout with magic "NMAP1" and three float32 per pixel;
// undefined pixels are stored as (0, 0, 0).
std::string encode_depth_map(const DepthMap& z);
DepthMap decode_depth_map(std::string_view bytes);
std::string encode_normal_map(const NormalMap& n);
NormalMap decode_normal_map(std::string_view bytes);

DepthMap read_depth_map(const std::filesystem::path& path);
void write_depth_map(const std::filesystem::path& path, const DepthMap& z);
NormalMap read_normal_map(const std::filesystem::path& path);
void write_normal_map(const std::filesystem::path& path, const NormalMap& n);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// One JSON object per line. `extra` keeps fields this version does not know
// so that they survive a read/write cycle.
struct AnnotationRecord {
  std::variant<NormalAnnotation, RelativeDepthAnnotation, WorkerResponse, AnnotationTask> value;
  Json extra = Json::object();
};

const char* record_kind(const AnnotationRecord& r);

Json to_json(const NormalAnnotation& a);
Json to_json(const RelativeDepthAnnotation& a);
Json to_json(const WorkerResponse& r);
Json to_json(const AnnotationTask& t, bool include_gold = true);
Json to_json(const AggregateResult& r);
Json to_json(const ConsistencyReport& r);

NormalAnnotation normal_annotation_from_json(const Json& j);
RelativeDepthAnnotation ordinal_annotation_from_json(const Json& j);
WorkerResponse response_from_json(const Json& j);
AnnotationTask task_from_json(const Json& j);

Json record_to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(const Json& j);

// Compact single-line JSON text without a trailing newline.
std::string format_record(const AnnotationRecord& r);
AnnotationRecord parse_record(std::string_view line);

std::vector<AnnotationRecord> parse_jsonl(std::string_view text, const std::string& source = "<input>");
std::string format_jsonl(const std::vector<AnnotationRecord>& records);
std::vector<AnnotationRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<AnnotationRecord>& records);

}  // namespace snow
