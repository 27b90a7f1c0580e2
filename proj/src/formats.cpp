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

#include "snow/formats.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "snow/error.hpp"

namespace snow {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kDepthMagic = "DMAP1";
constexpr std::string_view kNormalMagic = "NMAP1";

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
  fail(ErrorKind::kFormat, "byte offset " + std::to_string(offset) + ": " + what);
}

void put_float(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

float get_float(std::string_view bytes, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

std::string encode_header(std::string_view magic, int width, int height) {
  std::string out(magic);
  out += '\n';
  out += std::to_string(width);
  out += ' ';
  out += std::to_string(height);
  out += '\n';
  return out;
}

struct Header {
  int width = 0;
  int height = 0;
  std::size_t payload_offset = 0;
};

int parse_dimension(std::string_view bytes, std::size_t& pos, char terminator) {
  const std::size_t start = pos;
  int value = 0;
  const char* first = bytes.data() + pos;
  const char* last = bytes.data() + bytes.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr == first || *first == '+' || *first == '-')
    format_error(start, "expected a positive decimal dimension");
  pos += static_cast<std::size_t>(ptr - first);
  if (value <= 0) format_error(start, "dimension must be positive");
  if (pos >= bytes.size() || bytes[pos] != terminator)
    format_error(pos, terminator == ' ' ? "expected a space after the width" : "expected a newline after the height");
  ++pos;
  return value;
}

Header parse_header(std::string_view bytes, std::string_view magic, std::size_t values_per_pixel) {
  for (std::size_t i = 0; i < magic.size(); ++i)
    if (i >= bytes.size() || bytes[i] != magic[i]) format_error(i, "bad magic, expected " + std::string(magic));
  std::size_t pos = magic.size();
  if (pos >= bytes.size() || bytes[pos] != '\n') format_error(pos, "expected a newline after the magic");
  ++pos;
  Header h;
  h.width = parse_dimension(bytes, pos, ' ');
  h.height = parse_dimension(bytes, pos, '\n');
  h.payload_offset = pos;
  const std::size_t expected =
      4 * values_per_pixel * static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  const std::size_t available = bytes.size() - pos;
  if (available < expected) format_error(bytes.size(), "truncated payload, expected " + std::to_string(expected) + " bytes");
  if (available > expected) format_error(pos + expected, "unexpected trailing bytes");
  return h;
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  fail(ErrorKind::kFormat, "field '" + field + "': " + what);
}

const Json& require(const Json& j, const char* field) {
  if (!j.is_object()) fail(ErrorKind::kFormat, "record is not a JSON object");
  auto it = j.find(field);
  if (it == j.end()) field_error(field, "missing");
  return *it;
}

std::string get_string(const Json& j, const char* field) {
  const Json& v = require(j, field);
  if (!v.is_string()) field_error(field, "expected a string");
  return v.get<std::string>();
}

double get_number(const Json& j, const char* field) {
  const Json& v = require(j, field);
  if (!v.is_number()) field_error(field, "expected a number");
  return v.get<double>();
}

int get_int(const Json& j, const char* field) {
  const Json& v = require(j, field);
  if (!v.is_number_integer()) field_error(field, "expected an integer");
  return v.get<int>();
}

Pixel get_pixel(const Json& j, const char* field) {
  const Json& v = require(j, field);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    field_error(field, "expected [x, y] integers");
  return {v[0].get<int>(), v[1].get<int>()};
}

Vec3 get_vec3(const Json& j, const char* field) {
  const Json& v = require(j, field);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
    field_error(field, "expected a 3-vector");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

Json pixel_json(const Pixel& p) { return Json::array({p.x, p.y}); }
Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

// Keys that a record kind owns; everything else is carried in `extra`.
const std::vector<std::string>& known_keys(std::string_view kind) {
  static const std::vector<std::string> normal{"kind", "p", "n", "scale_level"};
  static const std::vector<std::string> ordinal{"kind", "i", "j", "r", "weight"};
  static const std::vector<std::string> response{"kind", "task_id", "worker_id", "outcome", "n", "elapsed_s",
                                                 "response_id"};
  static const std::vector<std::string> task{"kind", "task_id", "image_id", "keypoint", "focal_length_px",
                                             "image_width", "image_height", "gold"};
  if (kind == "normal") return normal;
  if (kind == "ordinal") return ordinal;
  if (kind == "response") return response;
  if (kind == "task") return task;
  fail(ErrorKind::kFormat, "unknown record kind '" + std::string(kind) + "'");
}

}  // namespace

std::string encode_depth_map(const DepthMap& z) {
  std::string out = encode_header(kDepthMagic, z.width(), z.height());
  out.reserve(out.size() + 4 * z.size());
  for (double v : z.values()) {
    if (!std::isfinite(v)) fail(ErrorKind::kValidation, "depth map contains a non-finite value");
    put_float(out, static_cast<float>(v));
  }
  return out;
}

DepthMap decode_depth_map(std::string_view bytes) {
  const Header h = parse_header(bytes, kDepthMagic, 1);
  std::vector<double> values(static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t offset = h.payload_offset + 4 * i;
    const float v = get_float(bytes, offset);
    if (!std::isfinite(v)) format_error(offset, "non-finite depth value");
    values[i] = v;
  }
  return DepthMap(h.width, h.height, std::move(values));
}

std::string encode_normal_map(const NormalMap& n) {
  std::string out = encode_header(kNormalMagic, n.width(), n.height());
  out.reserve(out.size() + 12 * n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    const Vec3 v = n[i] ? *n[i] : Vec3::Zero();
    if (!v.allFinite()) fail(ErrorKind::kValidation, "normal map contains a non-finite value");
    for (int c = 0; c < 3; ++c) put_float(out, static_cast<float>(v[c]));
  }
  return out;
}

NormalMap decode_normal_map(std::string_view bytes) {
  const Header h = parse_header(bytes, kNormalMagic, 3);
  NormalMap out(h.width, h.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t offset = h.payload_offset + 12 * i;
    Vec3 v;
    for (int c = 0; c < 3; ++c) {
      const float f = get_float(bytes, offset + 4 * c);
      if (!std::isfinite(f)) format_error(offset + 4 * c, "non-finite normal component");
      v[c] = f;
    }
    if (v == Vec3::Zero()) continue;
    if (std::abs(v.norm() - 1.0) > 1e-6)
      fail(ErrorKind::kValidation, "byte offset " + std::to_string(offset) + ": normal is not unit length");
    out[i] = v;
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorKind::kIo, "cannot read " + path.string());
  return std::move(buf).str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorKind::kIo, "cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::kIo, "cannot rename onto " + path.string());
  }
}

DepthMap read_depth_map(const fs::path& path) {
  try {
    return decode_depth_map(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_depth_map(const fs::path& path, const DepthMap& z) { write_file_atomic(path, encode_depth_map(z)); }

NormalMap read_normal_map(const fs::path& path) {
  try {
    return decode_normal_map(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_normal_map(const fs::path& path, const NormalMap& n) { write_file_atomic(path, encode_normal_map(n)); }

const char* record_kind(const AnnotationRecord& r) {
  switch (r.value.index()) {
    case 0: return "normal";
    case 1: return "ordinal";
    case 2: return "response";
    default: return "task";
  }
}

Json to_json(const NormalAnnotation& a) {
  Json j;
  j["kind"] = "normal";
  j["p"] = pixel_json(a.p);
  j["n"] = vec_json(a.n);
  j["scale_level"] = a.scale_level;
  return j;
}

Json to_json(const RelativeDepthAnnotation& a) {
  Json j;
  j["kind"] = "ordinal";
  j["i"] = pixel_json(a.i);
  j["j"] = pixel_json(a.j);
  j["r"] = std::string(1, relation_symbol(a.r));
  j["weight"] = a.weight;
  return j;
}

Json to_json(const WorkerResponse& r) {
  Json j;
  j["kind"] = "response";
  j["task_id"] = r.task_id;
  j["worker_id"] = r.worker_id;
  j["outcome"] = r.hard_to_tell() ? "hard_to_tell" : "normal";
  if (r.normal) j["n"] = vec_json(*r.normal);
  j["elapsed_s"] = r.elapsed_s;
  if (!r.response_id.empty()) j["response_id"] = r.response_id;
  return j;
}

Json to_json(const AnnotationTask& t, bool include_gold) {
  Json j;
  j["kind"] = "task";
  j["task_id"] = t.task_id;
  j["image_id"] = t.image_id;
  j["keypoint"] = pixel_json(t.keypoint);
  j["focal_length_px"] = t.focal_length_px;
  if (t.image_width > 0) j["image_width"] = t.image_width;
  if (t.image_height > 0) j["image_height"] = t.image_height;
  if (include_gold && t.gold) j["gold"] = vec_json(*t.gold);
  return j;
}

Json to_json(const AggregateResult& r) {
  Json j;
  j["kind"] = "aggregate";
  j["task_id"] = r.task_id;
  j["status"] = aggregate_status_name(r.status);
  if (r.normal) j["n"] = vec_json(*r.normal);
  if (r.disagreement_deg) j["disagreement_deg"] = *r.disagreement_deg;
  return j;
}

Json to_json(const ConsistencyReport& r) {
  Json j;
  j["kind"] = "consistency";
  j["hhd_deg"] = r.hhd_deg;
  if (r.hkd_deg) j["hkd_deg"] = *r.hkd_deg;
  Json tasks = Json::array();
  for (const auto& t : r.tasks) {
    Json e;
    e["task_id"] = t.task_id;
    e["responses"] = t.responses;
    e["hhd_deg"] = t.hhd_deg;
    if (t.hkd_deg) e["hkd_deg"] = *t.hkd_deg;
    tasks.push_back(std::move(e));
  }
  j["tasks"] = std::move(tasks);
  return j;
}

NormalAnnotation normal_annotation_from_json(const Json& j) {
  NormalAnnotation a;
  a.p = get_pixel(j, "p");
  a.n = get_vec3(j, "n");
  a.scale_level = j.contains("scale_level") ? get_int(j, "scale_level") : 0;
  return a;
}

RelativeDepthAnnotation ordinal_annotation_from_json(const Json& j) {
  RelativeDepthAnnotation a;
  a.i = get_pixel(j, "i");
  a.j = get_pixel(j, "j");
  try {
    a.r = parse_relation(get_string(j, "r"));
  } catch (const Error& e) {
    field_error("r", e.what());
  }
  a.weight = j.contains("weight") ? get_number(j, "weight") : 1.0;
  return a;
}

WorkerResponse response_from_json(const Json& j) {
  WorkerResponse r;
  r.task_id = get_string(j, "task_id");
  r.worker_id = get_string(j, "worker_id");
  const std::string outcome = get_string(j, "outcome");
  if (outcome == "normal")
    r.normal = get_vec3(j, "n");
  else if (outcome != "hard_to_tell")
    field_error("outcome", "expected \"normal\" or \"hard_to_tell\"");
  r.elapsed_s = j.contains("elapsed_s") ? get_number(j, "elapsed_s") : 0.0;
  if (j.contains("response_id")) r.response_id = get_string(j, "response_id");
  return r;
}

AnnotationTask task_from_json(const Json& j) {
  AnnotationTask t;
  t.task_id = get_string(j, "task_id");
  t.image_id = get_string(j, "image_id");
  t.keypoint = get_pixel(j, "keypoint");
  t.focal_length_px = get_number(j, "focal_length_px");
  if (j.contains("image_width")) t.image_width = get_int(j, "image_width");
  if (j.contains("image_height")) t.image_height = get_int(j, "image_height");
  if (j.contains("gold")) t.gold = get_vec3(j, "gold");
  return t;
}

Json record_to_json(const AnnotationRecord& r) {
  Json j = std::visit([](const auto& v) { return to_json(v); }, r.value);
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it)
    if (!j.contains(it.key())) j[it.key()] = it.value();
  return j;
}

AnnotationRecord record_from_json(const Json& j) {
  const std::string kind = get_string(j, "kind");
  AnnotationRecord r;
  if (kind == "normal")
    r.value = normal_annotation_from_json(j);
  else if (kind == "ordinal")
    r.value = ordinal_annotation_from_json(j);
  else if (kind == "response")
    r.value = response_from_json(j);
  else if (kind == "task")
    r.value = task_from_json(j);
  else
    field_error("kind", "unknown record kind '" + kind + "'");
  const auto& keys = known_keys(kind);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) r.extra[it.key()] = it.value();
  return r;
}

std::string format_record(const AnnotationRecord& r) { return record_to_json(r).dump(); }

AnnotationRecord parse_record(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed JSON: ") + e.what());
  }
  return record_from_json(j);
}

std::vector<AnnotationRecord> parse_jsonl(std::string_view text, const std::string& source) {
  std::vector<AnnotationRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const Error& e) {
      throw Error(e.kind(), source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string format_jsonl(const std::vector<AnnotationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += format_record(r);
    out += '\n';
  }
  return out;
}

std::vector<AnnotationRecord> read_jsonl(const fs::path& path) { return parse_jsonl(read_file(path), path.string()); }

void write_jsonl(const fs::path& path, const std::vector<AnnotationRecord>& records) {
  write_file_atomic(path, format_jsonl(records));
}

}  // namespace snow
