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

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "snow/geometry.hpp"
#include "snow/losses.hpp"

namespace snow {

// Dataset-level agreement figures reported for the crowdsourced normals.
// They are measurements of a human crowd, kept for reference only.
namespace reported {
inline constexpr double kSnowPairAgreementDeg = 14.32;
inline constexpr double kNyuHumanHumanDeg = 7.4;
inline constexpr double kNyuHumanKinectDeg = 32.8;
}  // namespace reported

inline constexpr double kAgreementThresholdDeg = 30.0;
inline constexpr double kResponseNormTolerance = 1e-6;

// One keypoint of one image, shown to workers with its focal length so the
// gauge figure can be drawn in perspective.
struct AnnotationTask {
  std::string task_id;
  std::string image_id;
  Pixel keypoint;
  double focal_length_px = 1.0;
  int image_width = 0;   // 0 when unknown
  int image_height = 0;  // 0 when unknown
  std::optional<Vec3> gold;  // never sent to workers

  bool is_gold() const { return gold.has_value(); }
};

struct WorkerResponse {
  std::string task_id;
  std::string worker_id;
  std::optional<Vec3> normal;  // nullopt means "hard to tell"
  double elapsed_s = 0.0;
  std::string response_id;  // optional client-generated id

  bool hard_to_tell() const { return !normal.has_value(); }
};

enum class AggregateStatus { kAccepted, kRejected, kPending };

const char* aggregate_status_name(AggregateStatus s);
AggregateStatus parse_aggregate_status(const std::string& name);

struct AggregateResult {
  std::string task_id;
  AggregateStatus status = AggregateStatus::kPending;
  std::optional<Vec3> normal;
  std::optional<double> disagreement_deg;
};

struct ConsistencyGroup {
  std::string task_id;
  std::vector<Vec3> responses;
  std::optional<Vec3> reference;
};

struct TaskConsistency {
  std::string task_id;
  std::size_t responses = 0;
  double hhd_deg = 0.0;
  std::optional<double> hkd_deg;
};

struct ConsistencyReport {
  double hhd_deg = 0.0;
  std::optional<double> hkd_deg;  // only when some group has a reference
  std::vector<TaskConsistency> tasks;
};

enum class GoldStatus { kTrusted, kSpammer, kInsufficientData };

const char* gold_status_name(GoldStatus s);

struct GoldSample {
  std::optional<Vec3> response;  // nullopt: worker answered "hard to tell"
  Vec3 gold;
};

struct GoldPolicy {
  double tolerance_deg = 45.0;
  double min_pass_fraction = 0.7;
  std::size_t min_tasks = 5;
};

void validate_task(const AnnotationTask& task);

// Throws kValidation unless ids are set, elapsed time is non-negative and a
// vector outcome is a camera-facing unit vector.
void validate_response(const WorkerResponse& r);

// Two-worker rule: accepted with the renormalized mean when the responses are
// within threshold_deg of each other (inclusive), rejected otherwise or when
// either worker answered "hard to tell".
AggregateResult aggregate_pair(const WorkerResponse& r1, const WorkerResponse& r2,
                               double threshold_deg = kAgreementThresholdDeg);

// Uniform interior locations without replacement, split equally across the
// scale factors with the remainder going to the finest one. Each carries the
// normal derived from the (pooled) ground truth at that location.
std::vector<NormalAnnotation> generate_normal_annotations(const DepthMap& z_gt, const CameraIntrinsics& k,
                                                          int count, std::span<const int> scales,
                                                          std::uint64_t seed);

// Uniform point pairs labeled '=' when the depth ratio is within
// ratio_threshold (inclusive), otherwise by comparison.
std::vector<RelativeDepthAnnotation> generate_ordinal_pairs(const DepthMap& z_gt, double ratio_threshold,
                                                            int count, std::uint64_t seed);

ConsistencyReport consistency_stats(std::span<const ConsistencyGroup> groups);

GoldStatus gold_check(std::span<const GoldSample> samples, const GoldPolicy& policy = {});

// Uniform integer in [0, n) from a 64-bit engine; identical on every platform.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace snow
