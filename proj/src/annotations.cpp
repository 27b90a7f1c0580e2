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

#include "snow/annotations.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "snow/error.hpp"

namespace snow {

const char* aggregate_status_name(AggregateStatus s) {
  switch (s) {
    case AggregateStatus::kAccepted: return "accepted";
    case AggregateStatus::kRejected: return "rejected";
    case AggregateStatus::kPending: return "pending";
  }
  return "pending";
}

AggregateStatus parse_aggregate_status(const std::string& name) {
  if (name == "accepted") return AggregateStatus::kAccepted;
  if (name == "rejected") return AggregateStatus::kRejected;
  if (name == "pending") return AggregateStatus::kPending;
  fail(ErrorKind::kInvalidArgument, "unknown aggregate status '" + name + "'");
}

const char* gold_status_name(GoldStatus s) {
  switch (s) {
    case GoldStatus::kTrusted: return "trusted";
    case GoldStatus::kSpammer: return "spammer";
    case GoldStatus::kInsufficientData: return "insufficient_data";
  }
  return "insufficient_data";
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) fail(ErrorKind::kInvalidArgument, "uniform_below needs a positive bound");
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = kMax - kMax % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r < limit) return r % n;
  }
}

void validate_task(const AnnotationTask& task) {
  if (task.task_id.empty() || task.image_id.empty())
    fail(ErrorKind::kValidation, "task needs a task id and an image id");
  if (!(task.focal_length_px > 0) || !std::isfinite(task.focal_length_px))
    fail(ErrorKind::kValidation, "task focal length must be positive");
  if (task.keypoint.x < 0 || task.keypoint.y < 0)
    fail(ErrorKind::kValidation, "task keypoint outside the image");
  if (task.image_width > 0 && task.image_height > 0 &&
      (task.keypoint.x >= task.image_width || task.keypoint.y >= task.image_height))
    fail(ErrorKind::kValidation, "task keypoint outside the image");
  if (task.gold && (!task.gold->allFinite() || std::abs(task.gold->norm() - 1.0) > kResponseNormTolerance))
    fail(ErrorKind::kValidation, "gold normal must be a unit vector");
}

void validate_response(const WorkerResponse& r) {
  if (r.task_id.empty()) fail(ErrorKind::kValidation, "response has no task id");
  if (r.worker_id.empty()) fail(ErrorKind::kValidation, "response has no worker id");
  if (!(r.elapsed_s >= 0) || !std::isfinite(r.elapsed_s))
    fail(ErrorKind::kValidation, "elapsed time must be non-negative");
  if (r.normal) {
    if (!r.normal->allFinite() || std::abs(r.normal->norm() - 1.0) > kResponseNormTolerance)
      fail(ErrorKind::kValidation, "response normal must be a unit vector");
    if (!(r.normal->z() < 0)) fail(ErrorKind::kValidation, "response normal must face the camera");
  }
}

AggregateResult aggregate_pair(const WorkerResponse& r1, const WorkerResponse& r2, double threshold_deg) {
  if (r1.task_id != r2.task_id) fail(ErrorKind::kInvalidArgument, "responses belong to different tasks");
  if (r1.worker_id == r2.worker_id) fail(ErrorKind::kInvalidArgument, "responses come from the same worker");
  AggregateResult out;
  out.task_id = r1.task_id;
  if (r1.hard_to_tell() || r2.hard_to_tell()) {
    out.status = AggregateStatus::kRejected;
    return out;
  }
  const double angle = angle_deg(*r1.normal, *r2.normal);
  out.disagreement_deg = angle;
  if (angle <= threshold_deg + kAngleSlackDeg) {
    out.status = AggregateStatus::kAccepted;
    out.normal = (*r1.normal + *r2.normal).normalized();
  } else {
    out.status = AggregateStatus::kRejected;
  }
  return out;
}

std::vector<NormalAnnotation> generate_normal_annotations(const DepthMap& z_gt, const CameraIntrinsics& k,
                                                          int count, std::span<const int> scales,
                                                          std::uint64_t seed) {
  if (count < 1) fail(ErrorKind::kInvalidArgument, "annotation count must be positive");
  if (scales.empty() || scales.front() != 1) fail(ErrorKind::kInvalidArgument, "scales must start with 1");
  std::mt19937_64 rng(seed);
  const int levels = static_cast<int>(scales.size());
  std::vector<NormalAnnotation> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int l = 0; l < levels; ++l) {
    const int factor = scales[l];
    if (!is_power_of_two(factor)) fail(ErrorKind::kInvalidArgument, "scales must be powers of two");
    const int want = count / levels + (l == 0 ? count % levels : 0);
    if (want == 0) continue;
    const Downsampled level = downsample(z_gt, k, factor);
    const NormalMap normals = derive_normals(level.depth, level.intrinsics);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < normals.size(); ++i)
      if (normals[i]) candidates.push_back(i);
    if (static_cast<std::size_t>(want) > candidates.size())
      fail(ErrorKind::kInvalidArgument, "more annotations requested than interior pixels available");
    const int scale_level = std::countr_zero(static_cast<unsigned>(factor));
    for (int s = 0; s < want; ++s) {
      const std::size_t pick = s + uniform_below(rng, candidates.size() - s);
      std::swap(candidates[s], candidates[pick]);
      const std::size_t idx = candidates[s];
      NormalAnnotation a;
      a.p = {static_cast<int>(idx % level.depth.width()), static_cast<int>(idx / level.depth.width())};
      a.n = *normals[idx];
      a.scale_level = scale_level;
      out.push_back(a);
    }
  }
  return out;
}

std::vector<RelativeDepthAnnotation> generate_ordinal_pairs(const DepthMap& z_gt, double ratio_threshold,
                                                            int count, std::uint64_t seed) {
  if (count < 1) fail(ErrorKind::kInvalidArgument, "pair count must be positive");
  if (!(ratio_threshold > 1)) fail(ErrorKind::kInvalidArgument, "ratio threshold must exceed 1");
  if (z_gt.size() < 2) fail(ErrorKind::kInvalidArgument, "need at least two pixels to form pairs");
  std::mt19937_64 rng(seed);
  std::vector<RelativeDepthAnnotation> out;
  out.reserve(static_cast<std::size_t>(count));
  const std::uint64_t n = z_gt.size();
  for (int c = 0; c < count; ++c) {
    const std::size_t i = uniform_below(rng, n);
    std::size_t j = uniform_below(rng, n - 1);
    if (j >= i) ++j;
    const double zi = z_gt[i], zj = z_gt[j];
    if (!(zi > 0) || !(zj > 0)) fail(ErrorKind::kDomain, "ground-truth depth must be positive");
    RelativeDepthAnnotation a;
    a.i = {static_cast<int>(i % z_gt.width()), static_cast<int>(i / z_gt.width())};
    a.j = {static_cast<int>(j % z_gt.width()), static_cast<int>(j / z_gt.width())};
    if (std::max(zi, zj) / std::min(zi, zj) <= ratio_threshold)
      a.r = Relation::kEqual;
    else
      a.r = zi > zj ? Relation::kFarther : Relation::kCloser;
    out.push_back(a);
  }
  return out;
}

ConsistencyReport consistency_stats(std::span<const ConsistencyGroup> groups) {
  if (groups.empty()) fail(ErrorKind::kInvalidArgument, "no response groups");
  ConsistencyReport report;
  double hhd_sum = 0.0, hkd_sum = 0.0;
  std::size_t hhd_n = 0, hkd_n = 0;
  for (const auto& g : groups) {
    if (g.responses.size() < 2)
      fail(ErrorKind::kInvalidArgument, "task " + g.task_id + " has fewer than two responses");
    Vec3 mean = Vec3::Zero();
    for (const auto& r : g.responses) mean += r;
    if (mean.norm() < kNormalGuard)
      fail(ErrorKind::kDegenerateInput, "responses of task " + g.task_id + " cancel out");
    mean.normalize();

    TaskConsistency t;
    t.task_id = g.task_id;
    t.responses = g.responses.size();
    double task_hhd = 0.0, task_hkd = 0.0;
    for (const auto& r : g.responses) {
      task_hhd += angle_deg(r, mean);
      if (g.reference) task_hkd += angle_deg(r, *g.reference);
    }
    hhd_sum += task_hhd;
    hhd_n += g.responses.size();
    t.hhd_deg = task_hhd / static_cast<double>(g.responses.size());
    if (g.reference) {
      hkd_sum += task_hkd;
      hkd_n += g.responses.size();
      t.hkd_deg = task_hkd / static_cast<double>(g.responses.size());
    }
    report.tasks.push_back(std::move(t));
  }
  report.hhd_deg = hhd_sum / static_cast<double>(hhd_n);
  if (hkd_n > 0) report.hkd_deg = hkd_sum / static_cast<double>(hkd_n);
  return report;
}

GoldStatus gold_check(std::span<const GoldSample> samples, const GoldPolicy& policy) {
  if (samples.size() < policy.min_tasks) return GoldStatus::kInsufficientData;
  std::size_t pass = 0;
  for (const auto& s : samples)
    if (s.response && angle_deg(*s.response, s.gold) <= policy.tolerance_deg + kAngleSlackDeg) ++pass;
  const double fraction = static_cast<double>(pass) / static_cast<double>(samples.size());
  return fraction < policy.min_pass_fraction ? GoldStatus::kSpammer : GoldStatus::kTrusted;
}

}  // namespace snow
