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

#include "snow/optimizer.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "snow/annotations.hpp"
#include "snow/metrics.hpp"
#include "scenes.hpp"
#include "support.hpp"

namespace snow {
namespace {

TEST(FiniteDiffGradient, QuadraticFunctional) {
  std::mt19937_64 rng(1);
  const DepthMap z = testing::random_depth_map(5, 4, rng, 2.0, 0.5);
  const DepthMap c = testing::random_depth_map(5, 4, rng, 2.0, 0.5);
  auto f = [&](const DepthMap& m) {
    double s = 0;
    for (std::size_t i = 0; i < m.size(); ++i) s += (m[i] - c[i]) * (m[i] - c[i]);
    return s;
  };
  const auto g = finite_diff_gradient(z, f, 1e-4);
  // Central differences are exact for quadratics up to rounding.
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(g[i], 2 * (z[i] - c[i]), 1e-8);
}

TEST(FiniteDiffGradient, MatchesAnalyticNormalLosses) {
  std::mt19937_64 rng(2);
  const CameraIntrinsics k = CameraIntrinsics::centered(16, 16, 16);
  for (int trial = 0; trial < 5; ++trial) {
    const DepthMap z = testing::random_depth_map(16, 16, rng, 2.0, 0.1);
    const NormalAnnotation a{testing::random_interior_pixel(rng, 16, 16), testing::random_camera_facing_normal(rng, 40), 0};
    const auto angle = finite_diff_gradient(z, [&](const DepthMap& m) { return angle_normal_loss(m, a, k).value; }, 1e-4);
    EXPECT_LT(testing::max_relative_error(angle_normal_loss(z, a, k).gradient, angle), 1e-5);
    const auto depth = finite_diff_gradient(z, [&](const DepthMap& m) { return depth_normal_loss(m, a, k).value; }, 1e-4);
    EXPECT_LT(testing::max_relative_error(depth_normal_loss(z, a, k).gradient, depth), 1e-5);
  }
}

OptimizeJob small_job(std::uint64_t seed) {
  const testing::Scene s = testing::two_plane_scene(16, 16, 20, 8, 40);
  OptimizeJob job;
  job.width = 16;
  job.height = 16;
  job.intrinsics = s.intrinsics;
  const std::vector<int> scales{1};
  job.normals = generate_normal_annotations(s.depth, s.intrinsics, 60, scales, seed);
  job.ordinal = generate_ordinal_pairs(s.depth, 1.02, 20, seed + 1);
  job.max_iters = 500;
  return job;
}

TEST(OptimizeDepth, EqualityPlateauStopsImmediately) {
  OptimizeJob job;
  job.width = 4;
  job.height = 4;
  job.intrinsics = CameraIntrinsics::centered(10, 4, 4);
  job.ordinal = {{{0, 0}, {3, 3}, Relation::kEqual, 1.0}};
  const OptimizeOutcome out = optimize_depth(job);
  EXPECT_TRUE(out.trace.converged);
  EXPECT_EQ(out.trace.iterations_run, job.stop_window + 1);
  for (double l : out.trace.losses) EXPECT_EQ(l, job.cfg.tau * job.cfg.tau);
  for (std::size_t i = 0; i < out.depth.size(); ++i) EXPECT_NEAR(out.depth[i], 1.0, 1e-12);
}

TEST(OptimizeDepth, IdenticalJobsGiveBitIdenticalResults) {
  const OptimizeJob job = small_job(3);
  const OptimizeOutcome a = optimize_depth(job), b = optimize_depth(job);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.trace.losses, b.trace.losses);
  EXPECT_EQ(a.trace.best_iteration, b.trace.best_iteration);
}

TEST(OptimizeDepth, ReturnsTheBestIterate) {
  OptimizeJob job = small_job(4);
  const OptimizeOutcome out = optimize_depth(job);
  const double best = *std::min_element(out.trace.losses.begin(), out.trace.losses.end());
  EXPECT_EQ(out.trace.best_loss, best);
  EXPECT_EQ(out.trace.losses[static_cast<std::size_t>(out.trace.best_iteration)], best);
  const LossResult at_best = composite_loss(out.depth, job.ordinal, job.normals, job.cfg, job.intrinsics);
  EXPECT_EQ(at_best.value, best);
  EXPECT_LT(best, out.trace.losses.front());
}

TEST(OptimizeDepth, BestSoFarIsNonIncreasing) {
  for (NormalLossKind kind : {NormalLossKind::kAngle, NormalLossKind::kDepth}) {
    OptimizeJob job = small_job(5);
    job.cfg.normal_loss_kind = kind;
    const OptimizeOutcome out = optimize_depth(job);
    double best = INFINITY;
    double previous_best = INFINITY;
    for (double l : out.trace.losses) {
      best = std::min(best, l);
      EXPECT_LE(best, previous_best);
      previous_best = best;
    }
    for (std::size_t i = 0; i < out.depth.size(); ++i) EXPECT_GT(out.depth[i], 0.0);
  }
}

TEST(OptimizeDepth, RejectsInvalidJobs) {
  OptimizeJob job = small_job(6);
  job.max_iters = 0;
  EXPECT_SNOW_ERROR(optimize_depth(job), ErrorKind::kInvalidArgument);
  job = small_job(6);
  job.normals.clear();
  job.ordinal.clear();
  EXPECT_SNOW_ERROR(optimize_depth(job), ErrorKind::kEmptyObjective);
}

TEST(OptimizeDepth, DenseSupervisionRecoversTheCrease) {
  const double slant = 50;
  const testing::Scene s = testing::two_plane_scene(32, 32, 40, 16, slant);
  const std::vector<int> scales{1};
  for (NormalLossKind kind : {NormalLossKind::kAngle, NormalLossKind::kDepth}) {
    OptimizeJob job;
    job.width = 32;
    job.height = 32;
    job.intrinsics = s.intrinsics;
    job.normals = generate_normal_annotations(s.depth, s.intrinsics, 30 * 30, scales, 1);
    job.ordinal = generate_ordinal_pairs(s.depth, 1.02, 50, 2);
    job.cfg.normal_loss_kind = kind;
    const OptimizeOutcome out = optimize_depth(job);
    const auto expected = testing::crease_columns(derive_normals(s.depth, s.intrinsics), slant);
    const auto got = testing::crease_columns(derive_normals(out.depth, s.intrinsics), slant);
    ASSERT_EQ(expected.size(), got.size());
    for (std::size_t row = 0; row < got.size(); ++row) {
      ASSERT_GE(expected[row], 0);
      EXPECT_LE(std::abs(got[row] - expected[row]), 1) << normal_loss_kind_name(kind) << " row " << row + 1;
    }
  }
}

}  // namespace
}  // namespace snow
