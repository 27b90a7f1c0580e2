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

#include <array>
#include <span>
#include <vector>

#include "snow/geometry.hpp"
#include "snow/losses.hpp"

namespace snow {

// Best global scale/shift a*z + b onto the ground truth.
struct AlignmentResult {
  double a = 1.0;
  double b = 0.0;
  double ls_rmse = 0.0;   // sqrt(residual / n)
  double residual = 0.0;  // minimized sum of squares
};

struct MetricReport {
  double rmse = 0.0;
  double log_rmse = 0.0;
  double silog_rmse = 0.0;
  double absrel = 0.0;
  double sqrrel = 0.0;
  double ls_rmse = 0.0;
  AlignmentResult alignment;
};

struct OrdinalReport {
  double wkdr = 0.0;
  double wkdr_eq = 0.0;   // 0 when there are no '=' pairs
  double wkdr_neq = 0.0;  // 0 when there are no '<' / '>' pairs
  double threshold = 0.0;
  std::size_t pairs = 0;
  std::size_t eq_pairs = 0;
  std::size_t neq_pairs = 0;
};

inline constexpr std::array<double, 3> kNormalThresholdsDeg{11.25, 22.5, 30.0};

struct NormalErrorReport {
  double mean_deg = 0.0;
  double median_deg = 0.0;
  // Fraction of samples within each of kNormalThresholdsDeg (inclusive).
  std::array<double, 3> pct_within{};
  std::size_t count = 0;
};

MetricReport metric_suite(const DepthMap& pred, const DepthMap& gt);

AlignmentResult ls_align(std::span<const double> pred, std::span<const double> gt);
AlignmentResult ls_align(const DepthMap& pred, const DepthMap& gt);

DepthMap normalize_to_stats(const DepthMap& z, double target_mean, double target_std);

// The relation a depth map implies between two pixels when log-depth gaps of
// at most delta count as equal.
Relation predict_relation(const DepthMap& z, const Pixel& i, const Pixel& j, double delta);

OrdinalReport wkdr(const DepthMap& pred, std::span<const RelativeDepthAnnotation> pairs, double delta);

struct WkdrSweep {
  double best_delta = 0.0;
  OrdinalReport report;
};

// Picks the delta minimizing max(wkdr_eq, wkdr_neq); ties go to the smaller delta.
WkdrSweep wkdr_sweep(const DepthMap& pred, std::span<const RelativeDepthAnnotation> pairs,
                     std::span<const double> delta_grid);

NormalErrorReport normal_error_stats(std::span<const Vec3> pred, std::span<const Vec3> gt);

// Compares the pixels that are defined in both maps.
NormalErrorReport normal_error_stats(const NormalMap& pred, const NormalMap& gt);

}  // namespace snow
