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
#include <functional>
#include <vector>

#include "snow/geometry.hpp"
#include "snow/losses.hpp"

namespace snow {

// Recovers a dense depth field directly from sparse annotations by minimizing
// the composite loss over a latent field u with z = softplus(u).
struct OptimizeJob {
  int width = 0;
  int height = 0;
  CameraIntrinsics intrinsics;
  std::vector<RelativeDepthAnnotation> ordinal;
  std::vector<NormalAnnotation> normals;
  LossConfig cfg;
  int max_iters = 20000;
  double step = 0.05;
  double stop_tol = 1e-7;
  int stop_window = 50;
  // Seed of the annotation generator that produced this job. Full-batch
  // descent itself draws no random numbers.
  std::uint64_t seed = 0;
};

struct OptimizeTrace {
  std::vector<double> losses;  // loss at every evaluated iterate
  int iterations_run = 0;
  int best_iteration = 0;
  double best_loss = 0.0;
  double final_gradient_norm = 0.0;
  bool converged = false;  // stopped by stop_tol rather than max_iters
};

struct OptimizeOutcome {
  DepthMap depth;  // best iterate
  OptimizeTrace trace;
};

OptimizeOutcome optimize_depth(const OptimizeJob& job);

using DepthFunctional = std::function<double(const DepthMap&)>;

// Central differences with per-pixel step relative_step * |z_i|.
std::vector<double> finite_diff_gradient(const DepthMap& z, const DepthFunctional& f, double relative_step);

}  // namespace snow
