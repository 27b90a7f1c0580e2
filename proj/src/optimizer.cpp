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

#include <algorithm>
#include <cmath>
#include <string>

#include "snow/error.hpp"

namespace snow {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-12;

void validate_job(const OptimizeJob& job) {
  if (job.max_iters < 1) fail(ErrorKind::kInvalidArgument, "max_iters must be at least 1");
  if (!(job.step > 0)) fail(ErrorKind::kInvalidArgument, "step must be positive");
  if (!(job.stop_tol >= 0)) fail(ErrorKind::kInvalidArgument, "stop_tol must be non-negative");
  if (job.stop_window < 1) fail(ErrorKind::kInvalidArgument, "stop window must be at least 1");
  if (job.width != job.intrinsics.width || job.height != job.intrinsics.height)
    fail(ErrorKind::kInvalidArgument, "job size does not match the intrinsics");
  job.intrinsics.validate();
  job.cfg.validate();
  if (job.ordinal.empty() && job.normals.empty()) fail(ErrorKind::kEmptyObjective, "no annotations to fit");
}

}  // namespace

OptimizeOutcome optimize_depth(const OptimizeJob& job) {
  validate_job(job);
  const std::size_t n = static_cast<std::size_t>(job.width) * static_cast<std::size_t>(job.height);
  std::vector<double> u(n, softplus_inverse(1.0));
  std::vector<double> m(n, 0.0), v(n, 0.0), grad_u(n, 0.0);

  OptimizeOutcome out;
  OptimizeTrace& trace = out.trace;
  trace.losses.reserve(static_cast<std::size_t>(std::min(job.max_iters, 100000)));
  std::vector<double> best_so_far;
  best_so_far.reserve(trace.losses.capacity());

  double beta1_pow = 1.0, beta2_pow = 1.0;
  for (int it = 0; it < job.max_iters; ++it) {
    DepthMap z = positivity_transform(u, job.width, job.height);
    const LossResult loss = composite_loss(z, job.ordinal, job.normals, job.cfg, job.intrinsics);
    if (!std::isfinite(loss.value))
      fail(ErrorKind::kDivergence, "loss is not finite at iteration " + std::to_string(it));

    double grad_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      grad_u[i] = loss.gradient[i] * sigmoid(u[i]);
      if (!std::isfinite(grad_u[i]))
        fail(ErrorKind::kDivergence, "gradient is not finite at iteration " + std::to_string(it));
      grad_norm2 += grad_u[i] * grad_u[i];
    }
    trace.losses.push_back(loss.value);
    trace.iterations_run = it + 1;
    trace.final_gradient_norm = std::sqrt(grad_norm2);
    if (it == 0 || loss.value < trace.best_loss) {
      trace.best_loss = loss.value;
      trace.best_iteration = it;
      out.depth = std::move(z);
    }
    best_so_far.push_back(trace.best_loss);

    if (it >= job.stop_window) {
      const double before = best_so_far[static_cast<std::size_t>(it - job.stop_window)];
      const double decrease = before - trace.best_loss;
      const double scale = std::max(std::abs(before), 1e-300);
      if (decrease / scale < job.stop_tol) {
        trace.converged = true;
        break;
      }
    }
    if (it + 1 == job.max_iters) break;

    beta1_pow *= kBeta1;
    beta2_pow *= kBeta2;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = kBeta1 * m[i] + (1 - kBeta1) * grad_u[i];
      v[i] = kBeta2 * v[i] + (1 - kBeta2) * grad_u[i] * grad_u[i];
      const double m_hat = m[i] / (1 - beta1_pow);
      const double v_hat = v[i] / (1 - beta2_pow);
      u[i] -= job.step * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
  }
  return out;
}

std::vector<double> finite_diff_gradient(const DepthMap& z, const DepthFunctional& f, double relative_step) {
  if (!(relative_step > 0)) fail(ErrorKind::kInvalidArgument, "finite-difference step must be positive");
  DepthMap probe = z;
  std::vector<double> grad(z.size(), 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double base = z[i];
    const double h = relative_step * (base != 0.0 ? std::abs(base) : 1.0);
    probe[i] = base + h;
    const double up = f(probe);
    probe[i] = base - h;
    const double down = f(probe);
    probe[i] = base;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace snow
