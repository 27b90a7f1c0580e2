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

#include "snow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "snow/error.hpp"

namespace snow {

namespace {

void require_same_shape(const DepthMap& a, const DepthMap& b) {
  if (a.width() != b.width() || a.height() != b.height())
    fail(ErrorKind::kInvalidArgument, "depth maps have different dimensions");
  if (a.size() == 0) fail(ErrorKind::kInvalidArgument, "depth maps are empty");
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

AlignmentResult ls_align(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) fail(ErrorKind::kInvalidArgument, "alignment inputs differ in length");
  if (pred.size() < 2) fail(ErrorKind::kInvalidArgument, "alignment needs at least two samples");
  const double n = static_cast<double>(pred.size());
  const double mp = mean_of(pred);
  const double mg = mean_of(gt);
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp;
    var += dp * dp;
    cov += dp * (gt[i] - mg);
  }
  AlignmentResult r;
  if (var / n < 1e-15) {
    r.a = 0.0;
    r.b = mg;
  } else {
    r.a = cov / var;
    r.b = mg - r.a * mp;
  }
  // Residual from centered quantities so that a large offset does not cancel.
  double residual = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = r.a * (pred[i] - mp) - (gt[i] - mg);
    residual += e * e;
  }
  r.residual = residual;
  r.ls_rmse = std::sqrt(residual / n);
  return r;
}

AlignmentResult ls_align(const DepthMap& pred, const DepthMap& gt) {
  require_same_shape(pred, gt);
  return ls_align(std::span<const double>(pred.values()), std::span<const double>(gt.values()));
}

MetricReport metric_suite(const DepthMap& pred, const DepthMap& gt) {
  require_same_shape(pred, gt);
  const std::size_t count = pred.size();
  const double n = static_cast<double>(count);
  double se = 0.0, abs_rel = 0.0, sq_rel = 0.0;
  std::vector<double> log_diff(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double p = pred[i], g = gt[i];
    if (!(p > 0) || !(g > 0)) fail(ErrorKind::kDomain, "depth metrics need strictly positive depth");
    const double d = p - g;
    se += d * d;
    abs_rel += std::abs(d) / g;
    sq_rel += d * d / g;
    log_diff[i] = std::log(p) - std::log(g);
  }
  MetricReport r;
  r.rmse = std::sqrt(se / n);
  r.absrel = abs_rel / n;
  r.sqrrel = sq_rel / n;
  const double mean_log = mean_of(log_diff);
  double log_se = 0.0, log_var = 0.0;
  for (double d : log_diff) {
    log_se += d * d;
    log_var += (d - mean_log) * (d - mean_log);
  }
  r.log_rmse = std::sqrt(log_se / n);
  // sqrt(mean(d^2) - mean(d)^2), evaluated as a centered second moment.
  r.silog_rmse = std::sqrt(log_var / n);
  if (count >= 2) {
    r.alignment = ls_align(pred, gt);
    r.ls_rmse = r.alignment.ls_rmse;
  }
  return r;
}

DepthMap normalize_to_stats(const DepthMap& z, double target_mean, double target_std) {
  if (z.size() == 0) fail(ErrorKind::kInvalidArgument, "empty depth map");
  if (!(target_std > 0)) fail(ErrorKind::kInvalidArgument, "target standard deviation must be positive");
  const double m = mean_of(z.values());
  double var = 0.0;
  for (double v : z.values()) var += (v - m) * (v - m);
  const double sd = std::sqrt(var / static_cast<double>(z.size()));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(m))))
    fail(ErrorKind::kDegenerateInput, "cannot normalize a depth map with zero variance");
  DepthMap out = z;
  const double scale = target_std / sd;
  for (double& v : out.values()) v = std::max(1e-6, (v - m) * scale + target_mean);
  return out;
}

Relation predict_relation(const DepthMap& z, const Pixel& i, const Pixel& j, double delta) {
  const double zi = z.at(i.x, i.y), zj = z.at(j.x, j.y);
  if (!(zi > 0) || !(zj > 0)) fail(ErrorKind::kDomain, "ordinal prediction needs positive depth");
  const double gap = std::log(zi) - std::log(zj);
  if (std::abs(gap) <= delta) return Relation::kEqual;
  return gap > 0 ? Relation::kFarther : Relation::kCloser;
}

OrdinalReport wkdr(const DepthMap& pred, std::span<const RelativeDepthAnnotation> pairs, double delta) {
  if (pairs.empty()) fail(ErrorKind::kInvalidArgument, "wkdr needs at least one pair");
  if (!(delta >= 0)) fail(ErrorKind::kInvalidArgument, "wkdr threshold must be non-negative");
  double w_all = 0, bad_all = 0, w_eq = 0, bad_eq = 0, w_neq = 0, bad_neq = 0;
  OrdinalReport r;
  r.threshold = delta;
  r.pairs = pairs.size();
  for (const auto& a : pairs) {
    validate_annotation(a, pred.width(), pred.height());
    const bool wrong = predict_relation(pred, a.i, a.j, delta) != a.r;
    const double miss = wrong ? a.weight : 0.0;
    w_all += a.weight;
    bad_all += miss;
    if (a.r == Relation::kEqual) {
      w_eq += a.weight;
      bad_eq += miss;
      ++r.eq_pairs;
    } else {
      w_neq += a.weight;
      bad_neq += miss;
      ++r.neq_pairs;
    }
  }
  r.wkdr = bad_all / w_all;
  r.wkdr_eq = w_eq > 0 ? bad_eq / w_eq : 0.0;
  r.wkdr_neq = w_neq > 0 ? bad_neq / w_neq : 0.0;
  return r;
}

WkdrSweep wkdr_sweep(const DepthMap& pred, std::span<const RelativeDepthAnnotation> pairs,
                     std::span<const double> delta_grid) {
  if (delta_grid.empty()) fail(ErrorKind::kInvalidArgument, "wkdr sweep needs a non-empty threshold grid");
  WkdrSweep best;
  double best_score = std::numeric_limits<double>::infinity();
  bool first = true;
  for (double delta : delta_grid) {
    const OrdinalReport r = wkdr(pred, pairs, delta);
    const double score = std::max(r.wkdr_eq, r.wkdr_neq);
    if (first || score < best_score || (score == best_score && delta < best.best_delta)) {
      best.best_delta = delta;
      best.report = r;
      best_score = score;
      first = false;
    }
  }
  return best;
}

NormalErrorReport normal_error_stats(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  if (pred.size() != gt.size()) fail(ErrorKind::kInvalidArgument, "normal sets differ in length");
  if (pred.empty()) fail(ErrorKind::kInvalidArgument, "no normals to compare");
  std::vector<double> angles(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    angles[i] = angle_deg(pred[i], gt[i]);
    sum += angles[i];
  }
  NormalErrorReport r;
  r.count = angles.size();
  r.mean_deg = sum / static_cast<double>(angles.size());
  for (std::size_t t = 0; t < kNormalThresholdsDeg.size(); ++t) {
    const auto within = std::count_if(angles.begin(), angles.end(), [&](double a) {
      return a <= kNormalThresholdsDeg[t] + kAngleSlackDeg;
    });
    r.pct_within[t] = static_cast<double>(within) / static_cast<double>(angles.size());
  }
  std::sort(angles.begin(), angles.end());
  const std::size_t mid = angles.size() / 2;
  r.median_deg = angles.size() % 2 == 1 ? angles[mid] : 0.5 * (angles[mid - 1] + angles[mid]);
  return r;
}

NormalErrorReport normal_error_stats(const NormalMap& pred, const NormalMap& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    fail(ErrorKind::kInvalidArgument, "normal maps have different dimensions");
  std::vector<Vec3> p, g;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && gt[i]) {
      p.push_back(*pred[i]);
      g.push_back(*gt[i]);
    }
  }
  return normal_error_stats(p, g);
}

}  // namespace snow
