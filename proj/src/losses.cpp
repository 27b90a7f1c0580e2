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

#include "snow/losses.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "snow/error.hpp"

namespace snow {

namespace {

// Loss contribution of a single annotation with a gradient touching at most
// five pixels of the grid it was evaluated on.
struct Term {
  double value = 0.0;
  std::array<std::size_t, 5> index{};
  std::array<double, 5> grad{};
  int touched = 0;
  bool skipped = false;
  int skipped_pairs = 0;

  void add(std::size_t i, double g) {
    for (int t = 0; t < touched; ++t) {
      if (index[t] == i) {
        grad[t] += g;
        return;
      }
    }
    index[touched] = i;
    grad[touched] = g;
    ++touched;
  }
};

// log(1 + exp(x)) without overflow.
double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_ordinal_depths(const DepthMap& z, const RelativeDepthAnnotation& a) {
  validate_annotation(a, z.width(), z.height());
  const double zi = z.at(a.i.x, a.i.y);
  const double zj = z.at(a.j.x, a.j.y);
  if (!(zi > 0) || !(zj > 0)) fail(ErrorKind::kDomain, "ordinal loss needs strictly positive depth");
}

Term margin_term(const DepthMap& z, const RelativeDepthAnnotation& a, double tau) {
  check_ordinal_depths(z, a);
  const std::size_t ii = z.index(a.i.x, a.i.y);
  const std::size_t jj = z.index(a.j.x, a.j.y);
  const double gap = std::log(z[ii]) - std::log(z[jj]);
  Term t;
  double dgap = 0.0;
  switch (a.r) {
    case Relation::kFarther:
      t.value = log1p_exp(-std::min(gap, tau));
      if (gap < tau) dgap = -sigmoid(-gap);
      break;
    case Relation::kCloser:
      t.value = log1p_exp(-std::min(-gap, tau));
      if (-gap < tau) dgap = sigmoid(gap);
      break;
    case Relation::kEqual:
      t.value = std::max(tau * tau, gap * gap);
      if (gap * gap > tau * tau) dgap = 2.0 * gap;
      break;
  }
  t.add(ii, dgap / z[ii]);
  t.add(jj, -dgap / z[jj]);
  return t;
}

Term legacy_term(const DepthMap& z, const RelativeDepthAnnotation& a) {
  check_ordinal_depths(z, a);
  const std::size_t ii = z.index(a.i.x, a.i.y);
  const std::size_t jj = z.index(a.j.x, a.j.y);
  const double gap = std::log(z[ii]) - std::log(z[jj]);
  Term t;
  double dgap = 0.0;
  switch (a.r) {
    case Relation::kFarther:
      t.value = log1p_exp(-gap);
      dgap = -sigmoid(-gap);
      break;
    case Relation::kCloser:
      t.value = log1p_exp(gap);
      dgap = sigmoid(gap);
      break;
    case Relation::kEqual:
      t.value = gap * gap;
      dgap = 2.0 * gap;
      break;
  }
  t.add(ii, dgap / z[ii]);
  t.add(jj, -dgap / z[jj]);
  return t;
}

// z is already at the annotation's resolution.
Term angle_term(const DepthMap& z, const NormalAnnotation& a, const CameraIntrinsics& k,
                const LossConfig& cfg) {
  const int x = a.p.x;
  const int y = a.p.y;
  const Vec3 rl = k.ray(x - 1, y), rr = k.ray(x + 1, y);
  const Vec3 rt = k.ray(x, y - 1), rb = k.ray(x, y + 1);
  const std::size_t il = z.index(x - 1, y), ir = z.index(x + 1, y);
  const std::size_t it = z.index(x, y - 1), ib = z.index(x, y + 1);

  const Vec3 horizontal = rl * z[il] - rr * z[ir];
  const Vec3 vertical = rt * z[it] - rb * z[ib];
  const Vec3 c = horizontal.cross(vertical);
  const double norm = c.norm();

  Term t;
  if (!(norm >= cfg.normal_guard) || !std::isfinite(norm)) {
    t.skipped = true;
    return t;
  }
  const double sign = c.z() > 0 ? -1.0 : 1.0;
  const Vec3 unit = c / norm;
  t.value = -sign * a.n.dot(unit);
  // d value / d c
  const Vec3 dc = -sign * (a.n - a.n.dot(unit) * unit) / norm;
  t.add(il, dc.dot(rl.cross(vertical)));
  t.add(ir, -dc.dot(rr.cross(vertical)));
  t.add(it, dc.dot(horizontal.cross(rt)));
  t.add(ib, -dc.dot(horizontal.cross(rb)));
  return t;
}

Term depth_term(const DepthMap& z, const NormalAnnotation& a, const CameraIntrinsics& k,
                const LossConfig& cfg) {
  const int x = a.p.x;
  const int y = a.p.y;
  struct Pair {
    Pixel anchor;
    Pixel target;
  };
  const std::array<Pair, 4> pairs{{
      {{x, y - 1}, {x, y + 1}},  // bottom from top
      {{x, y + 1}, {x, y - 1}},  // top from bottom
      {{x + 1, y}, {x - 1, y}},  // left from right
      {{x - 1, y}, {x + 1, y}},  // right from left
  }};
  const std::size_t center = z.index(x, y);

  Term t;
  int used = 0;
  for (const Pair& pr : pairs) {
    const double target_dot = a.n.dot(k.ray(pr.target.x, pr.target.y));
    if (!(std::abs(target_dot) >= cfg.ray_guard)) {
      ++t.skipped_pairs;
      continue;
    }
    // Should-be depth is linear in the anchor depth: z_hat = ratio * z_anchor.
    const double ratio = a.n.dot(k.ray(pr.anchor.x, pr.anchor.y)) / target_dot;
    if (!(ratio > 0)) {
      ++t.skipped_pairs;
      continue;
    }
    const std::size_t ia = z.index(pr.anchor.x, pr.anchor.y);
    const std::size_t iw = cfg.depth_loss_compares_center ? center : z.index(pr.target.x, pr.target.y);
    const double q = ratio * z[ia];
    const double w = z[iw];
    const double sum = q + w;
    const double diff = q - w;
    t.value += diff * diff / (sum * sum);
    const double inv_cube = 1.0 / (sum * sum * sum);
    t.add(ia, ratio * 4.0 * w * diff * inv_cube);
    t.add(iw, -4.0 * q * diff * inv_cube);
    ++used;
  }
  if (used == 0) t.skipped = true;
  return t;
}

LossResult dense_from_term(const Term& t, std::size_t size) {
  LossResult out;
  out.gradient.assign(size, 0.0);
  out.skipped_pairs = t.skipped_pairs;
  if (t.skipped) {
    out.skipped = 1;
    return out;
  }
  out.value = t.value;
  out.evaluated = 1;
  for (int i = 0; i < t.touched; ++i) out.gradient[t.index[i]] += t.grad[i];
  return out;
}

// Adds the gradient g of a pooled grid back onto the full-resolution grid.
void unpool_gradient(std::span<const double> pooled, int pooled_width, int factor, int full_width,
                     std::span<double> full) {
  const double inv_area = 1.0 / (static_cast<double>(factor) * factor);
  const int pooled_height = static_cast<int>(pooled.size()) / pooled_width;
  for (int y = 0; y < pooled_height; ++y) {
    for (int x = 0; x < pooled_width; ++x) {
      const double g = pooled[static_cast<std::size_t>(y) * pooled_width + x] * inv_area;
      if (g == 0.0) continue;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          full[static_cast<std::size_t>(y * factor + dy) * full_width + x * factor + dx] += g;
    }
  }
}

using NormalTermFn = Term (*)(const DepthMap&, const NormalAnnotation&, const CameraIntrinsics&,
                              const LossConfig&);

LossResult single_normal_loss(const DepthMap& z, const NormalAnnotation& a, const CameraIntrinsics& k,
                              const LossConfig& cfg, NormalTermFn fn) {
  validate_annotation(a, z.width(), z.height());
  if (a.scale_level == 0) {
    return dense_from_term(fn(z, a, k, cfg), z.size());
  }
  const int factor = 1 << a.scale_level;
  const Downsampled level = downsample(z, k, factor);
  LossResult pooled = dense_from_term(fn(level.depth, a, level.intrinsics, cfg), level.depth.size());
  LossResult out = pooled;
  out.gradient.assign(z.size(), 0.0);
  unpool_gradient(pooled.gradient, level.depth.width(), factor, z.width(), out.gradient);
  return out;
}

}  // namespace

char relation_symbol(Relation r) {
  switch (r) {
    case Relation::kFarther: return '>';
    case Relation::kCloser: return '<';
    case Relation::kEqual: return '=';
  }
  return '?';
}

Relation parse_relation(const std::string& symbol) {
  if (symbol == ">") return Relation::kFarther;
  if (symbol == "<") return Relation::kCloser;
  if (symbol == "=") return Relation::kEqual;
  fail(ErrorKind::kInvalidArgument, "unknown ordinal relation '" + symbol + "'");
}

const char* normal_loss_kind_name(NormalLossKind kind) {
  return kind == NormalLossKind::kAngle ? "angle" : "depth";
}

NormalLossKind parse_normal_loss_kind(const std::string& name) {
  if (name == "angle") return NormalLossKind::kAngle;
  if (name == "depth") return NormalLossKind::kDepth;
  fail(ErrorKind::kInvalidArgument, "unknown normal loss kind '" + name + "'");
}

void LossConfig::validate() const {
  if (!(tau > 0) || !std::isfinite(tau)) fail(ErrorKind::kInvalidArgument, "tau must be positive");
  if (!(lambda >= 0) || !std::isfinite(lambda)) fail(ErrorKind::kInvalidArgument, "lambda must be non-negative");
  if (scales.empty() || scales.front() != 1) fail(ErrorKind::kInvalidArgument, "scales must start with 1");
  for (int s : scales)
    if (!is_power_of_two(s)) fail(ErrorKind::kInvalidArgument, "scales must be powers of two");
  if (!(normal_guard > 0) || !(ray_guard > 0)) fail(ErrorKind::kInvalidArgument, "guards must be positive");
}

void validate_annotation(const RelativeDepthAnnotation& a, int width, int height) {
  auto inside = [&](const Pixel& p) { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; };
  if (!inside(a.i) || !inside(a.j)) fail(ErrorKind::kInvalidArgument, "ordinal annotation outside the image");
  if (a.i == a.j) fail(ErrorKind::kInvalidArgument, "ordinal annotation compares a pixel with itself");
  if (!(a.weight > 0) || !std::isfinite(a.weight))
    fail(ErrorKind::kInvalidArgument, "ordinal annotation weight must be positive");
}

void validate_annotation(const NormalAnnotation& a, int width, int height) {
  if (a.scale_level < 0 || a.scale_level > 30)
    fail(ErrorKind::kInvalidArgument, "normal annotation scale level out of range");
  const int factor = 1 << a.scale_level;
  if (width % factor != 0 || height % factor != 0)
    fail(ErrorKind::kInvalidArgument, "image is not divisible by the annotation scale");
  const int w = width / factor;
  const int h = height / factor;
  if (a.p.x < 1 || a.p.y < 1 || a.p.x + 1 >= w || a.p.y + 1 >= h)
    fail(ErrorKind::kInvalidArgument, "normal annotation must lie on an interior pixel");
  if (!a.n.allFinite() || std::abs(a.n.norm() - 1.0) > 1e-9)
    fail(ErrorKind::kInvalidArgument, "normal annotation must be a unit vector");
  if (!(a.n.z() < 0)) fail(ErrorKind::kInvalidArgument, "normal annotation must face the camera");
}

LossResult margin_ordinal_loss(const DepthMap& z, const RelativeDepthAnnotation& a, double tau) {
  if (!(tau > 0)) fail(ErrorKind::kInvalidArgument, "tau must be positive");
  return dense_from_term(margin_term(z, a, tau), z.size());
}

LossResult legacy_ordinal_loss(const DepthMap& z, const RelativeDepthAnnotation& a) {
  return dense_from_term(legacy_term(z, a), z.size());
}

LossResult angle_normal_loss(const DepthMap& z, const NormalAnnotation& a, const CameraIntrinsics& k,
                             const LossConfig& cfg) {
  return single_normal_loss(z, a, k, cfg, &angle_term);
}

LossResult depth_normal_loss(const DepthMap& z, const NormalAnnotation& a, const CameraIntrinsics& k,
                             const LossConfig& cfg) {
  return single_normal_loss(z, a, k, cfg, &depth_term);
}

LossResult composite_loss(const DepthMap& z, std::span<const RelativeDepthAnnotation> ordinal,
                          std::span<const NormalAnnotation> normals, const LossConfig& cfg,
                          const CameraIntrinsics& k) {
  cfg.validate();
  if (ordinal.empty() && normals.empty()) fail(ErrorKind::kEmptyObjective, "no annotations to fit");
  if (k.width != z.width() || k.height != z.height())
    fail(ErrorKind::kInvalidArgument, "intrinsics do not match the depth map size");

  LossResult out;
  out.gradient.assign(z.size(), 0.0);

  if (!ordinal.empty()) {
    std::vector<double> grad(z.size(), 0.0);
    double sum = 0.0;
    for (const auto& a : ordinal) {
      const Term t = cfg.ordinal_loss_kind == OrdinalLossKind::kMargin ? margin_term(z, a, cfg.tau)
                                                                        : legacy_term(z, a);
      sum += t.value;
      for (int i = 0; i < t.touched; ++i) grad[t.index[i]] += t.grad[i];
    }
    const double inv_k = 1.0 / static_cast<double>(ordinal.size());
    out.value += sum * inv_k;
    for (std::size_t i = 0; i < grad.size(); ++i) out.gradient[i] += grad[i] * inv_k;
    out.evaluated += static_cast<int>(ordinal.size());
  }

  if (normals.empty()) return out;

  // Pooled pyramid levels, built once per call.
  std::map<int, Downsampled> levels;
  for (const auto& a : normals) {
    validate_annotation(a, z.width(), z.height());
    const int factor = 1 << a.scale_level;
    if (std::find(cfg.scales.begin(), cfg.scales.end(), factor) == cfg.scales.end())
      fail(ErrorKind::kInvalidArgument, "normal annotation scale is not listed in the loss config");
    if (!levels.contains(a.scale_level)) levels.emplace(a.scale_level, downsample(z, k, factor));
  }
  std::map<int, std::vector<double>> level_grad;
  for (const auto& [level, d] : levels) level_grad[level].assign(d.depth.size(), 0.0);

  const NormalTermFn fn = cfg.normal_loss_kind == NormalLossKind::kAngle ? &angle_term : &depth_term;
  double sum = 0.0;
  int evaluated = 0;
  for (const auto& a : normals) {
    const Downsampled& level = levels.at(a.scale_level);
    const Term t = fn(level.depth, a, level.intrinsics, cfg);
    out.skipped_pairs += t.skipped_pairs;
    if (t.skipped) {
      ++out.skipped;
      continue;
    }
    sum += t.value;
    ++evaluated;
    auto& g = level_grad[a.scale_level];
    for (int i = 0; i < t.touched; ++i) g[t.index[i]] += t.grad[i];
  }
  if (evaluated == 0) return out;

  const double weight = cfg.lambda / static_cast<double>(evaluated);
  out.value += weight * sum;
  out.evaluated += evaluated;
  std::vector<double> normal_grad(z.size(), 0.0);
  for (const auto& [level, g] : level_grad) {
    if (level == 0) {
      for (std::size_t i = 0; i < g.size(); ++i) normal_grad[i] += g[i];
    } else {
      unpool_gradient(g, levels.at(level).depth.width(), 1 << level, z.width(), normal_grad);
    }
  }
  for (std::size_t i = 0; i < normal_grad.size(); ++i) out.gradient[i] += weight * normal_grad[i];
  return out;
}

double softplus(double u) { return log1p_exp(u); }

double softplus_inverse(double z) {
  if (!(z > 0)) fail(ErrorKind::kDomain, "softplus inverse needs a positive value");
  if (z > 20.0) return z + std::log1p(-std::exp(-z));
  return std::log(std::expm1(z));
}

double sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

DepthMap positivity_transform(std::span<const double> latent, int width, int height) {
  std::vector<double> values(latent.size());
  for (std::size_t i = 0; i < latent.size(); ++i) {
    if (!std::isfinite(latent[i])) fail(ErrorKind::kInvalidArgument, "latent value is not finite");
    values[i] = softplus(latent[i]);
  }
  return DepthMap(width, height, std::move(values));
}

std::vector<double> positivity_inverse(const DepthMap& z) {
  std::vector<double> u(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) u[i] = softplus_inverse(z[i]);
  return u;
}

}  // namespace snow
