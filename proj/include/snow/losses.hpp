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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "snow/geometry.hpp"

namespace snow {

// Ground-truth ordinal relation of point i with respect to point j.
enum class Relation {
  kFarther,  // '>' : z_i > z_j
  kCloser,   // '<' : z_i < z_j
  kEqual,    // '=' : same distance
};

char relation_symbol(Relation r);
Relation parse_relation(const std::string& symbol);

struct RelativeDepthAnnotation {
  Pixel i;
  Pixel j;
  Relation r = Relation::kEqual;
  double weight = 1.0;

  friend bool operator==(const RelativeDepthAnnotation&, const RelativeDepthAnnotation&) = default;
};

// A ground-truth normal at pixel p of the depth field pooled by 2^scale_level.
struct NormalAnnotation {
  Pixel p;
  Vec3 n = Vec3(0, 0, -1);
  int scale_level = 0;

  friend bool operator==(const NormalAnnotation&, const NormalAnnotation&) = default;
};

enum class NormalLossKind { kAngle, kDepth };
enum class OrdinalLossKind { kMargin, kLegacy };

const char* normal_loss_kind_name(NormalLossKind kind);
NormalLossKind parse_normal_loss_kind(const std::string& name);

struct LossConfig {
  double lambda = 1.0;
  // Margin on log depth, so it is a log-ratio.
  double tau = std::log(1.02);
  NormalLossKind normal_loss_kind = NormalLossKind::kAngle;
  OrdinalLossKind ordinal_loss_kind = OrdinalLossKind::kMargin;
  std::vector<int> scales{1};
  double normal_guard = kNormalGuard;
  double ray_guard = kRayGuard;
  // Compare each should-be depth with the center pixel depth instead of the
  // neighbor it was projected onto.
  bool depth_loss_compares_center = false;

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  // dL/dz, row-major, same layout as the depth map.
  std::vector<double> gradient;
  int evaluated = 0;      // terms that contributed
  int skipped = 0;        // normal annotations skipped as degenerate
  int skipped_pairs = 0;  // depth-loss neighbor pairs skipped as degenerate
};

// Ranking loss on log depth that stops rewarding separation beyond tau.
// "=" pairs are flat inside the margin.
LossResult margin_ordinal_loss(const DepthMap& z, const RelativeDepthAnnotation& a, double tau);

// Unbounded ranking loss on log depth.
LossResult legacy_ordinal_loss(const DepthMap& z, const RelativeDepthAnnotation& a);

// -<n, nu(z)_p>. Annotations at scale_level > 0 are evaluated on the pooled
// depth field and the gradient is chained back through the pooling.
LossResult angle_normal_loss(const DepthMap& z, const NormalAnnotation& a,
                             const CameraIntrinsics& k, const LossConfig& cfg = {});

// Sum over the four neighbors of the normalized squared difference between
// the should-be depth implied by the opposite neighbor and the predicted depth.
LossResult depth_normal_loss(const DepthMap& z, const NormalAnnotation& a,
                             const CameraIntrinsics& k, const LossConfig& cfg = {});

// (1/K) sum psi + lambda (1/L) sum phi, reduced in annotation index order.
LossResult composite_loss(const DepthMap& z, std::span<const RelativeDepthAnnotation> ordinal,
                          std::span<const NormalAnnotation> normals, const LossConfig& cfg,
                          const CameraIntrinsics& k);

// Throws kInvalidArgument if the annotation does not fit a width x height map.
void validate_annotation(const RelativeDepthAnnotation& a, int width, int height);
void validate_annotation(const NormalAnnotation& a, int width, int height);

double softplus(double u);
double softplus_inverse(double z);
double sigmoid(double u);

DepthMap positivity_transform(std::span<const double> latent, int width, int height);
std::vector<double> positivity_inverse(const DepthMap& z);

}  // namespace snow
