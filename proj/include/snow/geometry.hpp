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

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace snow {

using Vec3 = Eigen::Vector3d;

// Camera coordinates: +x right, +y down, +z forward from the camera center.
using Point3 = Vec3;

struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

inline constexpr double kNormalGuard = 1e-12;  // minimum cross-product norm
inline constexpr double kRayGuard = 1e-9;      // minimum |n . ray|

// Pinhole intrinsics with square pixels and no distortion.
struct CameraIntrinsics {
  double focal_length_px = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Principal point at the image center ((W-1)/2, (H-1)/2).
  static CameraIntrinsics centered(double focal_length_px, int width, int height);

  // Throws kInvalidArgument when an invariant does not hold.
  void validate() const;

  // Ray through pixel (x, y) with unit z component.
  Vec3 ray(double x, double y) const;
};

// Dense row-major grid of depth values, top row first.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 1.0);
  DepthMap(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double& at(int x, int y) { return values_[index(x, y)]; }
  double at(int x, int y) const { return values_[index(x, y)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool is_interior(int x, int y) const {
    return x >= 1 && y >= 1 && x + 1 < width_ && y + 1 < height_;
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Grid of unit normals. Border pixels and degenerate stencils are undefined.
class NormalMap {
 public:
  NormalMap() = default;
  NormalMap(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  const std::optional<Vec3>& at(int x, int y) const { return values_[index(x, y)]; }
  std::optional<Vec3>& at(int x, int y) { return values_[index(x, y)]; }
  const std::optional<Vec3>& operator[](std::size_t i) const { return values_[i]; }
  std::optional<Vec3>& operator[](std::size_t i) { return values_[i]; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  std::size_t defined_count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::optional<Vec3>> values_;
};

// Maps pixel (x, y) with depth z to ((x-cx) z/f, (y-cy) z/f, z).
Point3 back_project(double x, double y, double depth, const CameraIntrinsics& k);

// Flips n so that it faces the camera (n_z <= 0).
Vec3 canonicalize(const Vec3& n);

// Unnormalized cross product of the horizontal and vertical chords through the
// four neighbors of an interior pixel.
Vec3 stencil_cross(const DepthMap& z, int x, int y, const CameraIntrinsics& k);

// Unit camera-facing normal at an interior pixel, or nullopt when the
// stencil is degenerate (cross-product norm below kNormalGuard).
std::optional<Vec3> derive_normal_at(const DepthMap& z, int x, int y,
                                     const CameraIntrinsics& k);

NormalMap derive_normals(const DepthMap& z, const CameraIntrinsics& k);

// Depth along the ray through `target` of the plane that passes through the
// back-projection of (anchor, anchor_depth) with normal n.
double should_be_depth(const Pixel& anchor, double anchor_depth, const Vec3& n,
                       const Pixel& target, const CameraIntrinsics& k);

struct Downsampled {
  DepthMap depth;
  CameraIntrinsics intrinsics;
};

// Mean pooling over factor x factor blocks. The focal length is divided by the
// factor; the principal point follows the pooled pixel centers.
Downsampled downsample(const DepthMap& z, const CameraIntrinsics& k, int factor);

CameraIntrinsics downsample_intrinsics(const CameraIntrinsics& k, int factor);

// Depth map of the plane {X : n . X = n_z * center_depth} which crosses the
// principal ray at center_depth. Throws kBehindCamera if any pixel would lie
// behind the camera or at grazing incidence.
DepthMap plane_depth_map(const Vec3& n, double center_depth, const CameraIntrinsics& k);

// Angle between two vectors in degrees, computed with atan2 so that nearly
// parallel vectors keep full precision.
double angle_deg(const Vec3& a, const Vec3& b);

// Slack added to inclusive angle thresholds to absorb rounding in the angle.
inline constexpr double kAngleSlackDeg = 1e-9;

bool is_power_of_two(int v);

}  // namespace snow
