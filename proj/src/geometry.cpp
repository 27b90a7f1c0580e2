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

#include "snow/geometry.hpp"

#include <cmath>
#include <string>

#include "snow/error.hpp"

namespace snow {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, std::string(what) + " is not finite");
}

}  // namespace

CameraIntrinsics CameraIntrinsics::centered(double focal_length_px, int width, int height) {
  CameraIntrinsics k;
  k.focal_length_px = focal_length_px;
  k.width = width;
  k.height = height;
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  k.validate();
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(std::isfinite(focal_length_px) && focal_length_px > 0))
    fail(ErrorKind::kInvalidArgument, "focal length must be positive and finite");
  if (width <= 0 || height <= 0)
    fail(ErrorKind::kInvalidArgument, "image dimensions must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    fail(ErrorKind::kInvalidArgument, "principal point must lie inside the image");
}

Vec3 CameraIntrinsics::ray(double x, double y) const {
  return {(x - cx) / focal_length_px, (y - cy) / focal_length_px, 1.0};
}

DepthMap::DepthMap(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) fail(ErrorKind::kInvalidArgument, "depth map dimensions must be positive");
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

DepthMap::DepthMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) fail(ErrorKind::kInvalidArgument, "depth map dimensions must be positive");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    fail(ErrorKind::kInvalidArgument, "depth map value count does not match dimensions");
}

NormalMap::NormalMap(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) fail(ErrorKind::kInvalidArgument, "normal map dimensions must be positive");
  values_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
}

std::size_t NormalMap::defined_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.has_value();
  return n;
}

Point3 back_project(double x, double y, double depth, const CameraIntrinsics& k) {
  require_finite(x, "pixel x");
  require_finite(y, "pixel y");
  require_finite(depth, "depth");
  if (depth <= 0) fail(ErrorKind::kInvalidArgument, "depth must be positive");
  return {(x - k.cx) * depth / k.focal_length_px, (y - k.cy) * depth / k.focal_length_px, depth};
}

Vec3 canonicalize(const Vec3& n) { return n.z() > 0 ? Vec3(-n) : n; }

Vec3 stencil_cross(const DepthMap& z, int x, int y, const CameraIntrinsics& k) {
  const Vec3 horizontal = k.ray(x - 1, y) * z.at(x - 1, y) - k.ray(x + 1, y) * z.at(x + 1, y);
  const Vec3 vertical = k.ray(x, y - 1) * z.at(x, y - 1) - k.ray(x, y + 1) * z.at(x, y + 1);
  return horizontal.cross(vertical);
}

std::optional<Vec3> derive_normal_at(const DepthMap& z, int x, int y, const CameraIntrinsics& k) {
  if (!z.is_interior(x, y)) return std::nullopt;
  const Vec3 c = stencil_cross(z, x, y, k);
  const double norm = c.norm();
  if (!(norm >= kNormalGuard) || !std::isfinite(norm)) return std::nullopt;
  return canonicalize(c / norm);
}

NormalMap derive_normals(const DepthMap& z, const CameraIntrinsics& k) {
  if (z.width() < 3 || z.height() < 3)
    fail(ErrorKind::kInvalidArgument, "derive_normals needs at least a 3x3 depth map");
  NormalMap normals(z.width(), z.height());
  for (int y = 1; y + 1 < z.height(); ++y)
    for (int x = 1; x + 1 < z.width(); ++x) normals.at(x, y) = derive_normal_at(z, x, y, k);
  return normals;
}

double should_be_depth(const Pixel& anchor, double anchor_depth, const Vec3& n,
                       const Pixel& target, const CameraIntrinsics& k) {
  const Point3 origin = back_project(anchor.x, anchor.y, anchor_depth, k);
  const double denom = n.dot(k.ray(target.x, target.y));
  if (!(std::abs(denom) >= kRayGuard))
    fail(ErrorKind::kDegenerateGeometry, "plane is parallel to the target ray");
  const double depth = n.dot(origin) / denom;
  if (!(depth > 0)) fail(ErrorKind::kBehindCamera, "plane intersects the target ray behind the camera");
  return depth;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

CameraIntrinsics downsample_intrinsics(const CameraIntrinsics& k, int factor) {
  if (!is_power_of_two(factor)) fail(ErrorKind::kInvalidArgument, "downsample factor must be a power of two");
  if (k.width % factor != 0 || k.height % factor != 0)
    fail(ErrorKind::kInvalidArgument, "image dimensions are not divisible by the downsample factor");
  const double s = factor;
  CameraIntrinsics out;
  out.focal_length_px = k.focal_length_px / s;
  // Pooled pixel j covers original pixels [j*s, j*s + s - 1]; its center sits at
  // j*s + (s-1)/2 in original coordinates.
  out.cx = (k.cx - (s - 1) / 2) / s;
  out.cy = (k.cy - (s - 1) / 2) / s;
  out.width = k.width / factor;
  out.height = k.height / factor;
  out.validate();
  return out;
}

Downsampled downsample(const DepthMap& z, const CameraIntrinsics& k, int factor) {
  if (!is_power_of_two(factor)) fail(ErrorKind::kInvalidArgument, "downsample factor must be a power of two");
  if (z.width() % factor != 0 || z.height() % factor != 0)
    fail(ErrorKind::kInvalidArgument, "depth map dimensions are not divisible by the downsample factor");
  if (factor == 1) return {z, k};
  const int w = z.width() / factor;
  const int h = z.height() / factor;
  DepthMap pooled(w, h, 0.0);
  const double inv_area = 1.0 / (static_cast<double>(factor) * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) sum += z.at(x * factor + dx, y * factor + dy);
      pooled.at(x, y) = sum * inv_area;
    }
  }
  return {std::move(pooled), downsample_intrinsics(k, factor)};
}

DepthMap plane_depth_map(const Vec3& n, double center_depth, const CameraIntrinsics& k) {
  if (!(center_depth > 0)) fail(ErrorKind::kInvalidArgument, "plane center depth must be positive");
  const double offset = n.z() * center_depth;
  DepthMap z(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const double denom = n.dot(k.ray(x, y));
      if (std::abs(denom) < kRayGuard) fail(ErrorKind::kDegenerateGeometry, "plane is parallel to a pixel ray");
      const double depth = offset / denom;
      if (!(depth > 0)) fail(ErrorKind::kBehindCamera, "plane is behind the camera at some pixel");
      z.at(x, y) = depth;
    }
  }
  return z;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / M_PI;
}

}  // namespace snow
