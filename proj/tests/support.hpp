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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "snow/error.hpp"
#include "snow/geometry.hpp"
#include "snow/losses.hpp"

namespace snow::testing {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }

// Camera-facing unit normal tilted `tilt_deg` away from (0,0,-1) toward azimuth `azimuth_deg`.
inline Vec3 tilted_normal(double tilt_deg, double azimuth_deg) {
  const double t = deg2rad(tilt_deg), a = deg2rad(azimuth_deg);
  return Vec3(std::sin(t) * std::cos(a), std::sin(t) * std::sin(a), -std::cos(t));
}

// Smooth-ish positive map: base depth times a small multiplicative jitter.
inline DepthMap random_depth_map(int w, int h, std::mt19937_64& rng, double base = 2.0, double jitter = 0.05) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DepthMap z(w, h);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = base * (1.0 + jitter * u(rng));
  return z;
}

inline Vec3 random_camera_facing_normal(std::mt19937_64& rng, double max_tilt_deg) {
  std::uniform_real_distribution<double> tilt(0.0, max_tilt_deg), az(0.0, 360.0);
  return tilted_normal(tilt(rng), az(rng));
}

inline Pixel random_pixel(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> x(0, w - 1), y(0, h - 1);
  return {x(rng), y(rng)};
}

inline Pixel random_interior_pixel(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> x(1, w - 2), y(1, h - 2);
  return {x(rng), y(rng)};
}

inline std::vector<RelativeDepthAnnotation> random_pairs(std::mt19937_64& rng, int w, int h, int count) {
  std::vector<RelativeDepthAnnotation> out;
  std::uniform_int_distribution<int> rel(0, 2);
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  while (static_cast<int>(out.size()) < count) {
    RelativeDepthAnnotation a;
    a.i = random_pixel(rng, w, h);
    a.j = random_pixel(rng, w, h);
    if (a.i == a.j) continue;
    a.r = static_cast<Relation>(rel(rng));
    a.weight = weight(rng);
    out.push_back(a);
  }
  return out;
}

// Max over entries of |a - f| / max(|a|, |f|, floor). Entries where both
// gradients vanish compare as equal.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-10) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

// max_i |a_i - f_i| / max_i |f_i|. Unlike the per-entry measure this is not
// dominated by entries where large contributions cancel.
inline double normwise_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  return scale > 0 ? diff / scale : diff;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("snowdepth-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename Fn>
ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected snow::Error, nothing was thrown");
}

}  // namespace snow::testing

#define EXPECT_SNOW_ERROR(stmt, expected_kind) \
  EXPECT_EQ(::snow::testing::error_kind_of([&] { stmt; }), expected_kind)
