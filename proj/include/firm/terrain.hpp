// Copyright 2026 The firm-planar Authors
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

#ifndef FIRM_TERRAIN_HPP_
#define FIRM_TERRAIN_HPP_

#include <array>
#include <string>
#include <vector>

#include "firm/common.hpp"
#include "firm/robot_model.hpp"

namespace firm {

enum class TerrainKind { kFlat, kUneven, kWave, kSlope };

inline std::string terrain_kind_name(TerrainKind k) {
  switch (k) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kUneven: return "uneven";
    case TerrainKind::kWave: return "wave";
    case TerrainKind::kSlope: return "slope";
  }
  return "?";
}

inline TerrainKind terrain_kind_from_string(const std::string& s) {
  if (s == "flat") return TerrainKind::kFlat;
  if (s == "uneven") return TerrainKind::kUneven;
  if (s == "wave") return TerrainKind::kWave;
  if (s == "slope") return TerrainKind::kSlope;
  throw ConfigError("unknown terrain kind: " + s);
}

struct TerrainParams {
  double amplitude = 0.04;      // uneven: max |h|
  double feature_length = 0.5;  // uneven: Perlin lattice spacing, m
  double wave_amplitude = 0.06;
  double wavelength = 1.0;
  double slope_deg = 10.0;
  double friction = 0.8;
  double extent = 20.0;   // heightfield covers [-extent, extent]
  double spacing = 0.05;  // sample spacing, m
};

// Sampled 1-d heightfield with linear interpolation between samples and
// edge clamping outside the covered range.
struct Terrain {
  TerrainKind kind = TerrainKind::kFlat;
  double x0 = 0.0;
  double spacing = 0.05;
  std::vector<double> heights;
  double friction = 0.8;
  uint64_t seed = 0;
  TerrainParams params;

  double height(double x) const {
    if (heights.empty()) return 0.0;
    double u = (x - x0) / spacing;
    if (u <= 0.0) return heights.front();
    double last = static_cast<double>(heights.size() - 1);
    if (u >= last) return heights.back();
    auto i = static_cast<size_t>(u);
    double frac = u - static_cast<double>(i);
    return heights[i] * (1.0 - frac) + heights[i + 1] * frac;
  }

  // Unit outward normal of the surface segment under x.
  Vec2 normal(double x) const {
    double u = (x - x0) / spacing;
    double slope = 0.0;
    if (!heights.empty() && u > 0.0 && u < static_cast<double>(heights.size() - 1)) {
      auto i = static_cast<size_t>(u);
      slope = (heights[i + 1] - heights[i]) / spacing;
    }
    double inv = 1.0 / std::sqrt(1.0 + slope * slope);
    return {-slope * inv, inv};
  }
};

namespace detail {

// Classic 1-d gradient noise: hashed lattice gradients, quintic fade.
class Perlin1D {
 public:
  explicit Perlin1D(uint64_t seed) {
    for (int i = 0; i < 256; ++i) perm_[static_cast<size_t>(i)] = static_cast<uint8_t>(i);
    Rng rng(seed);
    for (int i = 255; i > 0; --i) {
      auto j = static_cast<size_t>(rng.uniform_int(0, i));
      std::swap(perm_[static_cast<size_t>(i)], perm_[j]);
    }
  }

  double at(double x) const {
    auto xi = static_cast<int64_t>(std::floor(x));
    double t = x - static_cast<double>(xi);
    double g0 = gradient(xi);
    double g1 = gradient(xi + 1);
    double n0 = g0 * t;
    double n1 = g1 * (t - 1.0);
    double u = t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
    return n0 * (1.0 - u) + n1 * u;
  }

 private:
  double gradient(int64_t i) const {
    uint8_t h = perm_[static_cast<size_t>(((i % 256) + 256) % 256)];
    return static_cast<double>(h) / 127.5 - 1.0;  // [-1, 1]
  }
  std::array<uint8_t, 256> perm_{};
};

}  // namespace detail

inline Terrain generate_terrain(TerrainKind kind, uint64_t seed,
                                const TerrainParams& params = {}) {
  if (params.amplitude < 0.0 || params.wave_amplitude < 0.0)
    throw ConfigError("terrain amplitude must be >= 0");
  if (params.spacing <= 0.0) throw ConfigError("terrain spacing must be > 0");
  Terrain t;
  t.kind = kind;
  t.seed = seed;
  t.params = params;
  t.friction = params.friction;
  t.spacing = params.spacing;
  t.x0 = -params.extent;
  auto n = static_cast<size_t>(std::floor(2.0 * params.extent / params.spacing)) + 1;
  t.heights.assign(n, 0.0);
  switch (kind) {
    case TerrainKind::kFlat:
      break;
    case TerrainKind::kUneven: {
      detail::Perlin1D noise(seed);
      double peak = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double x = t.x0 + static_cast<double>(i) * t.spacing;
        t.heights[i] = noise.at(x / params.feature_length);
        peak = std::max(peak, std::abs(t.heights[i]));
      }
      // normalize so max |h| equals the requested amplitude
      if (peak > 0.0)
        for (double& h : t.heights) h *= params.amplitude / peak;
      break;
    }
    case TerrainKind::kWave:
      for (size_t i = 0; i < n; ++i) {
        double x = t.x0 + static_cast<double>(i) * t.spacing;
        t.heights[i] =
            params.wave_amplitude * std::sin(2.0 * M_PI * x / params.wavelength);
      }
      break;
    case TerrainKind::kSlope: {
      double grade = std::tan(params.slope_deg * M_PI / 180.0);
      for (size_t i = 0; i < n; ++i) {
        double x = t.x0 + static_cast<double>(i) * t.spacing;
        t.heights[i] = grade * x;
      }
      break;
    }
  }
  for (double h : t.heights)
    if (!std::isfinite(h)) throw Error("terrain generated non-finite height");
  return t;
}

}  // namespace firm

#endif  // FIRM_TERRAIN_HPP_
