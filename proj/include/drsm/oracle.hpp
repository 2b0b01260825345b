// Copyright 2026 The DRSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DRSM_ORACLE_HPP
#define DRSM_ORACLE_HPP

#include "drsm/dataset.hpp"
#include "drsm/rng.hpp"
#include "drsm/scene.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace drsm {

// Synthetic test-track generator. Every number here is a declared default,
// not a measurement.
struct OracleConfig {
  PolarGridSpec grid;

  // Indexed by ObjectClass (car, ccr, pellets_bag, metal_frame).
  std::array<double, kNumTargetClasses> p0_db{-18.0, -10.0, -35.0, -22.0};
  std::array<int, kNumTargetClasses> spread_cells{2, 0, 2, 2};
  std::array<int, kNumTargetClasses> returns_min{2, 1, 1, 2};
  std::array<int, kNumTargetClasses> returns_max{4, 1, 3, 4};
  std::array<double, kNumTargetClasses> class_probs{0.25, 0.25, 0.25, 0.25};

  std::vector<double> count_probs{0.1, 0.3, 0.3, 0.3};  // P(0..3 objects)
  double object_range_min = 5.0;
  double object_range_max = 70.0;
  double object_separation = 4.0;

  double half_width_min = 3.0;
  double half_width_max = 6.0;
  double heading_bias_max = 0.05;  // rad
  double lateral_offset_max = 1.0;

  double clutter_rate = 12.0;
  double clutter_mean_db = -72.0;
  double clutter_std_db = 6.0;
  int clutter_band_cells = 2;

  double speckle_std_db = 2.0;
  double ghost_prob = 0.15;
  double ghost_range_min = 2.0;
  double ghost_range_max = 8.0;
  double ghost_attenuation_db = 6.0;
  double occlusion_db = 15.0;
  double occlusion_width = 1.5;  // m, lateral half-size of an occluder

  void validate() const;
  void set(const std::string& key, const std::string& value);  // throws ConfigError on unknown key
  std::map<std::string, std::string> to_key_values() const;
  std::string canonical_text() const;
  std::uint64_t hash() const;
  nlohmann::json to_json() const;

  // All stochastic effects off: speckle, ghosts and clutter.
  OracleConfig noise_free() const;
};

OracleConfig oracle_config_from_map(const std::map<std::string, std::string>& kv);

struct Scene {
  Corridor corridor;
  SceneRaster raster;
  std::vector<SceneObject> objects;
};

Scene sample_scene(const OracleConfig& config, Rng& rng);

// Radar points before rendering; exposed for tests of clutter placement.
struct SimulatedReturns {
  std::vector<RadarPoint> target_points;
  std::vector<RadarPoint> clutter_points;
};

SimulatedReturns simulate_returns(const Scene& scene, const OracleConfig& config, Rng& rng);
RadarFrame simulate_radar(const Scene& scene, const OracleConfig& config, Rng& rng);

// Grass cells within the configured band of a road cell.
std::vector<PolarGridSpec::Cell> clutter_band(const SceneRaster& raster, int band_cells);

FrameRecord generate_frame(const OracleConfig& config, std::uint64_t seed, std::uint64_t index);
Dataset generate_dataset(std::uint64_t n_frames, const OracleConfig& config, std::uint64_t seed);

}  // namespace drsm

#endif  // DRSM_ORACLE_HPP
