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

#ifndef DRSM_SCENE_HPP
#define DRSM_SCENE_HPP

#include <Eigen/Core>

#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace drsm {

// Range/azimuth grid of the radar. Cell (i, j) covers
// [range_min + i*dr, +dr) x [az_min + j*daz, +daz); azimuth is measured
// counter-clockwise from boresight (x forward, y left).
struct PolarGridSpec {
  int n_range = 64;
  int n_azimuth = 64;
  double range_min = 0.5;
  double range_max = 75.0;
  double az_min = -std::numbers::pi / 4.0;
  double az_max = std::numbers::pi / 4.0;
  double floor_db = -90.0;
  double ceil_db = 0.0;

  void validate() const;
  int cells() const { return n_range * n_azimuth; }
  double range_step() const { return (range_max - range_min) / n_range; }
  double az_step() const { return (az_max - az_min) / n_azimuth; }
  double range_center(int i) const { return range_min + (i + 0.5) * range_step(); }
  double az_center(int j) const { return az_min + (j + 0.5) * az_step(); }
  int index(int i, int j) const { return i * n_azimuth + j; }

  struct Cell {
    int range;
    int azimuth;
  };
  std::optional<Cell> cell_of(double range, double azimuth) const;
  std::optional<Cell> cell_of_xy(double x, double y) const;

  bool operator==(const PolarGridSpec&) const = default;
};

// Straight road corridor. The centerline crosses the radar's lateral axis
// at y = lateral_offset and runs at `heading` from boresight.
struct Corridor {
  double heading = 0.0;
  double half_width = 5.0;
  double lateral_offset = 0.0;

  double lateral_distance(double x, double y) const;
  bool contains(double x, double y) const { return lateral_distance(x, y) <= half_width; }
};

// Terrain raster R, one layer: 1 = roadway, 0 = grass.
struct SceneRaster {
  PolarGridSpec spec;
  Eigen::ArrayXf layers;

  bool is_road(int i, int j) const { return layers(spec.index(i, j)) > 0.5f; }
};

SceneRaster rasterize_terrain(const Corridor& corridor, const PolarGridSpec& spec);

enum class ObjectClass : int { kCar = 0, kCcr = 1, kPelletsBag = 2, kMetalFrame = 3, kUnused = 4 };

inline constexpr int kNumClasses = 5;
inline constexpr int kNumTargetClasses = 4;
inline constexpr int kObjectFeatures = 4 + kNumClasses;
inline constexpr int kObjectCapacity = 8;

const char* class_name(ObjectClass c);

struct SceneObject {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  ObjectClass cls = ObjectClass::kCar;

  double range() const;
  double azimuth() const;
  bool operator==(const SceneObject&) const = default;
};

// Object list O: capacity x 1 x kObjectFeatures, features
// (x, y, heading, speed, one-hot over car, ccr, pellets_bag, metal_frame, unused).
struct ObjectList {
  int capacity = kObjectCapacity;
  Eigen::ArrayXf features;

  float at(int row, int feature) const { return features(row * kObjectFeatures + feature); }
};

ObjectList encode_object_list(const std::vector<SceneObject>& objects, int capacity = kObjectCapacity);
std::vector<SceneObject> decode_object_list(const ObjectList& list);

// Observation Y: received power per cell in dB.
struct RadarFrame {
  PolarGridSpec spec;
  Eigen::ArrayXf power;

  float at(int i, int j) const { return power(spec.index(i, j)); }
};

struct RadarPoint {
  double range;
  double azimuth;
  double power_db;
};

// Max-combines points per cell; empty cells hold floor_db; out-of-grid
// points are dropped; result is clamped to [floor_db, ceil_db].
RadarFrame render_points(const std::vector<RadarPoint>& points, const PolarGridSpec& spec);

RadarFrame empty_frame(const PolarGridSpec& spec);

// (p - floor_db) / (ceil_db - floor_db)
Eigen::ArrayXf normalize_frame(const RadarFrame& frame);
RadarFrame denormalize_frame(const Eigen::ArrayXf& normalized, const PolarGridSpec& spec);

}  // namespace drsm

#endif  // DRSM_SCENE_HPP
