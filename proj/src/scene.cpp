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

#include "drsm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drsm {

void PolarGridSpec::validate() const {
  if (n_range < 2 || n_azimuth < 2) throw std::invalid_argument("grid needs at least 2 bins per axis");
  if (!(range_min >= 0.0 && range_max > range_min)) {
    throw std::invalid_argument("grid needs range_max > range_min >= 0");
  }
  if (!(az_max > az_min)) throw std::invalid_argument("grid needs az_max > az_min");
  if (!(ceil_db > floor_db)) throw std::invalid_argument("grid needs ceil_db > floor_db");
}

std::optional<PolarGridSpec::Cell> PolarGridSpec::cell_of(double range, double azimuth) const {
  if (!(range >= range_min && range < range_max && azimuth >= az_min && azimuth < az_max)) {
    return std::nullopt;
  }
  const int i = std::min(n_range - 1, static_cast<int>((range - range_min) / range_step()));
  const int j = std::min(n_azimuth - 1, static_cast<int>((azimuth - az_min) / az_step()));
  return Cell{i, j};
}

std::optional<PolarGridSpec::Cell> PolarGridSpec::cell_of_xy(double x, double y) const {
  return cell_of(std::hypot(x, y), std::atan2(y, x));
}

double Corridor::lateral_distance(double x, double y) const {
  return std::abs(-std::sin(heading) * x + std::cos(heading) * (y - lateral_offset));
}

SceneRaster rasterize_terrain(const Corridor& corridor, const PolarGridSpec& spec) {
  if (!(corridor.half_width > 0.0)) throw std::invalid_argument("corridor half_width must be > 0");
  spec.validate();
  SceneRaster raster{spec, Eigen::ArrayXf::Zero(spec.cells())};
  for (int i = 0; i < spec.n_range; ++i) {
    const double r = spec.range_center(i);
    for (int j = 0; j < spec.n_azimuth; ++j) {
      const double th = spec.az_center(j);
      if (corridor.contains(r * std::cos(th), r * std::sin(th))) raster.layers(spec.index(i, j)) = 1.0f;
    }
  }
  return raster;
}

const char* class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::kCar: return "car";
    case ObjectClass::kCcr: return "ccr";
    case ObjectClass::kPelletsBag: return "pellets_bag";
    case ObjectClass::kMetalFrame: return "metal_frame";
    case ObjectClass::kUnused: return "unused";
  }
  return "?";
}

double SceneObject::range() const { return std::hypot(x, y); }
double SceneObject::azimuth() const { return std::atan2(y, x); }

ObjectList encode_object_list(const std::vector<SceneObject>& objects, int capacity) {
  if (capacity < 1) throw std::invalid_argument("object list capacity must be >= 1");
  if (static_cast<int>(objects.size()) > capacity) {
    throw std::length_error("object list overflow: " + std::to_string(objects.size()) +
                            " objects exceed capacity " + std::to_string(capacity));
  }
  ObjectList list{capacity, Eigen::ArrayXf::Zero(capacity * kObjectFeatures)};
  for (int row = 0; row < capacity; ++row) {
    float* f = list.features.data() + row * kObjectFeatures;
    if (row >= static_cast<int>(objects.size())) {
      f[4 + static_cast<int>(ObjectClass::kUnused)] = 1.0f;
      continue;
    }
    const SceneObject& o = objects[row];
    if (o.cls == ObjectClass::kUnused) throw std::invalid_argument("scene objects cannot have the unused class");
    f[0] = static_cast<float>(o.x);
    f[1] = static_cast<float>(o.y);
    f[2] = static_cast<float>(o.heading);
    f[3] = static_cast<float>(o.speed);
    f[4 + static_cast<int>(o.cls)] = 1.0f;
  }
  return list;
}

std::vector<SceneObject> decode_object_list(const ObjectList& list) {
  std::vector<SceneObject> out;
  for (int row = 0; row < list.capacity; ++row) {
    int cls = -1;
    for (int c = 0; c < kNumClasses; ++c) {
      if (list.at(row, 4 + c) == 1.0f) {
        if (cls >= 0) throw std::invalid_argument("object row " + std::to_string(row) + " has two classes");
        cls = c;
      }
    }
    if (cls < 0) throw std::invalid_argument("object row " + std::to_string(row) + " has no class");
    if (cls == static_cast<int>(ObjectClass::kUnused)) continue;
    out.push_back({list.at(row, 0), list.at(row, 1), list.at(row, 2), list.at(row, 3),
                   static_cast<ObjectClass>(cls)});
  }
  return out;
}

RadarFrame empty_frame(const PolarGridSpec& spec) {
  return {spec, Eigen::ArrayXf::Constant(spec.cells(), static_cast<float>(spec.floor_db))};
}

RadarFrame render_points(const std::vector<RadarPoint>& points, const PolarGridSpec& spec) {
  spec.validate();
  RadarFrame frame = empty_frame(spec);
  const float lo = static_cast<float>(spec.floor_db);
  const float hi = static_cast<float>(spec.ceil_db);
  for (const RadarPoint& p : points) {
    if (!std::isfinite(p.power_db)) continue;
    const auto cell = spec.cell_of(p.range, p.azimuth);
    if (!cell) continue;
    float& v = frame.power(spec.index(cell->range, cell->azimuth));
    v = std::max(v, std::clamp(static_cast<float>(p.power_db), lo, hi));
  }
  return frame;
}

Eigen::ArrayXf normalize_frame(const RadarFrame& frame) {
  const double span = frame.spec.ceil_db - frame.spec.floor_db;
  return ((frame.power.cast<double>() - frame.spec.floor_db) / span).cast<float>();
}

RadarFrame denormalize_frame(const Eigen::ArrayXf& normalized, const PolarGridSpec& spec) {
  if (normalized.size() != spec.cells()) {
    throw std::invalid_argument("denormalize: " + std::to_string(normalized.size()) + " values for a " +
                                std::to_string(spec.cells()) + "-cell grid");
  }
  const double span = spec.ceil_db - spec.floor_db;
  Eigen::ArrayXd p = normalized.cast<double>() * span + spec.floor_db;
  p = p.max(spec.floor_db).min(spec.ceil_db);
  return {spec, p.cast<float>()};
}

}  // namespace drsm
