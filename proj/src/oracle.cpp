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

#include "drsm/oracle.hpp"

#include "drsm/binary_io.hpp"
#include "drsm/config.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drsm {

namespace {

constexpr const char* kClassKeys[kNumTargetClasses] = {"car", "ccr", "pellets_bag", "metal_frame"};

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s;
}

int sample_index(const std::vector<double>& probs, Rng& rng) {
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (u < probs[i]) return static_cast<int>(i);
    u -= probs[i];
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

void OracleConfig::validate() const {
  grid.validate();
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
  };
  prob(ghost_prob, "ghost_prob");
  for (double p : count_probs) prob(p, "count_probs entries");
  for (double p : class_probs) prob(p, "class_probs entries");
  if (std::accumulate(count_probs.begin(), count_probs.end(), 0.0) <= 0.0) throw ConfigError("count_probs sum to zero");
  if (std::accumulate(class_probs.begin(), class_probs.end(), 0.0) <= 0.0) throw ConfigError("class_probs sum to zero");
  if (static_cast<int>(count_probs.size()) > kObjectCapacity + 1) {
    throw ConfigError("count_probs allows more objects than the object list capacity");
  }
  if (!(clutter_rate >= 0.0)) throw ConfigError("clutter_rate must be >= 0");
  if (!(clutter_std_db >= 0.0 && speckle_std_db >= 0.0)) throw ConfigError("standard deviations must be >= 0");
  if (clutter_band_cells < 0) throw ConfigError("clutter_band_cells must be >= 0");
  if (!(half_width_min > 0.0 && half_width_max >= half_width_min)) throw ConfigError("need 0 < half_width_min <= half_width_max");
  if (!(object_range_min > grid.range_min && object_range_max <= grid.range_max && object_range_max > object_range_min)) {
    throw ConfigError("object ranges must lie inside the grid");
  }
  for (int c = 0; c < kNumTargetClasses; ++c) {
    if (returns_min[c] < 1 || returns_max[c] < returns_min[c]) throw ConfigError("need 1 <= returns_min <= returns_max");
    if (spread_cells[c] < 0) throw ConfigError("spread_cells must be >= 0");
  }
  if (!(ghost_range_max >= ghost_range_min && ghost_range_min >= 0.0)) throw ConfigError("bad ghost range");
}

void OracleConfig::set(const std::string& key, const std::string& value) {
  for (int c = 0; c < kNumTargetClasses; ++c) {
    const std::string suffix = kClassKeys[c];
    if (key == "p0_db." + suffix) return void(p0_db[c] = parse_double(key, value));
    if (key == "spread_cells." + suffix) return void(spread_cells[c] = static_cast<int>(parse_int(key, value)));
    if (key == "returns_min." + suffix) return void(returns_min[c] = static_cast<int>(parse_int(key, value)));
    if (key == "returns_max." + suffix) return void(returns_max[c] = static_cast<int>(parse_int(key, value)));
    if (key == "class_prob." + suffix) return void(class_probs[c] = parse_double(key, value));
  }
  if (key == "grid.n_range") return void(grid.n_range = static_cast<int>(parse_int(key, value)));
  if (key == "grid.n_azimuth") return void(grid.n_azimuth = static_cast<int>(parse_int(key, value)));
  if (key == "grid.range_min") return void(grid.range_min = parse_double(key, value));
  if (key == "grid.range_max") return void(grid.range_max = parse_double(key, value));
  if (key == "grid.az_min") return void(grid.az_min = parse_double(key, value));
  if (key == "grid.az_max") return void(grid.az_max = parse_double(key, value));
  if (key == "grid.floor_db") return void(grid.floor_db = parse_double(key, value));
  if (key == "grid.ceil_db") return void(grid.ceil_db = parse_double(key, value));
  if (key == "count_probs") return void(count_probs = parse_double_list(key, value));
  if (key == "object_range_min") return void(object_range_min = parse_double(key, value));
  if (key == "object_range_max") return void(object_range_max = parse_double(key, value));
  if (key == "object_separation") return void(object_separation = parse_double(key, value));
  if (key == "half_width_min") return void(half_width_min = parse_double(key, value));
  if (key == "half_width_max") return void(half_width_max = parse_double(key, value));
  if (key == "heading_bias_max") return void(heading_bias_max = parse_double(key, value));
  if (key == "lateral_offset_max") return void(lateral_offset_max = parse_double(key, value));
  if (key == "clutter_rate") return void(clutter_rate = parse_double(key, value));
  if (key == "clutter_mean_db") return void(clutter_mean_db = parse_double(key, value));
  if (key == "clutter_std_db") return void(clutter_std_db = parse_double(key, value));
  if (key == "clutter_band_cells") return void(clutter_band_cells = static_cast<int>(parse_int(key, value)));
  if (key == "speckle_std_db") return void(speckle_std_db = parse_double(key, value));
  if (key == "ghost_prob") return void(ghost_prob = parse_double(key, value));
  if (key == "ghost_range_min") return void(ghost_range_min = parse_double(key, value));
  if (key == "ghost_range_max") return void(ghost_range_max = parse_double(key, value));
  if (key == "ghost_attenuation_db") return void(ghost_attenuation_db = parse_double(key, value));
  if (key == "occlusion_db") return void(occlusion_db = parse_double(key, value));
  if (key == "occlusion_width") return void(occlusion_width = parse_double(key, value));
  throw ConfigError("unknown oracle config key '" + key + "'");
}

std::map<std::string, std::string> OracleConfig::to_key_values() const {
  std::map<std::string, std::string> kv;
  for (int c = 0; c < kNumTargetClasses; ++c) {
    const std::string suffix = kClassKeys[c];
    kv["p0_db." + suffix] = format_double(p0_db[c]);
    kv["spread_cells." + suffix] = std::to_string(spread_cells[c]);
    kv["returns_min." + suffix] = std::to_string(returns_min[c]);
    kv["returns_max." + suffix] = std::to_string(returns_max[c]);
    kv["class_prob." + suffix] = format_double(class_probs[c]);
  }
  kv["grid.n_range"] = std::to_string(grid.n_range);
  kv["grid.n_azimuth"] = std::to_string(grid.n_azimuth);
  kv["grid.range_min"] = format_double(grid.range_min);
  kv["grid.range_max"] = format_double(grid.range_max);
  kv["grid.az_min"] = format_double(grid.az_min);
  kv["grid.az_max"] = format_double(grid.az_max);
  kv["grid.floor_db"] = format_double(grid.floor_db);
  kv["grid.ceil_db"] = format_double(grid.ceil_db);
  kv["count_probs"] = join(count_probs);
  kv["object_range_min"] = format_double(object_range_min);
  kv["object_range_max"] = format_double(object_range_max);
  kv["object_separation"] = format_double(object_separation);
  kv["half_width_min"] = format_double(half_width_min);
  kv["half_width_max"] = format_double(half_width_max);
  kv["heading_bias_max"] = format_double(heading_bias_max);
  kv["lateral_offset_max"] = format_double(lateral_offset_max);
  kv["clutter_rate"] = format_double(clutter_rate);
  kv["clutter_mean_db"] = format_double(clutter_mean_db);
  kv["clutter_std_db"] = format_double(clutter_std_db);
  kv["clutter_band_cells"] = std::to_string(clutter_band_cells);
  kv["speckle_std_db"] = format_double(speckle_std_db);
  kv["ghost_prob"] = format_double(ghost_prob);
  kv["ghost_range_min"] = format_double(ghost_range_min);
  kv["ghost_range_max"] = format_double(ghost_range_max);
  kv["ghost_attenuation_db"] = format_double(ghost_attenuation_db);
  kv["occlusion_db"] = format_double(occlusion_db);
  kv["occlusion_width"] = format_double(occlusion_width);
  return kv;
}

std::string OracleConfig::canonical_text() const {
  std::string text;
  for (const auto& [k, v] : to_key_values()) text += k + " = " + v + "\n";
  return text;
}

std::uint64_t OracleConfig::hash() const { return fnv1a64(canonical_text()); }

nlohmann::json OracleConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : to_key_values()) j[k] = v;
  return j;
}

OracleConfig OracleConfig::noise_free() const {
  OracleConfig c = *this;
  c.speckle_std_db = 0.0;
  c.ghost_prob = 0.0;
  c.clutter_rate = 0.0;
  return c;
}

OracleConfig oracle_config_from_map(const std::map<std::string, std::string>& kv) {
  OracleConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  c.validate();
  return c;
}

Scene sample_scene(const OracleConfig& config, Rng& rng) {
  Scene scene;
  scene.corridor.half_width = rng.uniform(config.half_width_min, config.half_width_max);
  scene.corridor.heading = rng.uniform(-config.heading_bias_max, config.heading_bias_max);
  scene.corridor.lateral_offset = rng.uniform(-config.lateral_offset_max, config.lateral_offset_max);
  scene.raster = rasterize_terrain(scene.corridor, config.grid);

  const std::vector<double> class_probs(config.class_probs.begin(), config.class_probs.end());
  const int count = sample_index(config.count_probs, rng);
  const auto& g = config.grid;
  const double ch = std::cos(scene.corridor.heading);
  const double sh = std::sin(scene.corridor.heading);
  for (int n = 0; n < count; ++n) {
    // Rejection sampling: on-road cell, within range limits, separated.
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double along = rng.uniform(config.object_range_min, config.object_range_max);
      const double lateral = rng.uniform(-1.0, 1.0) * std::max(0.0, scene.corridor.half_width - 1.0);
      const double x = along * ch - lateral * sh;
      const double y = scene.corridor.lateral_offset + along * sh + lateral * ch;
      const double r = std::hypot(x, y);
      if (r < config.object_range_min || r > config.object_range_max) continue;
      const auto cell = g.cell_of_xy(x, y);
      if (!cell || !scene.raster.is_road(cell->range, cell->azimuth)) continue;
      bool clear = true;
      for (const auto& o : scene.objects) {
        if (std::hypot(o.x - x, o.y - y) < config.object_separation) clear = false;
      }
      if (!clear) continue;
      SceneObject obj;
      obj.x = x;
      obj.y = y;
      obj.cls = static_cast<ObjectClass>(sample_index(class_probs, rng));
      obj.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
      obj.speed = obj.cls == ObjectClass::kCar ? rng.uniform(0.0, 10.0) : 0.0;
      // Stored as float in the object list; keep the scene consistent with it.
      obj.x = static_cast<float>(obj.x);
      obj.y = static_cast<float>(obj.y);
      obj.heading = static_cast<float>(obj.heading);
      obj.speed = static_cast<float>(obj.speed);
      scene.objects.push_back(obj);
      break;
    }
  }
  return scene;
}

std::vector<PolarGridSpec::Cell> clutter_band(const SceneRaster& raster, int band_cells) {
  const auto& g = raster.spec;
  std::vector<PolarGridSpec::Cell> cells;
  for (int i = 0; i < g.n_range; ++i) {
    for (int j = 0; j < g.n_azimuth; ++j) {
      if (raster.is_road(i, j)) continue;
      bool near_road = false;
      for (int di = -band_cells; di <= band_cells && !near_road; ++di) {
        for (int dj = -band_cells; dj <= band_cells && !near_road; ++dj) {
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= g.n_range || jj >= g.n_azimuth) continue;
          near_road = raster.is_road(ii, jj);
        }
      }
      if (near_road) cells.push_back({i, j});
    }
  }
  return cells;
}

SimulatedReturns simulate_returns(const Scene& scene, const OracleConfig& config, Rng& rng) {
  const auto& g = config.grid;
  SimulatedReturns out;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const SceneObject& o = scene.objects[k];
    const int c = static_cast<int>(o.cls);
    const double r = o.range();
    const double az = o.azimuth();
    double attenuation = 0.0;
    for (std::size_t m = 0; m < scene.objects.size(); ++m) {
      if (m == k) continue;
      const SceneObject& blocker = scene.objects[m];
      const double rb = blocker.range();
      if (rb >= r) continue;
      if (std::abs(blocker.azimuth() - az) < std::atan2(config.occlusion_width, rb)) {
        attenuation = config.occlusion_db;
      }
    }
    const double base = config.p0_db[c] - 40.0 * std::log10(r) - attenuation;
    const int n_returns = rng.uniform_int(config.returns_min[c], config.returns_max[c]);
    for (int n = 0; n < n_returns; ++n) {
      const int offset = n == 0 ? 0 : rng.uniform_int(-config.spread_cells[c], config.spread_cells[c]);
      const double speckle = config.speckle_std_db > 0.0 ? rng.normal(0.0, config.speckle_std_db) : 0.0;
      out.target_points.push_back({r, az + offset * g.az_step(), base + speckle});
    }
    if (config.ghost_prob > 0.0 && rng.bernoulli(config.ghost_prob)) {
      const double dr = rng.uniform(config.ghost_range_min, config.ghost_range_max);
      const int offset = rng.uniform_int(-1, 1);
      const double speckle = config.speckle_std_db > 0.0 ? rng.normal(0.0, config.speckle_std_db) : 0.0;
      out.target_points.push_back(
          {r + dr, az + offset * g.az_step(), base - config.ghost_attenuation_db + speckle});
    }
  }

  const int n_clutter = rng.poisson(config.clutter_rate);
  if (n_clutter > 0) {
    const auto band = clutter_band(scene.raster, config.clutter_band_cells);
    if (!band.empty()) {
      for (int n = 0; n < n_clutter; ++n) {
        const auto& cell = band[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(band.size()) - 1))];
        const double p = rng.normal(config.clutter_mean_db, config.clutter_std_db);
        out.clutter_points.push_back({g.range_center(cell.range), g.az_center(cell.azimuth), p});
      }
    }
  }
  return out;
}

RadarFrame simulate_radar(const Scene& scene, const OracleConfig& config, Rng& rng) {
  SimulatedReturns returns = simulate_returns(scene, config, rng);
  auto points = std::move(returns.target_points);
  points.insert(points.end(), returns.clutter_points.begin(), returns.clutter_points.end());
  return render_points(points, config.grid);
}

FrameRecord generate_frame(const OracleConfig& config, std::uint64_t seed, std::uint64_t index) {
  Rng rng = Rng::substream(seed, index);
  Scene scene = sample_scene(config, rng);
  RadarFrame frame = simulate_radar(scene, config, rng);
  return {std::move(scene.raster), encode_object_list(scene.objects), std::move(frame)};
}

Dataset generate_dataset(std::uint64_t n_frames, const OracleConfig& config, std::uint64_t seed) {
  if (n_frames < 1) throw ConfigError("frames must be ≥ 1");
  config.validate();
  Dataset ds;
  ds.manifest.frame_count = n_frames;
  ds.manifest.grid = config.grid;
  ds.manifest.generator_config_hash = hash_hex(config.hash());
  ds.manifest.seed = seed;
  ds.manifest.generator_config = config.to_json();
  ds.frames.reserve(n_frames);
  for (std::uint64_t i = 0; i < n_frames; ++i) ds.frames.push_back(generate_frame(config, seed, i));
  return ds;
}

}  // namespace drsm
