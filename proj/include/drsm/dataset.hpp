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

#ifndef DRSM_DATASET_HPP
#define DRSM_DATASET_HPP

#include "drsm/binary_io.hpp"
#include "drsm/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace drsm {

inline constexpr char kDatasetMagic[4] = {'D', 'R', 'S', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

struct FrameRecord {
  SceneRaster raster;
  ObjectList objects;
  RadarFrame frame;
};

struct DatasetManifest {
  std::uint64_t frame_count = 0;
  PolarGridSpec grid;
  std::string generator_config_hash;  // 16 hex digits
  std::uint64_t seed = 0;
  nlohmann::json generator_config = nlohmann::json::object();
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FrameRecord> frames;
};

nlohmann::json grid_to_json(const PolarGridSpec& spec);
PolarGridSpec grid_from_json(const nlohmann::json& j);
std::string hash_hex(std::uint64_t h);

// Hash of the manifest; identifies a dataset in reports and checkpoints.
std::string dataset_fingerprint(const DatasetManifest& manifest);

// "DRSD", u32 version, u32 manifest length, manifest JSON, then per frame
// little-endian f32 blocks: raster (n_range*n_azimuth), object list
// (capacity*features), power grid (n_range*n_azimuth).
void write_dataset(std::ostream& os, const Dataset& dataset);
Dataset read_dataset(std::istream& is);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// Binary PGM (P5) of a normalized grid, rows = range bins, columns =
// azimuth bins; header "P5 <cols> <rows> 255\n", pixel round(255 * v).
void write_pgm(std::ostream& os, const Eigen::ArrayXf& normalized, int rows, int cols);
void save_pgm(const std::filesystem::path& path, const RadarFrame& frame);

}  // namespace drsm

#endif  // DRSM_DATASET_HPP
