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

#include "drsm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>

namespace drsm {

nlohmann::json grid_to_json(const PolarGridSpec& spec) {
  return {{"n_range", spec.n_range},     {"n_azimuth", spec.n_azimuth}, {"range_min", spec.range_min},
          {"range_max", spec.range_max}, {"az_min", spec.az_min},       {"az_max", spec.az_max},
          {"floor_db", spec.floor_db},   {"ceil_db", spec.ceil_db}};
}

PolarGridSpec grid_from_json(const nlohmann::json& j) {
  PolarGridSpec s;
  s.n_range = j.at("n_range").get<int>();
  s.n_azimuth = j.at("n_azimuth").get<int>();
  s.range_min = j.at("range_min").get<double>();
  s.range_max = j.at("range_max").get<double>();
  s.az_min = j.at("az_min").get<double>();
  s.az_max = j.at("az_max").get<double>();
  s.floor_db = j.at("floor_db").get<double>();
  s.ceil_db = j.at("ceil_db").get<double>();
  s.validate();
  return s;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  return {{"frame_count", m.frame_count},
          {"grid", grid_to_json(m.grid)},
          {"object_capacity", kObjectCapacity},
          {"object_features", kObjectFeatures},
          {"generator_config_hash", m.generator_config_hash},
          {"seed", m.seed},
          {"generator_config", m.generator_config}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.frame_count = j.at("frame_count").get<std::uint64_t>();
  m.grid = grid_from_json(j.at("grid"));
  if (j.at("object_capacity").get<int>() != kObjectCapacity ||
      j.at("object_features").get<int>() != kObjectFeatures) {
    throw FormatError(FormatErrorCode::kManifest, "manifest object-list layout differs from this build");
  }
  m.generator_config_hash = j.at("generator_config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.generator_config = j.at("generator_config");
  return m;
}

std::size_t record_floats(const PolarGridSpec& g) {
  return static_cast<std::size_t>(2 * g.cells() + kObjectCapacity * kObjectFeatures);
}

}  // namespace

std::string dataset_fingerprint(const DatasetManifest& manifest) {
  return hash_hex(fnv1a64(manifest_to_json(manifest).dump()));
}

void write_dataset(std::ostream& os, const Dataset& dataset) {
  const auto& m = dataset.manifest;
  if (m.frame_count != dataset.frames.size()) {
    throw FormatError(FormatErrorCode::kManifest, "manifest frame count " + std::to_string(m.frame_count) +
                                                      " != " + std::to_string(dataset.frames.size()) +
                                                      " stored frames");
  }
  const int cells = m.grid.cells();
  for (const auto& f : dataset.frames) {
    if (!(f.raster.spec == m.grid) || !(f.frame.spec == m.grid) || f.raster.layers.size() != cells ||
        f.frame.power.size() != cells || f.objects.capacity != kObjectCapacity ||
        f.objects.features.size() != kObjectCapacity * kObjectFeatures) {
      throw FormatError(FormatErrorCode::kManifest, "frame grid or layout does not match the manifest");
    }
  }
  BinaryWriter w(os);
  w.bytes(kDatasetMagic, 4);
  w.u32(kDatasetVersion);
  w.str(manifest_to_json(m).dump());
  for (const auto& f : dataset.frames) {
    w.f32s(std::span<const float>(f.raster.layers.data(), f.raster.layers.size()));
    w.f32s(std::span<const float>(f.objects.features.data(), f.objects.features.size()));
    w.f32s(std::span<const float>(f.frame.power.data(), f.frame.power.size()));
  }
}

Dataset read_dataset(std::istream& is) {
  const auto start = is.tellg();
  is.seekg(0, std::ios::end);
  const auto end = is.tellg();
  is.seekg(start);
  const bool sized = start != std::streampos(-1) && end != std::streampos(-1);

  BinaryReader r(is);
  char magic[4];
  r.bytes(magic, 4, "dataset magic");
  if (std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw FormatError(FormatErrorCode::kBadMagic, "not a dataset file (bad magic)");
  }
  const std::uint32_t version = r.u32("dataset version");
  if (version != kDatasetVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch, "dataset version " + std::to_string(version) +
                                                             " unsupported (expected " +
                                                             std::to_string(kDatasetVersion) + ")");
  }
  const std::string text = r.str("dataset manifest");
  Dataset ds;
  try {
    ds.manifest = manifest_from_json(nlohmann::json::parse(text));
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kCorrupt, std::string("corrupt dataset header: ") + e.what());
  }
  const PolarGridSpec& g = ds.manifest.grid;
  const std::size_t stride = record_floats(g) * sizeof(float);
  if (sized) {
    const auto payload = static_cast<std::size_t>(end - is.tellg());
    if (payload % stride != 0) {
      throw FormatError(FormatErrorCode::kTruncated, "truncated payload: " + std::to_string(payload) +
                                                         " bytes is not a whole number of frame records");
    }
    if (payload / stride != ds.manifest.frame_count) {
      throw FormatError(FormatErrorCode::kManifest, "manifest frame count " +
                                                        std::to_string(ds.manifest.frame_count) + " but file holds " +
                                                        std::to_string(payload / stride) + " records");
    }
  }
  ds.frames.reserve(ds.manifest.frame_count);
  for (std::uint64_t k = 0; k < ds.manifest.frame_count; ++k) {
    FrameRecord f{{g, Eigen::ArrayXf(g.cells())},
                  {kObjectCapacity, Eigen::ArrayXf(kObjectCapacity * kObjectFeatures)},
                  {g, Eigen::ArrayXf(g.cells())}};
    r.f32s(std::span<float>(f.raster.layers.data(), f.raster.layers.size()), "raster");
    r.f32s(std::span<float>(f.objects.features.data(), f.objects.features.size()), "object list");
    r.f32s(std::span<float>(f.frame.power.data(), f.frame.power.size()), "power grid");
    ds.frames.push_back(std::move(f));
  }
  if (!r.at_end()) throw FormatError(FormatErrorCode::kManifest, "records beyond manifest frame count");
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_dataset(os, dataset);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  return read_dataset(is);
}

void write_pgm(std::ostream& os, const Eigen::ArrayXf& normalized, int rows, int cols) {
  if (normalized.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw std::invalid_argument("pgm: value count does not match image extents");
  }
  const std::string header = "P5 " + std::to_string(cols) + " " + std::to_string(rows) + " 255\n";
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<unsigned char> pixels(static_cast<std::size_t>(normalized.size()));
  for (Eigen::Index i = 0; i < normalized.size(); ++i) {
    const float v = std::clamp(normalized(i), 0.0f, 1.0f);
    pixels[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(255.0f * v));
  }
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!os) throw FormatError(FormatErrorCode::kIo, "pgm write failed");
}

void save_pgm(const std::filesystem::path& path, const RadarFrame& frame) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_pgm(os, normalize_frame(frame), frame.spec.n_range, frame.spec.n_azimuth);
}

}  // namespace drsm
