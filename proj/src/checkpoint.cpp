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

#include "drsm/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace drsm {

void write_checkpoint(std::ostream& os, const CheckpointFile& file) {
  BinaryWriter w(os);
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(file.config_hash);
  w.str(file.metadata);
  w.u32(static_cast<std::uint32_t>(file.records.size()));
  for (const auto& r : file.records) {
    w.str(r.name);
    w.u32(static_cast<std::uint32_t>(r.dims.size()));
    for (Index d : r.dims) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(r.values);
  }
}

CheckpointFile read_checkpoint(std::istream& is) {
  BinaryReader r(is);
  char magic[4];
  r.bytes(magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(FormatErrorCode::kBadMagic, "not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32("checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch,
                      "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  CheckpointFile file;
  file.config_hash = r.u64("config hash");
  file.metadata = r.str("checkpoint metadata");
  const std::uint32_t count = r.u32("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointFile::Record rec;
    rec.name = r.str("tensor name", 4096);
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) throw FormatError(FormatErrorCode::kCorrupt, "tensor " + rec.name + " has rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t extent = r.u32("tensor dims");
      if (extent == 0 || extent > (1u << 24)) {
        throw FormatError(FormatErrorCode::kCorrupt, "tensor " + rec.name + " has invalid extent");
      }
      rec.dims.push_back(extent);
      n *= extent;
    }
    if (n > (std::size_t{1} << 28)) throw FormatError(FormatErrorCode::kCorrupt, "tensor " + rec.name + " too large");
    rec.values.resize(n);
    r.f32s(rec.values, "tensor payload");
    file.records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw FormatError(FormatErrorCode::kCorrupt, "trailing bytes after checkpoint records");
  return file;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_checkpoint(os, file);
}

CheckpointFile load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace drsm
