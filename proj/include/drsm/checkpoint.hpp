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

#ifndef DRSM_CHECKPOINT_HPP
#define DRSM_CHECKPOINT_HPP

#include "drsm/binary_io.hpp"
#include "drsm/parameters.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace drsm {

inline constexpr char kCheckpointMagic[4] = {'D', 'R', 'S', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// On-disk checkpoint: "DRSM", u32 version, u64 config hash, metadata JSON
// (u32 length + bytes), u32 record count, then per tensor: u32 name length,
// name, u32 rank, u32 dims..., little-endian f32 payload.
struct CheckpointFile {
  std::uint64_t config_hash = 0;
  std::string metadata;
  struct Record {
    std::string name;
    Shape dims;
    std::vector<float> values;
  };
  std::vector<Record> records;
};

void write_checkpoint(std::ostream& os, const CheckpointFile& file);
CheckpointFile read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile load_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
std::vector<CheckpointFile::Record> to_records(const ParameterSet<Scalar>& params) {
  std::vector<CheckpointFile::Record> out;
  for (const auto& e : params.entries()) {
    CheckpointFile::Record r{e.name, e.tensor.dims(), {}};
    r.values.resize(static_cast<std::size_t>(e.tensor.size()));
    for (Index i = 0; i < e.tensor.size(); ++i) r.values[i] = static_cast<float>(e.tensor.value()(i));
    out.push_back(std::move(r));
  }
  return out;
}

// Copies stored tensors into an already-built parameter set; names, order
// and shapes must match exactly.
template <typename Scalar>
void assign_records(ParameterSet<Scalar>& params, const std::vector<CheckpointFile::Record>& records) {
  auto& entries = params.entries();
  if (entries.size() != records.size()) {
    throw FormatError(FormatErrorCode::kCorrupt,
                      "checkpoint holds " + std::to_string(records.size()) + " tensors, model expects " +
                          std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& r = records[i];
    if (r.name != entries[i].name || r.dims != entries[i].tensor.dims()) {
      throw FormatError(FormatErrorCode::kCorrupt,
                        "checkpoint tensor " + r.name + " " + shape_string(r.dims) + " does not match model tensor " +
                            entries[i].name + " " + shape_string(entries[i].tensor.dims()));
    }
    auto& v = entries[i].tensor.value();
    for (Index j = 0; j < v.size(); ++j) v(j) = static_cast<Scalar>(r.values[static_cast<std::size_t>(j)]);
  }
}

}  // namespace drsm

#endif  // DRSM_CHECKPOINT_HPP
