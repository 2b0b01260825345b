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

#ifndef DRSM_TRAINING_HPP
#define DRSM_TRAINING_HPP

#include "drsm/dataset.hpp"
#include "drsm/nets.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace drsm {

struct TrainConfig {
  Variant variant = Variant::kVaeMixed;
  double alpha = 0.99;
  double obs_var = 1.0;  // sigma^2 of the reconstruction term, normalized units
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;
  double split_fraction = 0.9;
  int disc_steps = 1;  // discriminator updates per generator update
  int checkpoint_every = 0;
  double rho = 0.95;
  double eps = 1e-6;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  void set(const std::string& key, const std::string& value);  // ConfigError on unknown key
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;       // optimized objective, batch mean
  double l_vae = 0.0;      // NLL for direct variants
  double l_adv = 0.0;
  double disc_accuracy = 0.0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

// Non-finite loss during training; names the first tensor that went bad.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

Split split_dataset(std::size_t n_frames, double fraction, std::uint64_t seed);

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(int epoch, const RadarModel<float>&)> on_checkpoint;
};

// Trains on the given frames (already split). Deterministic given config.
RadarModel<float> train(const std::vector<const FrameRecord*>& frames, const ArchConfig& arch,
                        const TrainConfig& config, TrainLog* log = nullptr, const TrainHooks& hooks = {});

}  // namespace drsm

#endif  // DRSM_TRAINING_HPP
