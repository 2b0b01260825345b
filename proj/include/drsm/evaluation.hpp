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

#ifndef DRSM_EVALUATION_HPP
#define DRSM_EVALUATION_HPP

#include "drsm/dataset.hpp"
#include "drsm/nets.hpp"
#include "drsm/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace drsm {

// Draws one radar frame (dB) per scene. rngs[k] belongs to frames[k].
class FrameSampler {
 public:
  virtual ~FrameSampler() = default;
  virtual std::vector<RadarFrame> sample(std::span<const FrameRecord* const> frames, std::span<Rng> rngs) const = 0;
  virtual std::string name() const = 0;
};

class ModelSampler final : public FrameSampler {
 public:
  explicit ModelSampler(const RadarModel<float>& model) : model_(model) {}
  std::vector<RadarFrame> sample(std::span<const FrameRecord* const> frames, std::span<Rng> rngs) const override;
  std::string name() const override { return variant_tag(model_.variant()); }

 private:
  const RadarModel<float>& model_;
};

// Returns the recorded frame unchanged.
class ReplaySampler final : public FrameSampler {
 public:
  std::vector<RadarFrame> sample(std::span<const FrameRecord* const> frames, std::span<Rng> rngs) const override;
  std::string name() const override { return "replay"; }
};

struct RangePowerPoint {
  double range;
  double power_db;
};

struct ClutterPoint {
  double range;    // m, cell center
  double azimuth;  // rad, cell center
  double power_db;
};

struct PiecewiseUniformHist {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> counts;

  int bins() const { return static_cast<int>(counts.size()); }
  double total() const;
  std::vector<double> probabilities() const;  // all zero when empty
};

PiecewiseUniformHist make_histogram(std::span<const double> values, double lo, double hi, int bins);

// sqrt of the mean squared dB error pooled over all cells and frames.
double pooled_rmse(std::span<const RadarFrame> truth, std::span<const RadarFrame> prediction);

// One sample per test frame, rng substream (seed, frame index).
double expected_rmse(const FrameSampler& sampler, std::span<const FrameRecord* const> frames,
                     std::span<const std::size_t> indices, std::uint64_t seed);

// Least squares in dB of P(r) = P0 - 40 log10 r; closed form.
double fit_range_power(std::span<const RangePowerPoint> points);

// Per CCR in the object list: max power in the 3x3 window around its cell.
std::vector<RangePowerPoint> extract_ccr_returns(const RadarFrame& frame, const ObjectList& objects);

std::vector<ClutterPoint> extract_clutter(const RadarFrame& frame, const SceneRaster& raster, double threshold_db);

inline constexpr double kKlSmoothing = 1e-6;

// KL(real || model) in nats after adding kKlSmoothing per bin and renormalizing.
double histogram_kl(const PiecewiseUniformHist& real, const PiecewiseUniformHist& model);

struct ClutterHistograms {
  PiecewiseUniformHist distance;  // m, 32 bins over [0, 75]
  PiecewiseUniformHist angle;     // degrees, 32 bins over [-45, 45]
  PiecewiseUniformHist power;     // dB, 32 bins over [-90, 0]
  std::size_t points = 0;
};

ClutterHistograms clutter_histograms(std::span<const ClutterPoint> points, const PolarGridSpec& spec);

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::string dataset;
  std::size_t test_frames = 0;
  double rmse_db = 0.0;
  std::optional<double> p0_model_db;
  std::optional<double> p0_truth_db;
  std::size_t ccr_returns = 0;
  double kl_distance = 0.0;
  double kl_angle = 0.0;
  double kl_power = 0.0;
  double clutter_threshold_db = 0.0;
  ClutterHistograms truth_clutter;
  ClutterHistograms model_clutter;

  nlohmann::json to_json() const;
};

struct EvalOptions {
  std::optional<double> clutter_threshold_db;  // default floor_db + 10
  std::size_t batch = 32;
};

EvalReport evaluate(const FrameSampler& sampler, const Dataset& dataset, std::span<const std::size_t> test_indices,
                    std::uint64_t seed, const EvalOptions& options = {});

}  // namespace drsm

#endif  // DRSM_EVALUATION_HPP
