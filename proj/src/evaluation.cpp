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

#include "drsm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace drsm {

std::vector<RadarFrame> ModelSampler::sample(std::span<const FrameRecord* const> frames, std::span<Rng> rngs) const {
  const SceneBatch<float> batch = make_batch<float>(model_.arch(), frames);
  const Tensor<float> normalized = model_.sample(batch, rngs);
  const auto& spec = frames.front()->frame.spec;
  const Index cells = spec.cells();
  std::vector<RadarFrame> out;
  out.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    out.push_back(denormalize_frame(normalized.value().segment(static_cast<Index>(k) * cells, cells), spec));
  }
  return out;
}

std::vector<RadarFrame> ReplaySampler::sample(std::span<const FrameRecord* const> frames, std::span<Rng>) const {
  std::vector<RadarFrame> out;
  for (const auto* f : frames) out.push_back(f->frame);
  return out;
}

double PiecewiseUniformHist::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

std::vector<double> PiecewiseUniformHist::probabilities() const {
  const double t = total();
  std::vector<double> p(counts.size(), 0.0);
  if (t > 0.0) {
    for (std::size_t i = 0; i < counts.size(); ++i) p[i] = counts[i] / t;
  }
  return p;
}

PiecewiseUniformHist make_histogram(std::span<const double> values, double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("histogram needs bins >= 1 and hi > lo");
  PiecewiseUniformHist h{lo, hi, std::vector<double>(static_cast<std::size_t>(bins), 0.0)};
  const double width = (hi - lo) / bins;
  for (double v : values) {
    // Values on or beyond the edges land in the edge bins.
    const int b = std::clamp(static_cast<int>(std::floor((v - lo) / width)), 0, bins - 1);
    h.counts[static_cast<std::size_t>(b)] += 1.0;
  }
  return h;
}

double pooled_rmse(std::span<const RadarFrame> truth, std::span<const RadarFrame> prediction) {
  if (truth.size() != prediction.size() || truth.empty()) {
    throw std::invalid_argument("pooled_rmse: need equally many (>= 1) truth and predicted frames");
  }
  double sq = 0.0;
  double n = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k].power.size() != prediction[k].power.size()) throw std::invalid_argument("pooled_rmse: grid mismatch");
    sq += (truth[k].power.cast<double>() - prediction[k].power.cast<double>()).square().sum();
    n += static_cast<double>(truth[k].power.size());
  }
  return std::sqrt(sq / n);
}

double expected_rmse(const FrameSampler& sampler, std::span<const FrameRecord* const> frames,
                     std::span<const std::size_t> indices, std::uint64_t seed) {
  if (frames.empty() || frames.size() != indices.size()) {
    throw std::invalid_argument("expected_rmse: need a nonempty test set with one index per frame");
  }
  double sq = 0.0;
  double n = 0.0;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    Rng rng = Rng::substream(seed, indices[k]);
    const RadarFrame pred = sampler.sample(frames.subspan(k, 1), std::span<Rng>(&rng, 1)).front();
    sq += (frames[k]->frame.power.cast<double>() - pred.power.cast<double>()).square().sum();
    n += static_cast<double>(pred.power.size());
  }
  return std::sqrt(sq / n);
}

double fit_range_power(std::span<const RangePowerPoint> points) {
  if (points.empty()) throw std::invalid_argument("fit_range_power: no points");
  double acc = 0.0;
  for (const auto& p : points) {
    if (!(p.range > 0.0)) throw std::invalid_argument("fit_range_power: ranges must be > 0");
    acc += p.power_db + 40.0 * std::log10(p.range);
  }
  return acc / static_cast<double>(points.size());
}

std::vector<RangePowerPoint> extract_ccr_returns(const RadarFrame& frame, const ObjectList& objects) {
  const auto& g = frame.spec;
  std::vector<RangePowerPoint> out;
  for (const auto& o : decode_object_list(objects)) {
    if (o.cls != ObjectClass::kCcr) continue;
    const auto cell = g.cell_of_xy(o.x, o.y);
    if (!cell) continue;
    float best = -std::numeric_limits<float>::infinity();
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const int i = cell->range + di, j = cell->azimuth + dj;
        if (i < 0 || j < 0 || i >= g.n_range || j >= g.n_azimuth) continue;
        best = std::max(best, frame.at(i, j));
      }
    }
    out.push_back({o.range(), best});
  }
  return out;
}

std::vector<ClutterPoint> extract_clutter(const RadarFrame& frame, const SceneRaster& raster, double threshold_db) {
  const auto& g = frame.spec;
  if (!(raster.spec == g)) throw std::invalid_argument("extract_clutter: raster and frame grids differ");
  std::vector<ClutterPoint> out;
  for (int i = 0; i < g.n_range; ++i) {
    for (int j = 0; j < g.n_azimuth; ++j) {
      if (raster.is_road(i, j)) continue;
      const double p = frame.at(i, j);
      if (p > threshold_db) out.push_back({g.range_center(i), g.az_center(j), p});
    }
  }
  return out;
}

double histogram_kl(const PiecewiseUniformHist& real, const PiecewiseUniformHist& model) {
  if (real.bins() != model.bins() || real.lo != model.lo || real.hi != model.hi) {
    throw std::invalid_argument("histogram_kl: histograms use different binning");
  }
  auto smooth = [](const PiecewiseUniformHist& h) {
    std::vector<double> p = h.probabilities();
    double s = 0.0;
    for (double& v : p) s += (v += kKlSmoothing);
    for (double& v : p) v /= s;
    return p;
  };
  const auto p = smooth(real);
  const auto q = smooth(model);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(0.0, kl);
}

ClutterHistograms clutter_histograms(std::span<const ClutterPoint> points, const PolarGridSpec& spec) {
  std::vector<double> d, a, p;
  for (const auto& c : points) {
    d.push_back(c.range);
    a.push_back(c.azimuth * 180.0 / std::numbers::pi);
    p.push_back(c.power_db);
  }
  constexpr int kBins = 32;
  return {make_histogram(d, 0.0, spec.range_max, kBins),
          make_histogram(a, spec.az_min * 180.0 / std::numbers::pi, spec.az_max * 180.0 / std::numbers::pi, kBins),
          make_histogram(p, spec.floor_db, spec.ceil_db, kBins), points.size()};
}

namespace {

nlohmann::json hist_json(const PiecewiseUniformHist& h) {
  return {{"lo", h.lo}, {"hi", h.hi}, {"bins", h.bins()}, {"counts", h.counts}, {"probabilities", h.probabilities()}};
}

nlohmann::json clutter_json(const ClutterHistograms& c) {
  return {{"points", c.points}, {"distance_m", hist_json(c.distance)}, {"angle_deg", hist_json(c.angle)},
          {"power_db", hist_json(c.power)}};
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json EvalReport::to_json() const {
  return {{"variant", variant},
          {"seed", seed},
          {"dataset", dataset},
          {"test_frames", test_frames},
          {"rmse_db", rmse_db},
          {"rmse_units", "dB"},
          {"p0_model_db", optional_json(p0_model_db)},
          {"p0_truth_db", optional_json(p0_truth_db)},
          {"ccr_returns", ccr_returns},
          {"kl_distance", kl_distance},
          {"kl_angle", kl_angle},
          {"kl_power", kl_power},
          {"kl_units", "nats"},
          {"clutter_threshold_db", clutter_threshold_db},
          {"clutter_truth", clutter_json(truth_clutter)},
          {"clutter_model", clutter_json(model_clutter)}};
}

EvalReport evaluate(const FrameSampler& sampler, const Dataset& dataset, std::span<const std::size_t> test_indices,
                    std::uint64_t seed, const EvalOptions& options) {
  if (test_indices.empty()) throw std::invalid_argument("evaluate: empty test set");
  const PolarGridSpec& spec = dataset.manifest.grid;
  const double threshold = options.clutter_threshold_db.value_or(spec.floor_db + 10.0);
  EvalReport report;
  report.variant = sampler.name();
  report.seed = seed;
  report.dataset = dataset_fingerprint(dataset.manifest);
  report.test_frames = test_indices.size();
  report.clutter_threshold_db = threshold;

  double sq = 0.0, cells = 0.0;
  std::vector<RangePowerPoint> ccr_truth, ccr_model;
  std::vector<ClutterPoint> clutter_truth, clutter_model;
  const std::size_t chunk = std::max<std::size_t>(1, options.batch);
  for (std::size_t start = 0; start < test_indices.size(); start += chunk) {
    const std::size_t end = std::min(test_indices.size(), start + chunk);
    std::vector<const FrameRecord*> frames;
    std::vector<Rng> rngs;
    for (std::size_t k = start; k < end; ++k) {
      const std::size_t idx = test_indices[k];
      if (idx >= dataset.frames.size()) throw std::out_of_range("evaluate: test index out of range");
      frames.push_back(&dataset.frames[idx]);
      rngs.push_back(Rng::substream(seed, idx));
    }
    const auto samples = sampler.sample(frames, rngs);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const FrameRecord& f = *frames[k];
      sq += (f.frame.power.cast<double>() - samples[k].power.cast<double>()).square().sum();
      cells += static_cast<double>(f.frame.power.size());
      for (const auto& p : extract_ccr_returns(f.frame, f.objects)) ccr_truth.push_back(p);
      for (const auto& p : extract_ccr_returns(samples[k], f.objects)) ccr_model.push_back(p);
      for (const auto& c : extract_clutter(f.frame, f.raster, threshold)) clutter_truth.push_back(c);
      for (const auto& c : extract_clutter(samples[k], f.raster, threshold)) clutter_model.push_back(c);
    }
  }
  report.rmse_db = std::sqrt(sq / cells);
  report.ccr_returns = ccr_truth.size();
  if (!ccr_truth.empty()) {
    report.p0_truth_db = fit_range_power(ccr_truth);
    report.p0_model_db = fit_range_power(ccr_model);
  }
  report.truth_clutter = clutter_histograms(clutter_truth, spec);
  report.model_clutter = clutter_histograms(clutter_model, spec);
  report.kl_distance = histogram_kl(report.truth_clutter.distance, report.model_clutter.distance);
  report.kl_angle = histogram_kl(report.truth_clutter.angle, report.model_clutter.angle);
  report.kl_power = histogram_kl(report.truth_clutter.power, report.model_clutter.power);
  return report;
}

}  // namespace drsm
