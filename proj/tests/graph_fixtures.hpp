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
#ifndef DRSM_TESTS_GRAPH_FIXTURES_HPP
#define DRSM_TESTS_GRAPH_FIXTURES_HPP

#include "drsm/losses.hpp"
#include "drsm/nets.hpp"
#include "drsm/oracle.hpp"
#include "test_support.hpp"

#include <functional>
#include <string>
#include <vector>

namespace drsm::testing {

inline constexpr double kGraphTol = 1e-3;
inline constexpr int kGraphTrials = 20;
inline constexpr double kGraphStep = 1e-3;
// A 1e-3 nudge to a shared bias moves hundreds of ReLU inputs at once, so a
// few coordinates per leaf can straddle a kink. Those are screened out; the
// rest must agree, and most coordinates must survive the screen. Error is
// measured on the full parameter gradient: a leaf whose own gradient is near
// zero shows the O(h^2) truncation of the central difference, not a bug.
inline constexpr double kMaxSkippedFraction = 0.25;

inline ArchConfig tiny_arch() {
  ArchConfig a;
  a.n_range = 8;
  a.n_azimuth = 8;
  a.conv_channels = {2, 3, 4};
  a.object_channels = 3;
  a.encoder_hidden = 6;
  a.d_x = 5;
  a.d_z = 3;
  a.decoder_hidden = 6;
  a.deconv_channels = {4, 3, 2};
  a.gmm_components = 2;
  return a;
}

inline std::vector<FrameRecord> tiny_frames(std::uint64_t seed, int n) {
  OracleConfig c;
  c.grid.n_range = 8;
  c.grid.n_azimuth = 8;
  c.clutter_rate = 4;
  std::vector<FrameRecord> out;
  for (int k = 0; k < n; ++k) out.push_back(generate_frame(c, seed, static_cast<std::uint64_t>(k)));
  return out;
}

inline SceneBatch<double> tiny_batch(const ArchConfig& a, std::uint64_t seed, int n = 2) {
  const auto frames = tiny_frames(seed, n);
  std::vector<const FrameRecord*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  auto b = make_batch<double>(a, ptrs);
  // Oracle targets are mostly exactly 0; spread them so every cell matters.
  Rng rng(seed);
  for (Index i = 0; i < b.target.size(); ++i) b.target.value()(i) += rng.uniform(0.05, 0.3);
  return b;
}

// Biases start at zero, which puts ReLUs fed by empty cells or padded
// object rows exactly on their kink. Move them to a generic point first.
inline std::vector<TensorD> graph_leaves(ParameterSet<double>& ps) {
  std::vector<TensorD> out;
  Rng rng(ps.entries().size());
  for (auto& e : ps.entries()) {
    if (e.name.ends_with(".bias")) {
      for (Index i = 0; i < e.tensor.size(); ++i) e.tensor.value()(i) = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.1, 0.5);
    }
    out.push_back(e.tensor);
  }
  return out;
}

inline TensorD standard_noise(Rng& rng, Index n, Index d) {
  TensorD z({n, d});
  for (Index i = 0; i < z.size(); ++i) z.value()(i) = rng.normal();
  return z;
}

struct GraphTrial {
  GradCheck check;
  std::string worst_leaf;
};

struct GraphCase {
  std::string name;
  std::function<GraphTrial(int trial)> run;
};

inline bool graph_trial_ok(const GraphTrial& g) {
  return g.check.global_rel_error <= kGraphTol &&
         static_cast<double>(g.check.skipped) <= kMaxSkippedFraction * static_cast<double>(g.check.checked + g.check.skipped);
}

// The composed encoder -> head -> loss graphs, each checked end to end on a
// fresh model and batch per trial.
inline std::vector<GraphCase> graph_cases() {
  auto finish = [](ParameterSet<double>& ps, const std::function<TensorD(TapeD&)>& f, Rng& rng) {
    GraphTrial out;
    out.check = check_gradients(f, graph_leaves(ps), rng, kGraphStep, 64, 1e-10, true);
    out.worst_leaf = ps.entries()[out.check.worst_leaf].name;
    return out;
  };
  std::vector<GraphCase> cases;
  cases.push_back({"normal_head", [finish](int t) {
                     const ArchConfig a = tiny_arch();
                     RadarModel<double> m(Variant::kNormal, a, 100 + t);
                     auto b = tiny_batch(a, 200 + t);
                     auto f = [&](TapeD& tape) {
                       auto p = m.normal_forward(tape, m.encode(tape, b));
                       return gaussian_nll(tape, p.mean, p.logvar, b.target);
                     };
                     Rng rng(t);
                     return finish(m.generator(), f, rng);
                   }});
  cases.push_back({"gmm_head", [finish](int t) {
                     const ArchConfig a = tiny_arch();
                     RadarModel<double> m(Variant::kGmm, a, 300 + t);
                     auto b = tiny_batch(a, 400 + t);
                     auto f = [&](TapeD& tape) {
                       auto p = m.gmm_forward(tape, m.encode(tape, b));
                       return gmm_nll(tape, p.weights, p.means, p.logvars, b.target);
                     };
                     Rng rng(t);
                     return finish(m.generator(), f, rng);
                   }});
  // encoder -> recognition -> reparameterized z -> decoder -> loss_vae
  cases.push_back({"vae_loss", [finish](int t) {
                     const ArchConfig a = tiny_arch();
                     RadarModel<double> m(Variant::kVae, a, 500 + t);
                     auto b = tiny_batch(a, 600 + t);
                     Rng rng(t);
                     TensorD eta = standard_noise(rng, 2, a.d_z);
                     auto f = [&](TapeD& tape) {
                       auto x = m.encode(tape, b);
                       auto q = m.recognize(tape, x, b.target);
                       return loss_vae(tape, m.decode(tape, x, reparameterize(tape, q, eta)), b.target, q, 0.5);
                     };
                     return finish(m.generator(), f, rng);
                   }});
  cases.push_back({"mixed_loss", [finish](int t) {
                     const ArchConfig a = tiny_arch();
                     RadarModel<double> m(Variant::kVaeMixed, a, 700 + t);
                     auto b = tiny_batch(a, 800 + t);
                     Rng rng(t);
                     TensorD eta = standard_noise(rng, 2, a.d_z), prior = standard_noise(rng, 2, a.d_z);
                     auto f = [&](TapeD& tape) {
                       auto x = m.encode(tape, b);
                       auto q = m.recognize(tape, x, b.target);
                       auto l_vae = loss_vae(tape, m.decode(tape, x, reparameterize(tape, q, eta)), b.target, q, 1.0);
                       auto l_adv = loss_adv(tape, m.discriminate(tape, m.decode(tape, x, prior)));
                       return loss_mixed(tape, l_vae, l_adv, 0.7);
                     };
                     return finish(m.generator(), f, rng);
                   }});
  cases.push_back({"discriminator_loss", [finish](int t) {
                     const ArchConfig a = tiny_arch();
                     RadarModel<double> m(Variant::kVaeAdv, a, 900 + t);
                     auto b = tiny_batch(a, 1000 + t);
                     Rng rng(t);
                     TensorD fake({2, 8, 8, 1});
                     for (Index i = 0; i < fake.size(); ++i) fake.value()(i) = rng.uniform();
                     auto f = [&](TapeD& tape) {
                       return loss_disc(tape, m.discriminate(tape, b.target), m.discriminate(tape, fake));
                     };
                     return finish(m.discriminator(), f, rng);
                   }});
  return cases;
}

}  // namespace drsm::testing

#endif  // DRSM_TESTS_GRAPH_FIXTURES_HPP
