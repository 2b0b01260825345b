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

#include "drsm/training.hpp"

#include "drsm/adadelta.hpp"
#include "drsm/config.hpp"
#include "drsm/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace drsm {

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(obs_var > 0.0)) throw ConfigError("obs_var must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split_fraction must lie in (0, 1)");
  if (disc_steps < 1) throw ConfigError("disc_steps must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(rho > 0.0 && rho < 1.0) || !(eps > 0.0)) throw ConfigError("need 0 < rho < 1 and eps > 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"variant", variant_tag(variant)}, {"alpha", alpha},           {"obs_var", obs_var},
          {"batch_size", batch_size},        {"epochs", epochs},         {"seed", seed},
          {"split_fraction", split_fraction}, {"disc_steps", disc_steps}, {"checkpoint_every", checkpoint_every},
          {"rho", rho},                      {"eps", eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.alpha = j.at("alpha").get<double>();
  c.obs_var = j.at("obs_var").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.split_fraction = j.at("split_fraction").get<double>();
  c.disc_steps = j.at("disc_steps").get<int>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  c.rho = j.at("rho").get<double>();
  c.eps = j.at("eps").get<double>();
  return c;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "variant") return void(variant = variant_from_string(value));
  if (key == "alpha") return void(alpha = parse_double(key, value));
  if (key == "obs_var") return void(obs_var = parse_double(key, value));
  if (key == "batch_size") return void(batch_size = static_cast<int>(parse_int(key, value)));
  if (key == "epochs") return void(epochs = static_cast<int>(parse_int(key, value)));
  if (key == "seed") return void(seed = static_cast<std::uint64_t>(parse_int(key, value)));
  if (key == "split_fraction") return void(split_fraction = parse_double(key, value));
  if (key == "disc_steps") return void(disc_steps = static_cast<int>(parse_int(key, value)));
  if (key == "checkpoint_every") return void(checkpoint_every = static_cast<int>(parse_int(key, value)));
  if (key == "rho") return void(rho = parse_double(key, value));
  if (key == "eps") return void(eps = parse_double(key, value));
  throw ConfigError("unknown training config key '" + key + "'");
}

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch},   {"loss", loss},  {"l_vae", l_vae}, {"l_adv", l_adv}, {"disc_accuracy", disc_accuracy},
          {"wall_seconds", wall_seconds}};
}

Split split_dataset(std::size_t n_frames, double fraction, std::uint64_t seed) {
  if (n_frames < 2) throw std::invalid_argument("split_dataset: need at least 2 frames");
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split_dataset: fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n_frames);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::substream(seed, 0x5D117u);
  // Fisher-Yates with our own index draw so the permutation does not depend
  // on the standard library's shuffle.
  for (std::size_t i = n_frames - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.next() % (i + 1));
    std::swap(order[i], order[j]);
  }
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_frames)));
  n_train = std::clamp<std::size_t>(n_train, 1, n_frames - 1);
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

namespace {

Tensor<float> standard_normal(Shape dims, Rng& rng) {
  Tensor<float> t(std::move(dims));
  for (Index i = 0; i < t.size(); ++i) t.value()(i) = static_cast<float>(rng.normal());
  return t;
}

void check_finite(const Tensor<float>& loss, const Tape<float>& tape, const char* what, int epoch) {
  if (std::isfinite(loss.item())) return;
  std::string where = tape.first_non_finite();
  if (where.empty()) where = "loss";
  throw TrainingDiverged(std::string(what) + " became non-finite in epoch " + std::to_string(epoch) +
                         "; first non-finite tensor: " + where);
}

}  // namespace

RadarModel<float> train(const std::vector<const FrameRecord*>& frames, const ArchConfig& arch,
                        const TrainConfig& config, TrainLog* log, const TrainHooks& hooks) {
  config.validate();
  if (frames.empty()) throw std::invalid_argument("train: no frames");
  RadarModel<float> model(config.variant, arch, config.seed);
  Adadelta<float> gen_opt(model.generator(), static_cast<float>(config.rho), static_cast<float>(config.eps));
  Adadelta<float> disc_opt(model.discriminator(), static_cast<float>(config.rho), static_cast<float>(config.eps));
  const Variant v = config.variant;
  const float alpha = v == Variant::kVae ? 1.0f : v == Variant::kVaeAdv ? 0.0f : static_cast<float>(config.alpha);
  const float obs_var = static_cast<float>(config.obs_var);

  std::vector<std::size_t> order(frames.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::substream(config.seed, 0xE90C0000ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng.next() % (i + 1))]);
    }

    EpochLog entry;
    entry.epoch = epoch;
    double disc_correct = 0.0, disc_seen = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const FrameRecord*> members;
      for (std::size_t k = start; k < end; ++k) members.push_back(frames[order[k]]);
      const SceneBatch<float> batch = make_batch<float>(arch, members);
      const Index n = static_cast<Index>(members.size());
      const float inv_n = 1.0f / static_cast<float>(n);
      const std::uint64_t step = (static_cast<std::uint64_t>(epoch) << 32) | n_batches;
      Rng eta_rng = Rng::substream(config.seed ^ 0x7E7Au, step);
      Rng prior_rng = Rng::substream(config.seed ^ 0x9A10u, step);

      if (uses_discriminator(v)) {
        for (int d = 0; d < config.disc_steps; ++d) {
          Tape<float> gen_tape(false);
          const Tensor<float> fake =
              model.decode(gen_tape, model.encode(gen_tape, batch), standard_normal({n, arch.d_z}, prior_rng));
          Tape<float> tape;
          const Tensor<float> d_real = model.discriminate(tape, batch.target);
          const Tensor<float> d_fake = model.discriminate(tape, fake);
          const Tensor<float> l_disc = loss_disc(tape, d_real, d_fake);
          check_finite(l_disc, tape, "discriminator loss", epoch);
          backward(l_disc, tape);
          disc_opt.step(model.discriminator());
          disc_correct += (d_real.value() > 0.5f).count() + (d_fake.value() < 0.5f).count();
          disc_seen += static_cast<double>(2 * n);
        }
      }

      Tape<float> tape;
      const Tensor<float> x = model.encode(tape, batch);
      Tensor<float> loss;
      if (v == Variant::kNormal) {
        const auto p = model.normal_forward(tape, x);
        loss = scale(tape, gaussian_nll(tape, p.mean, p.logvar, batch.target), inv_n);
        entry.l_vae += loss.item();
      } else if (v == Variant::kGmm) {
        const auto p = model.gmm_forward(tape, x);
        loss = scale(tape, gmm_nll(tape, p.weights, p.means, p.logvars, batch.target), inv_n);
        entry.l_vae += loss.item();
      } else {
        const auto q = model.recognize(tape, x, batch.target);
        const Tensor<float> z = reparameterize(tape, q, standard_normal({n, arch.d_z}, eta_rng));
        const Tensor<float> l_vae = scale(tape, loss_vae(tape, model.decode(tape, x, z), batch.target, q, obs_var), inv_n);
        entry.l_vae += l_vae.item();
        if (uses_discriminator(v)) {
          const Tensor<float> fake = model.decode(tape, x, standard_normal({n, arch.d_z}, prior_rng));
          const Tensor<float> l_adv = loss_adv(tape, model.discriminate(tape, fake));
          entry.l_adv += l_adv.item();
          loss = loss_mixed(tape, l_vae, l_adv, alpha);
        } else {
          loss = l_vae;
        }
      }
      check_finite(loss, tape, "training loss", epoch);
      entry.loss += loss.item();
      backward(loss, tape);
      gen_opt.step(model.generator());
      ++n_batches;
    }
    entry.loss /= static_cast<double>(n_batches);
    entry.l_vae /= static_cast<double>(n_batches);
    entry.l_adv /= static_cast<double>(n_batches);
    entry.disc_accuracy = disc_seen > 0.0 ? disc_correct / disc_seen : 0.0;
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log) log->epochs.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 &&
        epoch + 1 < config.epochs) {
      hooks.on_checkpoint(epoch + 1, model);
    }
  }
  return model;
}

}  // namespace drsm
