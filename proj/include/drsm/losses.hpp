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

#ifndef DRSM_LOSSES_HPP
#define DRSM_LOSSES_HPP

#include "drsm/nets.hpp"
#include "drsm/ops.hpp"

namespace drsm {

inline constexpr double kProbabilityClamp = 1e-7;

// KL[N(mean, exp(logvar)) || N(0, I)] = 0.5 * sum(mean^2 + exp(logvar) - 1 - logvar).
template <typename Scalar>
Tensor<Scalar> kl_standard_normal(Tape<Scalar>& tape, const LatentGaussian<Scalar>& q) {
  Tensor<Scalar> t = add(tape, square(tape, q.mean), exp(tape, q.logvar));
  t = sub(tape, add_scalar(tape, t, Scalar(-1)), q.logvar);
  return scale(tape, sum(tape, t), Scalar(0.5));
}

// Negative ELBO without constants:
// sum (Y - Yhat)^2 / (2 sigma^2) + KL[Q || N(0, I)].
template <typename Scalar>
Tensor<Scalar> loss_vae(Tape<Scalar>& tape, const Tensor<Scalar>& prediction, const Tensor<Scalar>& target,
                        const LatentGaussian<Scalar>& q, Scalar obs_var) {
  if (!(obs_var > Scalar(0))) throw std::invalid_argument("loss_vae: observation variance must be > 0");
  Tensor<Scalar> recon = sum(tape, square(tape, sub(tape, target, prediction)));
  return add(tape, scale(tape, recon, Scalar(0.5) / obs_var), kl_standard_normal(tape, q));
}

template <typename Scalar>
Tensor<Scalar> neg_log_clamped(Tape<Scalar>& tape, const Tensor<Scalar>& p) {
  const Scalar lo = static_cast<Scalar>(kProbabilityClamp);
  return scale(tape, log(tape, clamp(tape, p, lo, Scalar(1) - lo)), Scalar(-1));
}

// Generator side of the binary cross entropy: -log D(fake), batch mean.
template <typename Scalar>
Tensor<Scalar> loss_adv(Tape<Scalar>& tape, const Tensor<Scalar>& d_fake) {
  return mean(tape, neg_log_clamped(tape, d_fake));
}

// Discriminator: -log D(real) - log(1 - D(fake)), batch means.
template <typename Scalar>
Tensor<Scalar> loss_disc(Tape<Scalar>& tape, const Tensor<Scalar>& d_real, const Tensor<Scalar>& d_fake) {
  Tensor<Scalar> one_minus = add_scalar(tape, scale(tape, d_fake, Scalar(-1)), Scalar(1));
  return add(tape, mean(tape, neg_log_clamped(tape, d_real)), mean(tape, neg_log_clamped(tape, one_minus)));
}

// alpha * L_vae + (1 - alpha) * L_adv
template <typename Scalar>
Tensor<Scalar> loss_mixed(Tape<Scalar>& tape, const Tensor<Scalar>& l_vae, const Tensor<Scalar>& l_adv, Scalar alpha) {
  if (!(alpha >= Scalar(0) && alpha <= Scalar(1))) throw std::invalid_argument("loss_mixed: alpha must lie in [0, 1]");
  return add(tape, scale(tape, l_vae, alpha), scale(tape, l_adv, Scalar(1) - alpha));
}

}  // namespace drsm

#endif  // DRSM_LOSSES_HPP
