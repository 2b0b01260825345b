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

#ifndef DRSM_ADADELTA_HPP
#define DRSM_ADADELTA_HPP

#include "drsm/parameters.hpp"
#include "drsm/tensor.hpp"

#include <cmath>
#include <vector>

namespace drsm {

template <typename Scalar>
struct AdadeltaState {
  Array<Scalar> mean_sq_grad;   // E[g^2]
  Array<Scalar> mean_sq_delta;  // E[dx^2]
  Scalar rho = Scalar(0.95);
  Scalar eps = Scalar(1e-6);
};

template <typename Scalar>
AdadeltaState<Scalar> adadelta_init(const Tensor<Scalar>& param, Scalar rho = Scalar(0.95),
                                    Scalar eps = Scalar(1e-6)) {
  if (!(rho > Scalar(0) && rho < Scalar(1)) || !(eps > Scalar(0))) {
    throw std::invalid_argument("adadelta: need 0 < rho < 1 and eps > 0");
  }
  return {Array<Scalar>::Zero(param.size()), Array<Scalar>::Zero(param.size()), rho, eps};
}

// One ADADELTA update (Zeiler 2012) using param.grad().
template <typename Scalar>
void adadelta_step(Tensor<Scalar>& param, AdadeltaState<Scalar>& state) {
  if (!param.requires_grad() || param.grad().size() != param.size()) {
    throw std::invalid_argument("adadelta_step: parameter " + shape_string(param.dims()) +
                                " has no gradient");
  }
  if (state.mean_sq_grad.size() != param.size() || state.mean_sq_delta.size() != param.size()) {
    throw ShapeError("adadelta_step: state does not match parameter " + shape_string(param.dims()));
  }
  const Scalar rho = state.rho;
  const Scalar eps = state.eps;
  const auto& g = param.grad();
  state.mean_sq_grad = rho * state.mean_sq_grad + (Scalar(1) - rho) * g.square();
  const Array<Scalar> delta =
      -((state.mean_sq_delta + eps).sqrt() / (state.mean_sq_grad + eps).sqrt()) * g;
  state.mean_sq_delta = rho * state.mean_sq_delta + (Scalar(1) - rho) * delta.square();
  param.value() += delta;
}

// ADADELTA over every tensor of a parameter set.
template <typename Scalar>
class Adadelta {
 public:
  explicit Adadelta(const ParameterSet<Scalar>& params, Scalar rho = Scalar(0.95),
                    Scalar eps = Scalar(1e-6)) {
    for (const auto& p : params.entries()) states_.push_back(adadelta_init(p.tensor, rho, eps));
  }

  void step(ParameterSet<Scalar>& params) {
    auto& entries = params.entries();
    if (entries.size() != states_.size()) {
      throw ShapeError("adadelta: optimizer state tracks " + std::to_string(states_.size()) +
                       " tensors, parameter set has " + std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) adadelta_step(entries[i].tensor, states_[i]);
  }

  const std::vector<AdadeltaState<Scalar>>& states() const { return states_; }

 private:
  std::vector<AdadeltaState<Scalar>> states_;
};

}  // namespace drsm

#endif  // DRSM_ADADELTA_HPP
