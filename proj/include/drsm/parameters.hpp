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

#ifndef DRSM_PARAMETERS_HPP
#define DRSM_PARAMETERS_HPP

#include "drsm/rng.hpp"
#include "drsm/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace drsm {

// Ordered, named collection of trainable tensors.
template <typename Scalar>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> tensor;
  };

  Tensor<Scalar> add(const std::string& name, Shape dims) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Tensor<Scalar> t(std::move(dims), true);
    entries_.push_back({name, t});
    return t;
  }

  // He initialization: N(0, 2 / fan_in).
  Tensor<Scalar> add_he(const std::string& name, Shape dims, Index fan_in, Rng& rng) {
    Tensor<Scalar> t = add(name, std::move(dims));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < t.size(); ++i) t.value()(i) = static_cast<Scalar>(rng.normal(0.0, stddev));
    return t;
  }

  const Tensor<Scalar>* find(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e.tensor;
    }
    return nullptr;
  }

  const Tensor<Scalar>& at(const std::string& name) const {
    const auto* t = find(name);
    if (!t) throw std::out_of_range("no parameter named " + name);
    return *t;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  Index count() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  template <typename Other>
  ParameterSet<Other> cast() const {
    ParameterSet<Other> out;
    for (const auto& e : entries_) {
      Tensor<Other> t = out.add(e.name, e.tensor.dims());
      t.value() = e.tensor.value().template cast<Other>();
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace drsm

#endif  // DRSM_PARAMETERS_HPP
