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

#ifndef DRSM_TENSOR_HPP
#define DRSM_TENSOR_HPP

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace drsm {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Index shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1},
                         std::multiplies<Index>());
}

inline std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// Dense row-major tensor. Copies are handles onto the same storage (the
// autodiff graph needs identity); use clone() for an independent copy.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Array<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape dims, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    for (Index d : dims) {
      if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_string(dims));
    }
    node_->dims = std::move(dims);
    node_->value = Storage::Zero(shape_size(node_->dims));
    set_requires_grad(requires_grad);
  }

  Tensor(Shape dims, Storage values, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    for (Index d : dims) {
      if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_string(dims));
    }
    if (shape_size(dims) != values.size()) {
      throw ShapeError("tensor " + shape_string(dims) + " needs " +
                       std::to_string(shape_size(dims)) + " values, got " +
                       std::to_string(values.size()));
    }
    node_->dims = std::move(dims);
    node_->value = std::move(values);
    set_requires_grad(requires_grad);
  }

  Tensor(Shape dims, std::initializer_list<Scalar> values, bool requires_grad = false)
      : Tensor(std::move(dims), to_storage(values), requires_grad) {}

  static Tensor filled(Shape dims, Scalar v, bool requires_grad = false) {
    Tensor t(std::move(dims), requires_grad);
    t.value().setConstant(v);
    return t;
  }

  static Tensor scalar(Scalar v, bool requires_grad = false) {
    return filled(Shape{}, v, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& dims() const { return node_->dims; }
  Index rank() const { return static_cast<Index>(node_->dims.size()); }
  Index dim(Index axis) const {
    if (axis < 0) axis += rank();
    return node_->dims.at(static_cast<std::size_t>(axis));
  }
  Index size() const { return node_->value.size(); }

  Storage& value() { return node_->value; }
  const Storage& value() const { return node_->value; }
  Scalar* data() { return node_->value.data(); }
  const Scalar* data() const { return node_->value.data(); }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on tensor " + shape_string(dims()));
    return node_->value(0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) {
    node_->requires_grad = on;
    if (on && node_->grad.size() != node_->value.size()) {
      node_->grad = Storage::Zero(node_->value.size());
    } else if (!on) {
      node_->grad.resize(0);
    }
  }

  // Gradients live in the shared node, so any handle may accumulate into them.
  Storage& grad() const { return node_->grad; }
  void zero_grad() const {
    if (node_->requires_grad) node_->grad.setZero();
  }

  // Same storage, new shape. Only for tensors outside any recorded graph.
  void reshape_inplace(Shape dims) {
    if (shape_size(dims) != size()) {
      throw ShapeError("cannot reshape " + shape_string(node_->dims) + " to " + shape_string(dims));
    }
    node_->dims = std::move(dims);
  }

  Tensor clone() const { return Tensor(dims(), value(), false); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(dims(), value().template cast<Other>(), false);
  }

  bool is_same(const Tensor& other) const { return node_ == other.node_; }
  const void* id() const { return node_.get(); }

 private:
  struct Node {
    Shape dims;
    Storage value;
    Storage grad;
    bool requires_grad = false;
  };

  static Storage to_storage(std::initializer_list<Scalar> values) {
    Storage s(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) s(i++) = v;
    return s;
  }

  std::shared_ptr<Node> node_;
};

// Ordered record of differentiable operations. Each record's backward rule
// reads output.grad() and accumulates into the grads of its inputs.
template <typename Scalar>
class Tape {
 public:
  using BackwardRule = std::function<void()>;

  struct Record {
    const char* op;
    std::vector<Tensor<Scalar>> inputs;
    Tensor<Scalar> output;
    BackwardRule backward;
  };

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  bool needs_grad(std::initializer_list<const Tensor<Scalar>*> inputs) const {
    if (!recording_) return false;
    for (const auto* t : inputs) {
      if (t->defined() && t->requires_grad()) return true;
    }
    return false;
  }

  void record(const char* op, std::vector<Tensor<Scalar>> inputs,
              Tensor<Scalar> output, BackwardRule rule) {
    records_.push_back(Record{op, std::move(inputs), std::move(output), std::move(rule)});
  }

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Name and position of the first recorded op whose output holds NaN/Inf.
  std::string first_non_finite() const {
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (!records_[i].output.value().allFinite()) {
        return std::string(records_[i].op) + " (op #" + std::to_string(i) + ", shape " +
               shape_string(records_[i].output.dims()) + ")";
      }
    }
    return {};
  }

 private:
  bool recording_;
  std::vector<Record> records_;
};

enum class GradMode {
  kReset,       // zero leaf grads, then accumulate this call's gradient
  kAccumulate,  // add this call's gradient onto whatever the leaves hold
};

// Reverse sweep over the tape. After the call every requires_grad leaf that
// the loss depends on holds d(loss)/d(leaf).
template <typename Scalar>
void backward(const Tensor<Scalar>& loss, Tape<Scalar>& tape,
              GradMode mode = GradMode::kReset) {
  if (loss.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_string(loss.dims()));
  }
  if (!loss.requires_grad()) {
    throw ShapeError("loss is not reachable from any differentiable leaf on the tape");
  }
  const auto& records = tape.records();

  std::unordered_set<const void*> produced;
  for (const auto& r : records) {
    produced.insert(r.output.id());
  }
  if (!produced.count(loss.id())) {
    throw ShapeError("loss was not recorded on this tape");
  }

  std::vector<char> live(records.size(), 0);
  std::unordered_set<const void*> needed{loss.id()};
  for (std::size_t i = records.size(); i-- > 0;) {
    if (!needed.count(records[i].output.id())) continue;
    live[i] = 1;
    for (const auto& in : records[i].inputs) {
      if (in.requires_grad()) needed.insert(in.id());
    }
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!live[i]) continue;
    auto out = records[i].output;
    out.zero_grad();
    if (mode == GradMode::kReset) {
      for (auto in : records[i].inputs) {
        if (in.requires_grad() && !produced.count(in.id())) in.zero_grad();
      }
    }
  }

  Tensor<Scalar> seed = loss;
  seed.grad().setOnes();
  for (std::size_t i = records.size(); i-- > 0;) {
    if (live[i]) records[i].backward();
  }
}

}  // namespace drsm

#endif  // DRSM_TENSOR_HPP
