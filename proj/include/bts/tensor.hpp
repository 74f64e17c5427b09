// Copyright (c) 2026 The bts-rppg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors and a define-by-run gradient tape.
//
// A Tensor is a cheap handle onto shared storage. Operations record a node on
// the thread's active Tape (see TapeScope) whenever one of their inputs
// requires a gradient; with no active tape nothing is recorded and the forward
// arithmetic is unchanged. Each thread owns its own tape, so independent
// forward/backward passes can run concurrently as long as they do not share
// leaf tensors that require gradients.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bts::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until a backward pass writes into it.
  std::vector<double> grad;
  bool requires_grad = false;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  /// Rank-0 tensor holding one value.
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  /// Mutable access for leaves (parameters, inputs). Mutating a tensor that
  /// already feeds a recorded node invalidates that node's saved values.
  std::span<double> mutable_data() { return impl_->data; }
  std::vector<double> values() const { return impl_->data; }
  double item() const;
  double at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

  bool requires_grad() const { return impl_->requires_grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient after backward; zeros when nothing flowed into this tensor.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  /// Fresh leaf holding a copy of the values, detached from any tape.
  Tensor detach(bool requires_grad = false) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape, std::vector<double>);

  std::shared_ptr<TensorImpl> impl_;
};

/// Builds an operation output (not yet attached to a tape).
Tensor make_result(Shape shape, std::vector<double> values);

class Tape {
 public:
  using Backward = std::function<void()>;

  struct Node {
    std::string op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    Backward backward;
  };

  /// Appends a node. Inputs must already be tape outputs or leaves, which
  /// makes insertion order a topological order.
  void record(std::string op, std::vector<Tensor> inputs, const Tensor& output,
              Backward backward);

  /// Seeds d(root)/d(root) = 1 (root must hold one value) and runs every
  /// recorded node once in reverse order.
  void backward(const Tensor& root);
  /// Same, with an explicit upstream gradient for a non-scalar root.
  void backward(const Tensor& root, std::span<const double> seed);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

/// Thread's active tape, or nullptr.
Tape* active_tape();

/// Makes a tape active for the current thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording on the current thread (inference).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// True when `inputs` contain a grad-requiring tensor and a tape is active.
bool should_record(std::initializer_list<const Tensor*> inputs);

}  // namespace bts::ad
