// Copyright 2026 The mrgan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over a dynamically recorded graph.
//
// Each op produces a Var whose node remembers its inputs and a backward rule.
// Backward rules are themselves written with Var ops, so a gradient can be
// recorded as a graph (create_graph) and differentiated again; the gradient
// penalty of the critic loss needs exactly that.

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mrgan/tensor.hpp"

namespace mrgan {

class Var;
struct Node;

using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad)>;

struct Node {
  Tensor value;
  std::vector<Var> inputs;
  BackwardFn backward;
  bool requires_grad = false;
  // Accumulator used only by leaves (parameters) under backward().
  Tensor grad;
  const char* op = "leaf";
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var leaf(Tensor value, bool requires_grad = true);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  double item() const { return node_->value.item(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Thread-local switch; with recording off, ops return constants.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds a node from a computed value. Inputs and rule are recorded only when
// recording is on and some input requires a gradient.
Var make_op(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op);

// Accumulates d(loss)/d(leaf) into Node::grad of every reachable leaf that
// requires a gradient. loss must be 1x1.
void backward(const Var& loss);

// Returns d(output . seed)/d(wrt[i]) for each entry of wrt (seed defaults to
// ones). With create_graph the returned Vars are differentiable.
std::vector<Var> grad(const Var& output, std::span<const Var> wrt,
                      bool create_graph = false);

}  // namespace mrgan
