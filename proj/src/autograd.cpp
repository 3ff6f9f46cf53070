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

#include "mrgan/autograd.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "mrgan/ops.hpp"

namespace mrgan {

namespace {

thread_local bool t_grad_enabled = true;

// Post-order over the differentiable part of the graph: inputs precede users.
std::vector<Var> topo_order(const Var& root) {
  std::vector<Var> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Var, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [var, next] = stack.back();
    Node* n = var.node();
    if (next < n->inputs.size()) {
      const Var& in = n->inputs[next++];
      if (in.requires_grad() && visited.insert(in.node()).second) {
        stack.emplace_back(in, 0);
      }
      continue;
    }
    order.push_back(var);
    stack.pop_back();
  }
  return order;
}

void accumulate(std::unordered_map<Node*, Var>& grads, Node* key, const Var& g) {
  auto it = grads.find(key);
  if (it == grads.end()) {
    grads.emplace(key, g);
  } else {
    it->second = add(it->second, g);
  }
}

// Propagates from `output` (seeded with ones) and returns the gradient of every
// node for which keep(node) holds.
template <typename Keep>
std::unordered_map<Node*, Var> propagate(const Var& output, bool create_graph, Keep keep) {
  std::unordered_map<Node*, Var> grads;
  std::unordered_map<Node*, Var> kept;
  if (!output.requires_grad()) return kept;

  std::optional<NoGradGuard> guard;
  if (!create_graph) guard.emplace();

  std::vector<Var> order = topo_order(output);
  grads.emplace(output.node(), Var::constant(Tensor(output.shape(), 1.0)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = it->node();
    auto git = grads.find(n);
    if (git == grads.end()) continue;
    Var g = std::move(git->second);
    grads.erase(git);
    if (keep(n)) kept.emplace(n, g);
    if (n->inputs.empty() || !n->backward) continue;
    std::vector<Var> in_grads = n->backward(*it, g);
    for (std::size_t i = 0; i < n->inputs.size() && i < in_grads.size(); ++i) {
      const Var& in = n->inputs[i];
      if (!in.requires_grad() || !in_grads[i].defined()) continue;
      accumulate(grads, in.node(), in_grads[i]);
    }
  }
  return kept;
}

}  // namespace

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "const";
  return Var(std::move(n));
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

Var make_op(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  if (t_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Var& v) { return v.requires_grad(); })) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  }
  auto kept = propagate(loss, false, [](Node* n) { return n->inputs.empty(); });
  for (auto& [node, g] : kept) {
    if (!node->requires_grad) continue;
    if (node->grad.shape() != node->value.shape()) {
      node->grad = Tensor(node->value.shape(), 0.0);
    }
    auto dst = node->grad.data();
    auto src = g.value().data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph) {
  std::unordered_set<Node*> wanted;
  for (const Var& w : wrt) wanted.insert(w.node());
  auto kept = propagate(output, create_graph,
                        [&](Node* n) { return wanted.count(n) > 0; });
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    auto it = kept.find(w.node());
    out.push_back(it != kept.end() ? it->second : Var::constant(Tensor(w.shape(), 0.0)));
  }
  return out;
}

}  // namespace mrgan
