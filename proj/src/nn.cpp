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

#include "mrgan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mrgan {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (is.fail()) throw std::runtime_error("corrupt rng state");
}

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), var_(Var::leaf(std::move(value), true)) {}

Tensor& Parameter::grad() {
  Node* n = var_.node();
  if (n->grad.shape() != n->value.shape()) n->grad = Tensor(n->value.shape(), 0.0);
  return n->grad;
}

void Parameter::zero_grad() { grad().fill(0.0); }

Parameter ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  params_.emplace_back(name, std::move(value));
  return params_.back();
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return params_[it->second];
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void ParamStore::set_requires_grad(bool on) {
  for (auto& p : params_) p.set_requires_grad(on);
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value().size();
  return n;
}

void adam_step(std::span<Parameter> params, AdamState& state) {
  const AdamConfig& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (Parameter& p : params) {
    auto& mom = state.moments[p.name()];
    if (mom.m.shape() != p.value().shape()) {
      mom.m = Tensor(p.value().shape(), 0.0);
      mom.v = Tensor(p.value().shape(), 0.0);
    }
    auto w = p.value().data();
    auto g = p.grad().data();
    auto m = mom.m.data();
    auto v = mom.v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

namespace {

double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

double eval_scalar(const Var& out) {
  if (out.value().size() != 1) {
    throw DimensionError("grad_check: function must return a scalar, got " +
                         shape_str(out.shape()));
  }
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

}  // namespace

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps) {
  Var leaf = Var::leaf(x, true);
  Var out = f(leaf);
  eval_scalar(out);
  std::vector<Var> wrt{leaf};
  Tensor analytic = grad(out, wrt)[0].value();

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    // Recording stays on: f may itself differentiate (create_graph).
    probe[i] = orig + eps;
    const double fp = eval_scalar(f(Var::constant(probe)));
    probe[i] = orig - eps;
    const double fm = eval_scalar(f(Var::constant(probe)));
    probe[i] = orig;
    worst = std::max(worst, rel_error(analytic[i], (fp - fm) / (2.0 * eps)));
  }
  return worst;
}

double grad_check_params(const std::function<Var()>& f, std::span<Parameter> params,
                         double eps) {
  for (auto& p : params) p.zero_grad();
  Var out = f();
  eval_scalar(out);
  backward(out);

  double worst = 0.0;
  for (auto& p : params) {
    Tensor analytic = p.grad();
    auto w = p.value().data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double fp = eval_scalar(f());
      w[i] = orig - eps;
      const double fm = eval_scalar(f());
      w[i] = orig;
      worst = std::max(worst, rel_error(analytic[i], (fp - fm) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace mrgan
