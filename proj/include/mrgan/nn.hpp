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

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mrgan/autograd.hpp"
#include "mrgan/rng.hpp"

namespace mrgan {

// Named learnable tensor. Copies are handles onto the same storage.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  const Var& var() const { return var_; }
  Tensor& value() { return var_.node()->value; }
  const Tensor& value() const { return var_.node()->value; }
  // Accumulated gradient; zeros of the value's shape when nothing flowed yet.
  Tensor& grad();
  void zero_grad();
  bool requires_grad() const { return var_.node()->requires_grad; }
  void set_requires_grad(bool on) { var_.node()->requires_grad = on; }

 private:
  std::string name_;
  Var var_;
};

// Insertion-ordered parameter collection.
class ParamStore {
 public:
  Parameter add(const std::string& name, Tensor value);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::span<Parameter> params() { return params_; }
  std::span<const Parameter> params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  void set_requires_grad(bool on);
  std::size_t numel() const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  // Keyed by parameter name.
  std::map<std::string, AdamMoments> moments;
};

// Bias-corrected Adam update using each parameter's accumulated gradient.
// Gradients are left in place; the caller zeroes them.
void adam_step(std::span<Parameter> params, AdamState& state);

// Worst componentwise relative error between the reverse-mode gradient of f at
// x and central differences with step eps. Components are compared relative to
// max(|analytic|, |numeric|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps = 1e-5);

// Same check for a scalar function of parameters, perturbing each in place.
double grad_check_params(const std::function<Var()>& f, std::span<Parameter> params,
                         double eps = 1e-5);

}  // namespace mrgan
