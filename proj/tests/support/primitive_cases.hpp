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

// Small inputs for every primitive op, shared by the unit and acceptance
// gradient checks.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrgan/nn.hpp"
#include "mrgan/ops.hpp"

namespace mrgan::testing {

inline Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t({r, c});
  for (double& v : t.storage()) v = uniform(rng, lo, hi);
  return t;
}

// Weighted sum with fixed random weights so that no gradient entry is trivially
// symmetric.
inline Var weighted_sum(const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(y.shape());
  for (double& v : w.storage()) v = uniform(rng, 0.5, 1.5);
  return sum_all(mul(y, Var::constant(std::move(w))));
}

struct PrimitiveCase {
  std::string name;
  Tensor x;
  std::function<Var(const Var&)> op;
};

inline std::vector<PrimitiveCase> primitive_cases(Rng& rng) {
  const Tensor a = random_tensor(rng, 4, 3);
  const Tensor b = random_tensor(rng, 4, 3);
  const Tensor pos = random_tensor(rng, 4, 3, 0.5, 1.5);
  const Tensor w = random_tensor(rng, 3, 5);
  const Tensor row = random_tensor(rng, 1, 3);
  const Tensor col = random_tensor(rng, 4, 1);
  const Tensor s = random_tensor(rng, 1, 1);
  const Tensor wide = random_tensor(rng, 6, 4);
  const Tensor bias = random_tensor(rng, 1, 5);
  const Tensor five_by_three = random_tensor(rng, 5, 3);
  const Tensor two_by_three = random_tensor(rng, 2, 3);
  const std::vector<std::size_t> idx{3, 0, 0, 2, 1};

  return {
      {"matmul_lhs", a, [=](const Var& x) { return matmul(x, Var::constant(w)); }},
      {"matmul_rhs", w, [=](const Var& x) { return matmul(Var::constant(a), x); }},
      {"matmul_ta", b, [=](const Var& x) { return matmul(x, Var::constant(a), true, false); }},
      {"matmul_tb", a, [=](const Var& x) { return matmul(Var::constant(b), x, false, true); }},
      {"matmul_tt", w, [=](const Var& x) { return matmul(x, Var::constant(a), true, true); }},
      {"add", a, [=](const Var& x) { return add(x, Var::constant(b)); }},
      {"sub", a, [=](const Var& x) { return sub(Var::constant(b), x); }},
      {"mul", a, [=](const Var& x) { return mul(x, Var::constant(b)); }},
      {"mul_self", a, [=](const Var& x) { return mul(x, x); }},
      {"div_num", a, [=](const Var& x) { return div(x, Var::constant(pos)); }},
      {"div_den", pos, [=](const Var& x) { return div(Var::constant(a), x); }},
      {"scale", a, [=](const Var& x) { return scale(x, -2.5); }},
      {"add_scalar", a, [=](const Var& x) { return add_scalar(x, 3.0); }},
      {"square", a, [=](const Var& x) { return square(x); }},
      {"sqrt", pos, [=](const Var& x) { return sqrt(x); }},
      {"clamp_min", a, [=](const Var& x) { return clamp_min(x, 0.05); }},
      {"leaky_relu", a, [=](const Var& x) { return leaky_relu(x); }},
      {"tanh", a, [=](const Var& x) { return tanh(x); }},
      {"sum_all", a, [=](const Var& x) { return sum_all(x); }},
      {"mean_all", a, [=](const Var& x) { return mean_all(x); }},
      {"sum_rows", a, [=](const Var& x) { return sum_rows(x); }},
      {"sum_cols", a, [=](const Var& x) { return sum_cols(x); }},
      {"broadcast_rows", row, [=](const Var& x) { return broadcast_rows(x, 4); }},
      {"broadcast_cols", col, [=](const Var& x) { return broadcast_cols(x, 3); }},
      {"broadcast_scalar", s, [=](const Var& x) { return broadcast_scalar(x, {2, 3}); }},
      {"reshape", a, [=](const Var& x) { return reshape(x, 2, 6); }},
      {"index_rows", a, [=](const Var& x) { return index_rows(x, idx); }},
      {"scatter_rows", five_by_three,
       [=](const Var& x) { return scatter_rows(x, idx, 4); }},
      {"slice_rows", a, [=](const Var& x) { return slice_rows(x, 1, 3); }},
      {"concat_rows", a,
       [=](const Var& x) {
         std::vector<Var> parts{x, Var::constant(b), x};
         return concat_rows(parts);
       }},
      {"concat_cols", a, [=](const Var& x) { return concat_cols(Var::constant(b), x); }},
      {"slice_cols", a, [=](const Var& x) { return slice_cols(x, 1, 3); }},
      {"pad_cols", a, [=](const Var& x) { return pad_cols(x, 2, 7); }},
      {"gather_elements", a,
       [=](const Var& x) {
         return gather_elements(x, {0, 3, 1, 2, 2, 0}, 2);
       }},
      {"scatter_elements", two_by_three,
       [=](const Var& x) {
         return scatter_elements(x, {0, 3, 1, 0, 3, 1}, 4);
       }},
      {"pool_max", wide, [=](const Var& x) { return pool(x, PoolMode::kMax); }},
      {"pool_min", wide, [=](const Var& x) { return pool(x, PoolMode::kMin); }},
      {"pool_max_seg", wide, [=](const Var& x) { return pool(x, PoolMode::kMax, 3); }},
      {"affine", a,
       [=](const Var& x) { return affine(x, Var::constant(w), Var::constant(bias)); }},
  };
}

// Worst relative error per case; the scalar is a weighted sum of the op output.
inline std::vector<std::pair<std::string, double>> check_primitives(std::uint64_t seed = 2024) {
  Rng rng(seed);
  std::vector<std::pair<std::string, double>> out;
  std::uint64_t wseed = 1;
  for (const auto& c : primitive_cases(rng)) {
    const std::uint64_t ws = wseed++;
    auto f = [&](const Var& x) { return weighted_sum(c.op(x), ws); };
    out.emplace_back(c.name, grad_check(f, c.x));
  }
  return out;
}

}  // namespace mrgan::testing
