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

#include <cstddef>
#include <span>
#include <vector>

#include "mrgan/autograd.hpp"

namespace mrgan {

inline constexpr double kLeakySlope = 0.2;

enum class ActivationKind { kIdentity, kLeakyRelu, kTanh };

struct Activation {
  ActivationKind kind = ActivationKind::kIdentity;
  double slope = kLeakySlope;

  static Activation identity() { return {ActivationKind::kIdentity, 0.0}; }
  static Activation leaky(double slope = kLeakySlope) {
    return {ActivationKind::kLeakyRelu, slope};
  }
  static Activation tanh() { return {ActivationKind::kTanh, 0.0}; }
};

enum class PoolMode { kMax, kMin };

// op(a) * op(b), where op transposes when the flag is set.
Var matmul(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// a / b with 0 wherever b == 0.
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);
Var square(const Var& a);
// sqrt with a zero gradient at 0.
Var sqrt(const Var& a);
Var clamp_min(const Var& a, double lo);

Var leaky_relu(const Var& a, double slope = kLeakySlope);
Var tanh(const Var& a);
Var activation(const Var& a, Activation act);

Var sum_all(const Var& a);
Var mean_all(const Var& a);
// Sum over rows: PxF -> 1xF.
Var sum_rows(const Var& a);
// Sum over columns: PxF -> Px1.
Var sum_cols(const Var& a);
// 1xF -> nxF.
Var broadcast_rows(const Var& a, std::size_t n);
// Px1 -> Pxn.
Var broadcast_cols(const Var& a, std::size_t n);
// 1x1 -> shape.
Var broadcast_scalar(const Var& a, const Shape& shape);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);

// out[s, f] = a[index[s * F + f], f].
Var gather_elements(const Var& a, std::vector<std::size_t> index, std::size_t out_rows);
// Adjoint of gather_elements: zeros(rows x F) with out[index[s,f], f] += a[s, f].
Var scatter_elements(const Var& a, std::vector<std::size_t> index, std::size_t rows);

// out[i] = a[index[i]].
Var index_rows(const Var& a, std::vector<std::size_t> index);
// Adjoint of index_rows: zeros(rows x F) with out[index[i]] += a[i].
Var scatter_rows(const Var& a, std::vector<std::size_t> index, std::size_t rows);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);

Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
// Embeds a into zeros(rows x total) at column offset.
Var pad_cols(const Var& a, std::size_t offset, std::size_t total);

// Per-feature extremum over consecutive blocks of `segment` rows:
// (S*segment)xF -> SxF. Ties route the gradient to the first index.
Var pool(const Var& a, PoolMode mode, std::size_t segment);
inline Var pool(const Var& a, PoolMode mode) { return pool(a, mode, a.rows()); }

// x * W + b with b broadcast over rows.
Var affine(const Var& x, const Var& w, const Var& b);

}  // namespace mrgan
