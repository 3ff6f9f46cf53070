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

#include "mrgan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace mrgan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data().data(), t.rows(), t.cols()); }

void require_rank2(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " +
                         shape_str(a.shape()));
  }
}

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

// Row-stable product C = A B for row-major A (m x k) and B (k x n). Every
// output entry is accumulated over k in ascending order by the same kernel,
// so a row's result does not depend on its position or on m. Pooled networks
// rely on this for exact invariance under point permutations.
using V4 = double __attribute__((vector_size(32)));
constexpr std::size_t kPanel = 8;

template <int MR>
void gemm_micro(const double* a, std::size_t lda, const double* bp, std::size_t k, double* c,
                std::size_t ldc, std::size_t ncols) {
  V4 acc[MR][2];
  for (int r = 0; r < MR; ++r) acc[r][0] = acc[r][1] = V4{0.0, 0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < k; ++p) {
    V4 b0, b1;
    std::memcpy(&b0, bp + p * kPanel, sizeof b0);
    std::memcpy(&b1, bp + p * kPanel + 4, sizeof b1);
    for (int r = 0; r < MR; ++r) {
      const double av = a[r * lda + p];
      const V4 va{av, av, av, av};
      acc[r][0] += va * b0;
      acc[r][1] += va * b1;
    }
  }
  for (int r = 0; r < MR; ++r) {
    double tmp[kPanel];
    std::memcpy(tmp, &acc[r][0], sizeof acc[r][0]);
    std::memcpy(tmp + 4, &acc[r][1], sizeof acc[r][1]);
    for (std::size_t q = 0; q < ncols; ++q) c[r * ldc + q] = tmp[q];
  }
}

void gemm_rows(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
               double* c) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    std::fill(c, c + m * n, 0.0);
    return;
  }
  const std::size_t panels = (n + kPanel - 1) / kPanel;
  std::vector<double> packed(panels * k * kPanel, 0.0);
  for (std::size_t j = 0; j < panels; ++j) {
    const std::size_t nc = std::min(kPanel, n - j * kPanel);
    for (std::size_t p = 0; p < k; ++p) {
      std::copy_n(b + p * n + j * kPanel, nc, packed.data() + (j * k + p) * kPanel);
    }
  }
  constexpr std::size_t kRowChunk = 64;
  for (std::size_t i0 = 0; i0 < m; i0 += kRowChunk) {
    const std::size_t i1 = std::min(m, i0 + kRowChunk);
    for (std::size_t j = 0; j < panels; ++j) {
      const std::size_t nc = std::min(kPanel, n - j * kPanel);
      const double* bp = packed.data() + j * k * kPanel;
      double* cj = c + j * kPanel;
      std::size_t i = i0;
      for (; i + 4 <= i1; i += 4) gemm_micro<4>(a + i * k, k, bp, k, cj + i * n, n, nc);
      switch (i1 - i) {
        case 3: gemm_micro<3>(a + i * k, k, bp, k, cj + i * n, n, nc); break;
        case 2: gemm_micro<2>(a + i * k, k, bp, k, cj + i * n, n, nc); break;
        case 1: gemm_micro<1>(a + i * k, k, bp, k, cj + i * n, n, nc); break;
        default: break;
      }
    }
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t k = ta ? a.rows() : a.cols();
  const std::size_t kb = tb ? b.cols() : b.rows();
  const std::size_t n = tb ? b.rows() : b.cols();
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_str(a.shape()) +
                         (ta ? "^T" : "") + " and " + shape_str(b.shape()) +
                         (tb ? "^T" : ""));
  }
  Tensor out({m, n});
  MutMap c(out.data().data(), m, n);
  ConstMap am = as_matrix(a.value());
  ConstMap bm = as_matrix(b.value());
  if (!ta) {
    // Row-indexed outputs (points) take the row-stable kernel.
    if (!tb) {
      gemm_rows(m, n, k, a.value().data().data(), b.value().data().data(), out.data().data());
    } else {
      RowMat bt = bm.transpose();
      gemm_rows(m, n, k, a.value().data().data(), bt.data(), out.data().data());
    }
  } else if (!tb) {
    c.noalias() = am.transpose() * bm;
  } else {
    c.noalias() = am.transpose() * bm.transpose();
  }
  return make_op(
      std::move(out), {a, b},
      [ta, tb](const Var& self, const Var& g) -> std::vector<Var> {
        const Var& x = self.node()->inputs[0];
        const Var& y = self.node()->inputs[1];
        Var dx, dy;
        if (x.requires_grad()) dx = ta ? matmul(y, g, tb, true) : matmul(g, y, false, !tb);
        if (y.requires_grad()) dy = tb ? matmul(g, x, true, ta) : matmul(x, g, !ta, false);
        return {dx, dy};
      },
      "matmul");
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  return make_op(
      map_binary(a.value(), b.value(), [](double x, double y) { return x + y; }), {a, b},
      [](const Var&, const Var& g) -> std::vector<Var> { return {g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  return make_op(
      map_binary(a.value(), b.value(), [](double x, double y) { return x - y; }), {a, b},
      [](const Var&, const Var& g) -> std::vector<Var> { return {g, neg(g)}; }, "sub");
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  return make_op(
      map_binary(a.value(), b.value(), [](double x, double y) { return x * y; }), {a, b},
      [](const Var& self, const Var& g) -> std::vector<Var> {
        const Var& x = self.node()->inputs[0];
        const Var& y = self.node()->inputs[1];
        return {x.requires_grad() ? mul(g, y) : Var(), y.requires_grad() ? mul(g, x) : Var()};
      },
      "mul");
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  return make_op(
      map_binary(a.value(), b.value(),
                 [](double x, double y) { return y == 0.0 ? 0.0 : x / y; }),
      {a, b},
      [](const Var& self, const Var& g) -> std::vector<Var> {
        const Var& x = self.node()->inputs[0];
        const Var& y = self.node()->inputs[1];
        Var dx = div(g, y);
        Var dy;
        if (y.requires_grad()) dy = neg(div(mul(dx, x), y));
        return {dx, dy};
      },
      "div");
}

Var scale(const Var& a, double c) {
  return make_op(
      map_unary(a.value(), [c](double x) { return c * x; }), {a},
      [c](const Var&, const Var& g) -> std::vector<Var> { return {scale(g, c)}; },
      "scale");
}

Var add_scalar(const Var& a, double c) {
  return make_op(
      map_unary(a.value(), [c](double x) { return x + c; }), {a},
      [](const Var&, const Var& g) -> std::vector<Var> { return {g}; }, "add_scalar");
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var square(const Var& a) { return mul(a, a); }

Var sqrt(const Var& a) {
  return make_op(
      map_unary(a.value(), [](double x) { return std::sqrt(x); }), {a},
      [](const Var& self, const Var& g) -> std::vector<Var> {
        return {div(g, scale(self, 2.0))};
      },
      "sqrt");
}

Var clamp_min(const Var& a, double lo) {
  return make_op(
      map_unary(a.value(), [lo](double x) { return x > lo ? x : lo; }), {a},
      [lo](const Var& self, const Var& g) -> std::vector<Var> {
        Tensor mask = map_unary(self.node()->inputs[0].value(),
                                [lo](double x) { return x > lo ? 1.0 : 0.0; });
        return {mul(g, Var::constant(std::move(mask)))};
      },
      "clamp_min");
}

Var leaky_relu(const Var& a, double slope) {
  return make_op(
      map_unary(a.value(), [slope](double x) { return x > 0.0 ? x : slope * x; }), {a},
      [slope](const Var& self, const Var& g) -> std::vector<Var> {
        Tensor mask = map_unary(self.node()->inputs[0].value(),
                                [slope](double x) { return x > 0.0 ? 1.0 : slope; });
        return {mul(g, Var::constant(std::move(mask)))};
      },
      "leaky_relu");
}

Var tanh(const Var& a) {
  return make_op(
      map_unary(a.value(), [](double x) { return std::tanh(x); }), {a},
      [](const Var& self, const Var& g) -> std::vector<Var> {
        return {mul(g, add_scalar(neg(square(self)), 1.0))};
      },
      "tanh");
}

Var activation(const Var& a, Activation act) {
  switch (act.kind) {
    case ActivationKind::kIdentity:
      return a;
    case ActivationKind::kLeakyRelu:
      if (!(act.slope > 0.0 && act.slope < 1.0)) {
        throw std::invalid_argument("leaky_relu slope must lie in (0, 1)");
      }
      return leaky_relu(a, act.slope);
    case ActivationKind::kTanh:
      return tanh(a);
  }
  throw std::invalid_argument("unknown activation kind");
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  Shape shape = a.shape();
  return make_op(
      Tensor::scalar(s), {a},
      [shape](const Var&, const Var& g) -> std::vector<Var> {
        return {broadcast_scalar(g, shape)};
      },
      "sum_all");
}

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sum_rows(const Var& a) {
  require_rank2(a, "sum_rows");
  const std::size_t p = a.rows(), f = a.cols();
  Tensor out({1, f}, 0.0);
  for (std::size_t r = 0; r < p; ++r) {
    auto row = a.value().row(r);
    for (std::size_t c = 0; c < f; ++c) out[c] += row[c];
  }
  return make_op(
      std::move(out), {a},
      [p](const Var&, const Var& g) -> std::vector<Var> { return {broadcast_rows(g, p)}; },
      "sum_rows");
}

Var sum_cols(const Var& a) {
  require_rank2(a, "sum_cols");
  const std::size_t p = a.rows(), f = a.cols();
  Tensor out({p, 1}, 0.0);
  for (std::size_t r = 0; r < p; ++r) {
    double s = 0.0;
    for (double v : a.value().row(r)) s += v;
    out[r] = s;
  }
  return make_op(
      std::move(out), {a},
      [f](const Var&, const Var& g) -> std::vector<Var> { return {broadcast_cols(g, f)}; },
      "sum_cols");
}

Var broadcast_rows(const Var& a, std::size_t n) {
  if (a.value().rank() != 2 || a.rows() != 1) {
    throw DimensionError("broadcast_rows: expected 1xF, got " + shape_str(a.shape()));
  }
  const std::size_t f = a.cols();
  Tensor out({n, f});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(a.value().data().begin(), a.value().data().end(), out.row(r).begin());
  }
  return make_op(
      std::move(out), {a},
      [](const Var&, const Var& g) -> std::vector<Var> { return {sum_rows(g)}; },
      "broadcast_rows");
}

Var broadcast_cols(const Var& a, std::size_t n) {
  if (a.value().rank() != 2 || a.cols() != 1) {
    throw DimensionError("broadcast_cols: expected Px1, got " + shape_str(a.shape()));
  }
  const std::size_t p = a.rows();
  Tensor out({p, n});
  for (std::size_t r = 0; r < p; ++r) {
    auto row = out.row(r);
    std::fill(row.begin(), row.end(), a.value()[r]);
  }
  return make_op(
      std::move(out), {a},
      [](const Var&, const Var& g) -> std::vector<Var> { return {sum_cols(g)}; },
      "broadcast_cols");
}

Var broadcast_scalar(const Var& a, const Shape& shape) {
  if (a.value().size() != 1) {
    throw DimensionError("broadcast_scalar: expected 1x1, got " + shape_str(a.shape()));
  }
  return make_op(
      Tensor(shape, a.value()[0]), {a},
      [](const Var&, const Var& g) -> std::vector<Var> { return {sum_all(g)}; },
      "broadcast_scalar");
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str({rows, cols}));
  }
  Shape orig = a.shape();
  return make_op(
      Tensor({rows, cols}, a.value().storage()), {a},
      [orig](const Var&, const Var& g) -> std::vector<Var> {
        return {reshape(g, orig[0], orig.size() > 1 ? orig[1] : 1)};
      },
      "reshape");
}

Var gather_elements(const Var& a, std::vector<std::size_t> index, std::size_t out_rows) {
  require_rank2(a, "gather_elements");
  const std::size_t f = a.cols();
  if (index.size() != out_rows * f) {
    throw DimensionError("gather_elements: index size does not match output shape");
  }
  Tensor out({out_rows, f});
  for (std::size_t s = 0; s < out_rows; ++s) {
    for (std::size_t c = 0; c < f; ++c) out(s, c) = a.value()(index[s * f + c], c);
  }
  const std::size_t rows = a.rows();
  return make_op(
      std::move(out), {a},
      [index = std::move(index), rows](const Var&, const Var& g) -> std::vector<Var> {
        return {scatter_elements(g, index, rows)};
      },
      "gather_elements");
}

Var scatter_elements(const Var& a, std::vector<std::size_t> index, std::size_t rows) {
  require_rank2(a, "scatter_elements");
  const std::size_t s_rows = a.rows(), f = a.cols();
  if (index.size() != s_rows * f) {
    throw DimensionError("scatter_elements: index size does not match input shape");
  }
  Tensor out({rows, f}, 0.0);
  for (std::size_t s = 0; s < s_rows; ++s) {
    for (std::size_t c = 0; c < f; ++c) out(index[s * f + c], c) += a.value()(s, c);
  }
  return make_op(
      std::move(out), {a},
      [index = std::move(index), s_rows](const Var&, const Var& g) -> std::vector<Var> {
        return {gather_elements(g, index, s_rows)};
      },
      "scatter_elements");
}

Var index_rows(const Var& a, std::vector<std::size_t> index) {
  require_rank2(a, "index_rows");
  const std::size_t f = a.cols(), rows = a.rows();
  Tensor out({index.size(), f});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) {
      throw DimensionError("index_rows: row " + std::to_string(index[i]) +
                           " out of range for " + shape_str(a.shape()));
    }
    auto src = a.value().row(index[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return make_op(
      std::move(out), {a},
      [index = std::move(index), rows](const Var&, const Var& g) -> std::vector<Var> {
        return {scatter_rows(g, index, rows)};
      },
      "index_rows");
}

Var scatter_rows(const Var& a, std::vector<std::size_t> index, std::size_t rows) {
  require_rank2(a, "scatter_rows");
  if (index.size() != a.rows()) {
    throw DimensionError("scatter_rows: index size does not match input rows");
  }
  const std::size_t f = a.cols();
  Tensor out({rows, f}, 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto src = a.value().row(i);
    auto dst = out.row(index[i]);
    for (std::size_t c = 0; c < f; ++c) dst[c] += src[c];
  }
  return make_op(
      std::move(out), {a},
      [index = std::move(index)](const Var&, const Var& g) -> std::vector<Var> {
        return {index_rows(g, index)};
      },
      "scatter_rows");
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of " + shape_str(a.shape()));
  }
  std::vector<std::size_t> index(end - begin);
  std::iota(index.begin(), index.end(), begin);
  return index_rows(a, std::move(index));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t f = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != f) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    total += p.rows();
  }
  Tensor out({total, f});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    std::copy(p.value().data().begin(), p.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(off * f));
    off += p.rows();
  }
  offsets.push_back(total);
  return make_op(
      std::move(out), std::vector<Var>(parts.begin(), parts.end()),
      [offsets](const Var&, const Var& g) -> std::vector<Var> {
        std::vector<Var> out;
        for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
          out.push_back(slice_rows(g, offsets[i], offsets[i + 1]));
        }
        return out;
      },
      "concat_rows");
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const std::size_t p = a.rows(), fa = a.cols(), fb = b.cols();
  Tensor out({p, fa + fb});
  for (std::size_t r = 0; r < p; ++r) {
    auto dst = out.row(r);
    auto ra = a.value().row(r);
    auto rb = b.value().row(r);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(fa));
  }
  return make_op(
      std::move(out), {a, b},
      [fa, fb](const Var&, const Var& g) -> std::vector<Var> {
        return {slice_cols(g, 0, fa), slice_cols(g, fa, fa + fb)};
      },
      "concat_cols");
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  if (begin > end || end > a.cols()) {
    throw DimensionError("slice_cols: range out of " + shape_str(a.shape()));
  }
  const std::size_t p = a.rows(), w = end - begin, total = a.cols();
  Tensor out({p, w});
  for (std::size_t r = 0; r < p; ++r) {
    auto src = a.value().row(r);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(begin),
              src.begin() + static_cast<std::ptrdiff_t>(end), out.row(r).begin());
  }
  return make_op(
      std::move(out), {a},
      [begin, total](const Var&, const Var& g) -> std::vector<Var> {
        return {pad_cols(g, begin, total)};
      },
      "slice_cols");
}

Var pad_cols(const Var& a, std::size_t offset, std::size_t total) {
  require_rank2(a, "pad_cols");
  const std::size_t p = a.rows(), w = a.cols();
  if (offset + w > total) throw DimensionError("pad_cols: target too narrow");
  Tensor out({p, total}, 0.0);
  for (std::size_t r = 0; r < p; ++r) {
    auto src = a.value().row(r);
    std::copy(src.begin(), src.end(),
              out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return make_op(
      std::move(out), {a},
      [offset, w](const Var&, const Var& g) -> std::vector<Var> {
        return {slice_cols(g, offset, offset + w)};
      },
      "pad_cols");
}

Var pool(const Var& a, PoolMode mode, std::size_t segment) {
  require_rank2(a, "pool");
  const std::size_t p = a.rows(), f = a.cols();
  if (p == 0 || segment == 0) throw DimensionError("pool: empty point axis");
  if (p % segment != 0) {
    throw DimensionError("pool: " + std::to_string(p) + " points are not divisible into segments of " +
                         std::to_string(segment));
  }
  const std::size_t segments = p / segment;
  std::vector<std::size_t> index(segments * f);
  const Tensor& x = a.value();
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t base = s * segment;
    for (std::size_t c = 0; c < f; ++c) {
      std::size_t best = base;
      double bv = x(base, c);
      for (std::size_t r = base + 1; r < base + segment; ++r) {
        const double v = x(r, c);
        if (mode == PoolMode::kMax ? v > bv : v < bv) {
          bv = v;
          best = r;
        }
      }
      index[s * f + c] = best;
    }
  }
  return gather_elements(a, std::move(index), segments);
}

Var affine(const Var& x, const Var& w, const Var& b) {
  if (x.value().rank() != 2 || w.value().rank() != 2 || x.cols() != w.rows()) {
    throw DimensionError("affine: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  if (b.value().size() != w.cols()) {
    throw DimensionError("affine: bias " + shape_str(b.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  Var bias = b.rows() == 1 ? b : reshape(b, 1, b.value().size());
  return add(matmul(x, w), broadcast_rows(bias, x.rows()));
}

}  // namespace mrgan
