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

#include "mrgan/losses.hpp"

#include <stdexcept>
#include <string>

#include "mrgan/ops.hpp"

namespace mrgan {

namespace {

std::size_t cloud_count(const Var& x, std::size_t n, const char* what) {
  if (x.cols() != 3) {
    throw DimensionError(std::string(what) + ": clouds must have 3 columns, got " +
                         shape_str(x.shape()));
  }
  if (n == 0 || x.rows() % n != 0) {
    throw DimensionError(std::string(what) + ": " + std::to_string(x.rows()) +
                         " rows do not split into clouds of " + std::to_string(n));
  }
  return x.rows() / n;
}

}  // namespace

CriticLoss wgan_d_loss(const CloudScorer& critic, const Var& real, const Var& fake,
                       std::size_t n, double lambda_gp, const std::vector<double>& alpha) {
  if (real.shape() != fake.shape()) {
    throw DimensionError("critic loss: real " + shape_str(real.shape()) + " vs fake " +
                         shape_str(fake.shape()));
  }
  const std::size_t b = cloud_count(real, n, "critic loss");
  if (alpha.size() != b) throw std::invalid_argument("critic loss: one alpha per cloud");

  Var w = sub(mean_all(critic(fake, n)), mean_all(critic(real, n)));

  Tensor a({b * n, 3});
  for (std::size_t i = 0; i < b * n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) a(i, c) = alpha[i / n];
  }
  Tensor one_minus = a;
  for (double& v : one_minus.storage()) v = 1.0 - v;
  // The interpolate is a fresh leaf: the penalty differentiates D only.
  Tensor mixed = add(mul(Var::constant(a), Var::constant(real.value())),
                     mul(Var::constant(one_minus), Var::constant(fake.value())))
                     .value();
  Var xhat = Var::leaf(std::move(mixed), true);
  Var scores = critic(xhat, n);
  std::vector<Var> wrt{xhat};
  Var g = grad(sum_all(scores), wrt, true)[0];
  Var norm = mrgan::sqrt(sum_cols(reshape(square(g), b, n * 3)));
  Var penalty = mean_all(square(add_scalar(norm, -1.0)));
  return {add(w, scale(penalty, lambda_gp)), w, penalty};
}

CriticLoss wgan_d_loss(const CloudScorer& critic, const Var& real, const Var& fake,
                       std::size_t n, double lambda_gp, Rng& rng) {
  const std::size_t b = cloud_count(real, n, "critic loss");
  std::vector<double> alpha(b);
  for (double& v : alpha) v = uniform(rng);
  return wgan_d_loss(critic, real, fake, n, lambda_gp, alpha);
}

Var wgan_g_loss(const CloudScorer& critic, const Var& fake, std::size_t n) {
  cloud_count(fake, n, "generator loss");
  return neg(mean_all(critic(fake, n)));
}

Var convexity_loss(const CloudScorer& hullnet, const Var& fake, std::size_t points_per_root) {
  cloud_count(fake, points_per_root, "convexity loss");
  return mean_all(hullnet(fake, points_per_root));
}

RootDropLoss root_drop_from_scores(const Var& full, const Var& dropped, std::size_t roots) {
  const std::size_t b = full.rows();
  if (full.cols() != 1 || dropped.cols() != 1 || dropped.rows() != b * roots) {
    throw DimensionError("root drop: scores " + shape_str(full.shape()) + " and " +
                         shape_str(dropped.shape()) + " for " + std::to_string(roots) + " roots");
  }
  RootDropLoss out;
  Tensor mask({b * roots, 1}, 0.0);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (std::abs(full.value()(i, 0)) <= kRootDropEps) {
      ++out.skipped;
      continue;
    }
    ++kept;
    for (std::size_t r = 0; r < roots; ++r) mask(i * roots + r, 0) = 1.0;
  }
  if (kept == 0) {
    out.value = Var::constant(Tensor::scalar(0.0));
    return out;
  }
  std::vector<std::size_t> owner(b * roots);
  for (std::size_t j = 0; j < owner.size(); ++j) owner[j] = j / roots;
  Var full_rep = index_rows(full, std::move(owner));
  Var ratio = div(sub(full_rep, dropped), full_rep);
  out.value = scale(sum_all(mul(ratio, Var::constant(std::move(mask)))),
                    1.0 / static_cast<double>(roots * kept));
  return out;
}

RootDropLoss root_drop_loss(const CloudScorer& critic, const Var& fake, std::size_t roots,
                            std::size_t points_per_root) {
  const std::size_t n = roots * points_per_root;
  const std::size_t b = cloud_count(fake, n, "root drop");
  if (roots < 2) return {Var::constant(Tensor::scalar(0.0)), 0};
  Var full = critic(fake, n);
  const std::size_t kept_points = n - points_per_root;
  std::vector<std::size_t> rows;
  rows.reserve(b * roots * kept_points);
  for (std::size_t c = 0; c < b; ++c) {
    for (std::size_t drop = 0; drop < roots; ++drop) {
      for (std::size_t p = 0; p < n; ++p) {
        if (p / points_per_root != drop) rows.push_back(c * n + p);
      }
    }
  }
  Var dropped = critic(index_rows(fake, std::move(rows)), kept_points);
  return root_drop_from_scores(full, dropped, roots);
}

std::vector<Triplet> sample_triplets(std::size_t clouds, std::size_t roots,
                                     std::size_t points_per_root, std::size_t count, Rng& rng) {
  if (roots < 2) throw std::invalid_argument("triplet loss needs at least two roots");
  if (clouds == 0 || points_per_root == 0) throw std::invalid_argument("no points to sample");
  const std::size_t n = roots * points_per_root;
  std::vector<Triplet> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = uniform_index(rng, clouds);
    const std::size_t ra = uniform_index(rng, roots);
    std::size_t rn = uniform_index(rng, roots - 1);
    if (rn >= ra) ++rn;
    const std::size_t base = c * n;
    const std::size_t a = uniform_index(rng, points_per_root);
    std::size_t p = a;
    if (points_per_root > 1) {
      p = uniform_index(rng, points_per_root - 1);
      if (p >= a) ++p;
    }
    out.push_back({base + ra * points_per_root + a, base + ra * points_per_root + p,
                   base + rn * points_per_root + uniform_index(rng, points_per_root)});
  }
  return out;
}

Var triplet_loss(const Var& points, const std::vector<Triplet>& triplets, double margin) {
  if (triplets.empty()) throw std::invalid_argument("triplet loss: no triplets");
  std::vector<std::size_t> ia, ip, in;
  for (const auto& t : triplets) {
    ia.push_back(t.anchor);
    ip.push_back(t.positive);
    in.push_back(t.negative);
  }
  Var a = index_rows(points, std::move(ia));
  Var p = index_rows(points, std::move(ip));
  Var n = index_rows(points, std::move(in));
  Var dap = mrgan::sqrt(sum_cols(square(sub(a, p))));
  Var dan = mrgan::sqrt(sum_cols(square(sub(a, n))));
  return mean_all(clamp_min(add_scalar(sub(dap, dan), margin), 0.0));
}

Var recon_loss(const Var& z, const Var& recon) {
  if (z.shape() != recon.shape()) {
    throw DimensionError("recon loss: latents " + shape_str(z.shape()) + " vs reconstruction " +
                         shape_str(recon.shape()));
  }
  return mean_all(square(sub(recon, z)));
}

Var total_g_loss(const GeneratorLossParts& parts, const LossWeights& w) {
  Var total = parts.wgan;
  auto term = [&](bool on, double lambda, const Var& v) {
    if (on && v.defined()) total = add(total, scale(v, lambda));
  };
  // The 0.1-weighted term goes last so unit sub-losses sum to exactly 4.1.
  term(w.use_h, w.h, parts.h);
  term(w.use_t, w.t, parts.t);
  term(w.use_rec, w.rec, parts.rec);
  term(w.use_rd, w.rd, parts.rd);
  return total;
}

}  // namespace mrgan
