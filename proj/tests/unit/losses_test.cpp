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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mrgan/losses.hpp"
#include "mrgan/model.hpp"
#include "mrgan/ops.hpp"

using namespace mrgan;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t({r, c});
  for (double& v : t.storage()) v = uniform(rng, lo, hi);
  return t;
}

// Per-cloud mean of the x coordinate.
Var mean_x(const Var& x, std::size_t n) {
  Var xs = slice_cols(x, 0, 1);
  return scale(sum_cols(reshape(xs, x.rows() / n, n)), 1.0 / static_cast<double>(n));
}

Var constant_scorer(double c, const Var& x, std::size_t n) {
  return Var::constant(Tensor({x.rows() / n, 1}, c));
}

}  // namespace

TEST(CriticLoss, ConstantCriticGivesLambda) {
  Rng rng(1);
  Var real = Var::constant(random_tensor(rng, 20, 3));
  Var fake = Var::constant(random_tensor(rng, 20, 3));
  auto d = [](const Var& x, std::size_t n) { return constant_scorer(0.7, x, n); };
  EXPECT_EQ(wgan_d_loss(d, real, fake, 10, 10.0, rng).total.item(), 10.0);
}

TEST(CriticLoss, UnitGradientCriticHasNoPenalty) {
  Rng rng(2);
  const std::size_t n = 16;
  Var real = Var::constant(random_tensor(rng, 2 * n, 3));
  Var fake = Var::constant(random_tensor(rng, 2 * n, 3));
  const double s = 1.0 / std::sqrt(3.0 * static_cast<double>(n));
  auto d = [s](const Var& x, std::size_t pts) {
    Var u = Var::constant(Tensor({3, 1}, s));
    return sum_cols(reshape(matmul(x, u), x.rows() / pts, pts));
  };
  CriticLoss l = wgan_d_loss(d, real, fake, n, 10.0, rng);
  EXPECT_NEAR(l.penalty.item(), 0.0, 1e-24);
}

TEST(CriticLoss, WassersteinTermByHand) {
  Var real = Var::constant(Tensor({4, 3}, 3.0));
  Var fake = Var::constant(Tensor({4, 3}, 1.0));
  CriticLoss l = wgan_d_loss(mean_x, real, fake, 4, 0.0, std::vector<double>{0.5});
  EXPECT_EQ(l.total.item(), -2.0);
}

TEST(CriticLoss, PenaltyReachesCriticParameters) {
  Critic d(CriticConfig::tiny(), 3);
  Rng rng(4);
  Var real = Var::constant(random_tensor(rng, 16, 3));
  Var fake = Var::constant(random_tensor(rng, 16, 3));
  auto scorer = [&](const Var& x, std::size_t n) { return d.forward(x, n).score; };
  d.params().zero_grad();
  backward(wgan_d_loss(scorer, real, fake, 8, 10.0, std::vector<double>{0.3, 0.6}).penalty);
  double g = 0.0;
  for (auto& p : d.params().params()) g += std::abs(p.grad()[0]);
  EXPECT_GT(g, 0.0);

  auto f = [&]() {
    return wgan_d_loss(scorer, real, fake, 8, 10.0, std::vector<double>{0.3, 0.6}).total;
  };
  for (auto& p : d.params().params()) {
    for (double& v : p.value().storage()) v *= 20.0;
  }
  EXPECT_LT(grad_check_params(f, d.params().params()), 1e-4);
}

TEST(GeneratorAdversarialLoss, Values) {
  Var fake = Var::constant(Tensor({4, 3}, 2.0));
  EXPECT_EQ(wgan_g_loss(mean_x, fake, 4).item(), -2.0);
  auto zero = [](const Var& x, std::size_t n) { return constant_scorer(0.0, x, n); };
  EXPECT_EQ(wgan_g_loss(zero, fake, 4).item(), 0.0);
  Var better = Var::constant(Tensor({4, 3}, 3.0));
  EXPECT_LT(wgan_g_loss(mean_x, better, 4).item(), wgan_g_loss(mean_x, fake, 4).item());
}

TEST(ConvexityLoss, ConstantAndHandValues) {
  auto c = [](const Var& x, std::size_t n) { return constant_scorer(0.37, x, n); };
  Var fake = Var::constant(Tensor({8, 3}, 0.0));
  EXPECT_EQ(convexity_loss(c, fake, 4).item(), 0.37);

  Tensor pts({8, 3}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) pts(i, 0) = 0.1;
  for (std::size_t i = 4; i < 8; ++i) pts(i, 0) = 0.3;
  EXPECT_NEAR(convexity_loss(mean_x, Var::constant(pts), 4).item(), 0.2, 1e-15);
}

TEST(ConvexityLoss, MeanOfPerRootPredictions) {
  HullNet h(HullNetConfig::tiny(), 2);
  Rng rng(5);
  Tensor pts = random_tensor(rng, 6 * 16, 3);
  auto scorer = [&](const Var& x, std::size_t n) { return h.forward(x, n); };
  double mean = 0.0;
  for (std::size_t r = 0; r < 6; ++r) {
    Tensor block({16, 3});
    std::copy_n(pts.data().begin() + static_cast<std::ptrdiff_t>(r * 48), 48, block.data().begin());
    mean += h.predict(block) / 6.0;
  }
  EXPECT_NEAR(convexity_loss(scorer, Var::constant(pts), 16).item(), mean, 1e-12);
}

TEST(ConvexityLoss, FrozenHullNetPassesGradientToGenerator) {
  Generator g(GeneratorConfig::tiny(2), 1);
  HullNet h(HullNetConfig::tiny(), 2);
  h.params().set_requires_grad(false);
  Rng rng(6);
  Var z = Var::constant(random_tensor(rng, 2, 96));
  auto scorer = [&](const Var& x, std::size_t n) { return h.forward(x, n); };
  g.params().zero_grad();
  backward(convexity_loss(scorer, g.forward(z), 4));
  double gen = 0.0;
  for (auto& p : g.params().params()) {
    for (double v : p.grad().data()) gen += std::abs(v);
  }
  EXPECT_GT(gen, 0.0);
  for (auto& p : h.params().params()) {
    for (double v : p.grad().data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(RootDrop, RootBlindCriticGivesZero) {
  // Every block holds the same points, so dropping any block keeps the mean.
  Rng rng(7);
  Tensor block = random_tensor(rng, 4, 3);
  Tensor pts({12, 3});
  for (std::size_t r = 0; r < 3; ++r) {
    std::copy(block.data().begin(), block.data().end(),
              pts.data().begin() + static_cast<std::ptrdiff_t>(r * 12));
  }
  auto d = [](const Var& x, std::size_t n) { return add_scalar(mean_x(x, n), 5.0); };
  RootDropLoss l = root_drop_loss(d, Var::constant(pts), 3, 4);
  EXPECT_NEAR(l.value.item(), 0.0, 1e-15);
  EXPECT_EQ(l.skipped, 0u);
}

TEST(RootDrop, HandCases) {
  Var full = Var::constant(Tensor({1, 1}, 2.0));
  EXPECT_EQ(root_drop_from_scores(full, Var::constant(Tensor({3, 1}, 1.0)), 3).value.item(), 0.5);
  EXPECT_EQ(root_drop_from_scores(full, Var::constant(Tensor::matrix(2, 1, {2, 0})), 2).value.item(),
            0.5);
}

TEST(RootDrop, SkipsNearZeroScores) {
  Var full = Var::constant(Tensor::matrix(2, 1, {1e-7, 2.0}));
  Var dropped = Var::constant(Tensor::matrix(4, 1, {5, 5, 1, 1}));
  RootDropLoss l = root_drop_from_scores(full, dropped, 2);
  EXPECT_EQ(l.skipped, 1u);
  EXPECT_EQ(l.value.item(), 0.5);
  RootDropLoss all = root_drop_from_scores(Var::constant(Tensor({1, 1}, 0.0)),
                                           Var::constant(Tensor({2, 1}, 1.0)), 2);
  EXPECT_EQ(all.value.item(), 0.0);
  EXPECT_EQ(all.skipped, 1u);
}

TEST(RootDrop, DroppedCloudsAreAssembledPerBlock) {
  // Sum of x over points: dropping block i removes exactly its sum.
  auto sum_x = [](const Var& x, std::size_t n) {
    return sum_cols(reshape(slice_cols(x, 0, 1), x.rows() / n, n));
  };
  Tensor pts({6, 3}, 0.0);
  const double xs[6] = {1, 1, 2, 2, 5, 5};
  for (std::size_t i = 0; i < 6; ++i) pts(i, 0) = xs[i];
  // D(G) = 16; drops give 14, 12, 6; terms 2/16, 4/16, 10/16.
  EXPECT_NEAR(root_drop_loss(sum_x, Var::constant(pts), 3, 2).value.item(), 16.0 / 48.0, 1e-15);
  EXPECT_EQ(root_drop_loss(sum_x, Var::constant(pts), 1, 6).value.item(), 0.0);
}

TEST(Triplet, SeparatedCollapsedRootsGiveZero) {
  Tensor pts({8, 3}, 0.0);
  for (std::size_t i = 4; i < 8; ++i) pts(i, 0) = 10.0;
  Rng rng(1);
  auto t = sample_triplets(1, 2, 4, 64, rng);
  EXPECT_EQ(triplet_loss(Var::constant(pts), t, 0.2).item(), 0.0);
}

TEST(Triplet, IdenticalPointsGiveMargin) {
  Rng rng(1);
  auto t = sample_triplets(2, 3, 4, 32, rng);
  EXPECT_NEAR(triplet_loss(Var::constant(Tensor({24, 3}, 0.5)), t, 0.2).item(), 0.2, 1e-15);
}

TEST(Triplet, HandEvaluation) {
  Var pts = Var::constant(Tensor::matrix(3, 3, {0, 0, 0, 1, 0, 0, 3, 0, 0}));
  EXPECT_EQ(triplet_loss(pts, {{0, 1, 2}}, 0.2).item(), 0.0);
  EXPECT_NEAR(triplet_loss(pts, {{0, 2, 1}}, 0.2).item(), 2.2, 1e-15);
}

TEST(Triplet, SamplingRespectsRoots) {
  Rng rng(3);
  const std::size_t ppr = 5, roots = 3, n = ppr * roots;
  for (const auto& t : sample_triplets(4, roots, ppr, 500, rng)) {
    EXPECT_EQ(t.anchor / n, t.positive / n);
    EXPECT_EQ(t.anchor / n, t.negative / n);
    EXPECT_EQ((t.anchor % n) / ppr, (t.positive % n) / ppr);
    EXPECT_NE((t.anchor % n) / ppr, (t.negative % n) / ppr);
    EXPECT_NE(t.anchor, t.positive);
  }
  EXPECT_THROW(sample_triplets(1, 1, 4, 3, rng), std::invalid_argument);
}

TEST(Triplet, Bounds) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor pts = random_tensor(rng, 3 * 8, 3);
    double max_d = 0.0;
    for (std::size_t i = 0; i < 24; ++i) {
      for (std::size_t j = 0; j < 24; ++j) {
        max_d = std::max(max_d, std::hypot(pts(i, 0) - pts(j, 0), pts(i, 1) - pts(j, 1),
                                           pts(i, 2) - pts(j, 2)));
      }
    }
    const double l = triplet_loss(Var::constant(pts), sample_triplets(1, 3, 8, 64, rng), 0.2).item();
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 0.2 + max_d);
  }
}

TEST(Recon, Values) {
  Rng rng(2);
  Tensor z = random_tensor(rng, 3, 96);
  Tensor plus = z, minus = z;
  for (double& v : plus.storage()) v += 1.0;
  for (double& v : minus.storage()) v -= 1.0;
  EXPECT_EQ(recon_loss(Var::constant(z), Var::constant(z)).item(), 0.0);
  EXPECT_NEAR(recon_loss(Var::constant(z), Var::constant(plus)).item(), 1.0, 1e-12);
  EXPECT_NEAR(recon_loss(Var::constant(z), Var::constant(plus)).item(),
              recon_loss(Var::constant(z), Var::constant(minus)).item(), 1e-12);
}

TEST(TotalLoss, DefaultWeightsWithUnitTerms) {
  Var one = Var::constant(Tensor::scalar(1.0));
  GeneratorLossParts parts{one, one, one, one, one};
  EXPECT_EQ(total_g_loss(parts, LossWeights{}).item(), 4.1);
}

TEST(TotalLoss, ZeroWeightsAndToggles) {
  Rng rng(3);
  auto s = [&]() { return Var::constant(Tensor::scalar(uniform(rng, 0.5, 2.0))); };
  GeneratorLossParts parts{s(), s(), s(), s(), s()};
  LossWeights zero{0, 0, 0, 0, 10};
  EXPECT_EQ(total_g_loss(parts, zero).item(), parts.wgan.item());
  LossWeights off;
  off.use_h = off.use_rd = off.use_t = off.use_rec = false;
  EXPECT_EQ(total_g_loss(parts, off).item(), parts.wgan.item());

  const LossWeights w;
  const double full = total_g_loss(parts, w).item();
  struct Case {
    bool LossWeights::*flag;
    double lambda;
    Var term;
  };
  for (const Case& c : {Case{&LossWeights::use_h, w.h, parts.h}, Case{&LossWeights::use_rd, w.rd, parts.rd},
                        Case{&LossWeights::use_t, w.t, parts.t}, Case{&LossWeights::use_rec, w.rec, parts.rec}}) {
    LossWeights toggled = w;
    toggled.*c.flag = false;
    EXPECT_NEAR(full - total_g_loss(parts, toggled).item(), c.lambda * c.term.item(), 1e-14);
  }
}
