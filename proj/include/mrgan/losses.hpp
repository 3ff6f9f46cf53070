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

// Training objectives. Clouds are batched along rows as in model.hpp: a batch
// of B clouds with N points each is a (B*N) x 3 Var.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mrgan/autograd.hpp"
#include "mrgan/rng.hpp"

namespace mrgan {

// Scores each cloud of a batch: (B*N) x 3 -> B x 1.
using CloudScorer = std::function<Var(const Var& clouds, std::size_t points_per_cloud)>;

inline constexpr double kRootDropEps = 1e-6;
inline constexpr double kTripletMargin = 0.2;
inline constexpr std::size_t kTripletsPerStep = 512;

struct LossWeights {
  double h = 1.0;
  double rd = 0.1;
  double t = 1.0;
  double rec = 1.0;
  double gp = 10.0;
  bool use_h = true;
  bool use_rd = true;
  bool use_t = true;
  bool use_rec = true;
};

struct CriticLoss {
  Var total;    // wasserstein + gp * penalty
  Var wasserstein;  // mean D(fake) - mean D(real)
  Var penalty;  // mean (|grad| - 1)^2
};

// alpha holds one interpolation weight per cloud: x = alpha real + (1-alpha) fake.
CriticLoss wgan_d_loss(const CloudScorer& critic, const Var& real, const Var& fake,
                       std::size_t points_per_cloud, double lambda_gp,
                       const std::vector<double>& alpha);
CriticLoss wgan_d_loss(const CloudScorer& critic, const Var& real, const Var& fake,
                       std::size_t points_per_cloud, double lambda_gp, Rng& rng);

// -mean D(fake).
Var wgan_g_loss(const CloudScorer& critic, const Var& fake, std::size_t points_per_cloud);

// Mean hull-net prediction over every root block of every cloud.
Var convexity_loss(const CloudScorer& hullnet, const Var& fake, std::size_t points_per_root);

struct RootDropLoss {
  Var value;
  std::size_t skipped = 0;  // clouds whose full score was within kRootDropEps of 0
};

// Per cloud (1/R) sum_i (D(G) - D(G without block i)) / D(G), averaged over
// the clouds that were not skipped. R < 2 gives 0.
RootDropLoss root_drop_loss(const CloudScorer& critic, const Var& fake, std::size_t roots,
                            std::size_t points_per_root);
// Same from precomputed scores: full is B x 1, dropped is (B*R) x 1 with row
// b*R + i the score of cloud b without block i.
RootDropLoss root_drop_from_scores(const Var& full, const Var& dropped, std::size_t roots);

struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
};

// Row indices into the batched cloud; anchor and positive share a root block,
// the negative comes from another root of the same cloud. Requires R >= 2.
std::vector<Triplet> sample_triplets(std::size_t clouds, std::size_t roots,
                                     std::size_t points_per_root, std::size_t count, Rng& rng);

// Mean of max(0, |a-p| - |a-n| + margin) over the given triplets.
Var triplet_loss(const Var& points, const std::vector<Triplet>& triplets, double margin);

// Mean squared error between reconstructed and sampled latents.
Var recon_loss(const Var& z, const Var& recon);

struct GeneratorLossParts {
  Var wgan;
  Var h;
  Var rd;
  Var t;
  Var rec;
};

// wgan + lambda_h h + lambda_t t + lambda_rec rec + lambda_rd rd; disabled or
// undefined terms are left out.
Var total_g_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace mrgan
