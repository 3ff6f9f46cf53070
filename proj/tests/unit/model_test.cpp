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
#include <numeric>

#include "mrgan/model.hpp"

using namespace mrgan;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t({r, c});
  for (double& v : t.storage()) v = uniform(rng, lo, hi);
  return t;
}

LatentBundle random_bundle(std::size_t roots, std::size_t z_dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor z({roots, z_dim});
  for (double& v : z.storage()) v = normal(rng);
  return {z, MixStrategy::kIndependent};
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t c = 0; c < t.cols(); ++c) out(i, c) = t(perm[i], c);
  }
  return out;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

TEST(Mapping, OutputShapes) {
  Generator g(GeneratorConfig::full(5), 1);
  Style s = g.mapping_forward(Var::constant(random_bundle(1, 96, 2).z));
  EXPECT_EQ(s.scale.shape(), (Shape{1, 256}));
  EXPECT_EQ(s.bias.shape(), (Shape{1, 256}));
}

TEST(Mapping, ZeroWeightsGiveBiasConstants) {
  Generator g(GeneratorConfig::tiny(), 1);
  for (auto& p : g.params().params()) {
    if (p.name().rfind("gen/map", 0) == 0) {
      for (double& v : p.value().storage()) v = p.name().back() == 'b' ? 0.5 : 0.0;
    }
  }
  Style a = g.mapping_forward(Var::constant(random_bundle(1, 96, 3).z));
  Style b = g.mapping_forward(Var::constant(random_bundle(1, 96, 4).z));
  EXPECT_EQ(a.scale.value(), b.scale.value());
  EXPECT_EQ(a.bias.value(), Tensor({1, 8}, 0.5));
  EXPECT_EQ(a.scale.value(), Tensor({1, 8}, 1.5));
}

TEST(Mapping, Deterministic) {
  Generator g(GeneratorConfig::tiny(), 1);
  Var z = Var::constant(random_bundle(2, 96, 3).z);
  EXPECT_EQ(g.mapping_forward(z).scale.value(), g.mapping_forward(z).scale.value());
}

TEST(AdaIn, NormalizedRootUnchanged) {
  Var x = Var::constant(Tensor::matrix(1, 4, {1, -1, 1, -1}));
  Var one = Var::constant(Tensor({1, 4}, 1.0));
  Var zero = Var::constant(Tensor({1, 4}, 0.0));
  const Tensor out = adain(x, one, zero).value();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], x.value()[i], 1e-15);
}

TEST(AdaIn, ZeroScaleGivesBias) {
  Rng rng(1);
  Var x = Var::constant(random_tensor(rng, 2, 6));
  Var bias = Var::constant(random_tensor(rng, 2, 6));
  EXPECT_EQ(adain(x, Var::constant(Tensor({2, 6}, 0.0)), bias).value(), bias.value());
}

TEST(AdaIn, ConstantRootStaysFinite) {
  Var x = Var::constant(Tensor({1, 5}, 3.0));
  Var out = adain(x, Var::constant(Tensor({1, 5}, 2.0)), Var::constant(Tensor({1, 5}, 0.25)));
  EXPECT_TRUE(out.value().all_finite());
  EXPECT_EQ(out.value(), Tensor({1, 5}, 0.25));
}

TEST(AdaIn, GradientCheck) {
  Rng rng(5);
  Tensor s = random_tensor(rng, 3, 7), b = random_tensor(rng, 3, 7);
  auto f = [&](const Var& x) {
    return sum_all(square(adain(x, Var::constant(s), Var::constant(b))));
  };
  EXPECT_LT(grad_check(f, random_tensor(rng, 3, 7)), 1e-6);
}

TEST(TreeGcn, IdentityConfiguration) {
  Var v = Var::constant(Tensor::matrix(1, 3, {0.5, -2, 4}));
  TreeNodeSet nodes{{v}, {}};
  Tensor eye({3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  TreeLayerParams p{Var::constant(eye), {}, Var::constant(Tensor({1, 3}, 0.0)), Var::constant(eye)};
  TreeNodeSet out = treegcn_forward(nodes, p, 1);
  EXPECT_EQ(out.current().value(), v.value());
}

TEST(TreeGcn, ScalarHandEvaluation) {
  // Ancestor a = 2 at depth 0, node v = 1 at depth 1.
  TreeNodeSet nodes{{Var::constant(Tensor::scalar(2.0)), Var::constant(Tensor::scalar(1.0))}, {1}};
  TreeLayerParams p{Var::constant(Tensor::scalar(1.0)),
                    {Var::constant(Tensor::scalar(3.0))},
                    Var::constant(Tensor::scalar(0.5)),
                    Var::constant(Tensor::scalar(2.0))};
  EXPECT_EQ(treegcn_forward(nodes, p, 1).current().item(), 15.0);
}

TEST(TreeGcn, BranchingShapeAndAncestry) {
  Rng rng(3);
  TreeNodeSet nodes{{Var::constant(random_tensor(rng, 5, 256))}, {}};
  EXPECT_TRUE(nodes.ancestry(0).empty());
  TreeLayerParams p{Var::constant(random_tensor(rng, 256, 128)), {},
                    Var::constant(random_tensor(rng, 1, 128)),
                    Var::constant(random_tensor(rng, 128, 256))};
  TreeNodeSet out = treegcn_forward(nodes, p, 2);
  EXPECT_EQ(out.current().shape(), (Shape{10, 128}));
  EXPECT_EQ(out.ancestry(7), (std::vector<std::size_t>{3}));
  EXPECT_EQ(out.depth(), 1u);

  TreeLayerParams q{Var::constant(random_tensor(rng, 128, 4)),
                    {Var::constant(random_tensor(rng, 256, 4))},
                    Var::constant(random_tensor(rng, 1, 4)),
                    Var::constant(random_tensor(rng, 4, 12))};
  TreeNodeSet out2 = treegcn_forward(out, q, 3);
  EXPECT_EQ(out2.current().shape(), (Shape{30, 4}));
  EXPECT_EQ(out2.ancestry(29), (std::vector<std::size_t>{4, 9}));
  EXPECT_THROW(treegcn_forward(out, p, 2), DimensionError);
}

TEST(TreeGcn, ChildrenUseTheirOwnBranchMatrix) {
  // One node, two children: child j = v' B_j.
  TreeNodeSet nodes{{Var::constant(Tensor::matrix(1, 2, {1, 2}))}, {}};
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor branch = Tensor::matrix(2, 4, {1, 0, 0, 1, 0, 1, 1, 0});  // [I | swap]
  TreeLayerParams p{Var::constant(eye), {}, Var::constant(Tensor({1, 2}, 0.0)),
                    Var::constant(branch)};
  EXPECT_EQ(treegcn_forward(nodes, p, 2).current().value(), Tensor::matrix(2, 2, {1, 2, 2, 1}));
}

TEST(FeatureShare, ShapesSymmetryAndEquivariance) {
  Rng rng(4);
  ParamStore store;
  FeatureShareParams sp{make_linear(store, "d", 128, 16, rng), make_linear(store, "c", 144, 128, rng)};
  Tensor x = random_tensor(rng, 10, 128);
  Var out = feature_share(Var::constant(x), 10, sp);
  EXPECT_EQ(out.shape(), (Shape{10, 128}));

  Tensor same({10, 128});
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t c = 0; c < 128; ++c) same(i, c) = x(0, c);
  }
  Tensor so = feature_share(Var::constant(same), 10, sp).value();
  for (std::size_t i = 1; i < 10; ++i) {
    for (std::size_t c = 0; c < 128; ++c) EXPECT_EQ(so(i, c), so(0, c));
  }

  auto perm = shuffled(10, 9);
  Tensor po = feature_share(Var::constant(permute_rows(x, perm)), 10, sp).value();
  EXPECT_EQ(po, permute_rows(out.value(), perm));
}

TEST(Generator, OutputShapePerRootCount) {
  for (std::size_t r : {1u, 2u, 5u, 6u}) {
    Generator g(GeneratorConfig::full(r), 10 + r);
    PartitionedCloud pc = g.generate(random_bundle(r, 96, r));
    EXPECT_EQ(pc.points.shape(), (Shape{256 * r, 3}));
    EXPECT_EQ(pc.points_per_root, 256u);
    EXPECT_EQ(pc.roots(), r);
    EXPECT_EQ(pc.root_of_point(256 * r - 1), r - 1);
    EXPECT_TRUE(pc.points.all_finite());
  }
}

TEST(Generator, UniformBundleInvariantToRowSwap) {
  Generator g(GeneratorConfig::smoke(3), 1);
  LatentBundle b = random_bundle(1, 96, 7);
  Tensor z({3, 96});
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 96; ++c) z(r, c) = b.z(0, c);
  }
  LatentBundle u{z, MixStrategy::kUniform};
  LatentBundle swapped{permute_rows(z, {2, 1, 0}), MixStrategy::kUniform};
  EXPECT_EQ(g.generate(u).points, g.generate(swapped).points);
}

TEST(Generator, BlockCausalityWithoutSharing) {
  GeneratorConfig cfg = GeneratorConfig::smoke(4);
  cfg.share_identity = true;
  Generator g(cfg, 2);
  LatentBundle a = random_bundle(4, 96, 1);
  LatentBundle b = a;
  for (std::size_t c = 0; c < 96; ++c) b.z(2, c) += 0.7;
  PartitionedCloud pa = g.generate(a), pb = g.generate(b);
  for (std::size_t r = 0; r < 4; ++r) {
    if (r == 2) {
      EXPECT_NE(pa.block(r), pb.block(r));
    } else {
      EXPECT_EQ(pa.block(r), pb.block(r));
    }
  }
}

TEST(Generator, SharingCouplesRoots) {
  Generator g(GeneratorConfig::smoke(3), 2);
  LatentBundle a = random_bundle(3, 96, 1);
  LatentBundle b = a;
  for (std::size_t c = 0; c < 96; ++c) b.z(1, c) += 0.7;
  EXPECT_NE(g.generate(a).block(0), g.generate(b).block(0));
}

TEST(Generator, BatchMatchesSingle) {
  Generator g(GeneratorConfig::smoke(2), 3);
  std::vector<LatentBundle> bundles{random_bundle(2, 96, 1), random_bundle(2, 96, 2),
                                    random_bundle(2, 96, 3)};
  auto batch = g.generate(bundles);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(batch[i].points, g.generate(bundles[i]).points);
}

TEST(Generator, RejectsWrongRootCount) {
  Generator g(GeneratorConfig::tiny(2), 3);
  EXPECT_THROW(g.generate(random_bundle(3, 96, 1)), DimensionError);
  GeneratorConfig bad = GeneratorConfig::tiny();
  bad.features = {8, 4};
  EXPECT_THROW(Generator(bad, 1), std::invalid_argument);
}

TEST(Generator, ParameterGradientCheck) {
  Generator g(GeneratorConfig::tiny(2), 5);
  Tensor z = stack_latents({random_bundle(2, 96, 1), random_bundle(2, 96, 2)});
  Rng rng(3);
  Tensor w = random_tensor(rng, 2 * 2 * 4, 3);
  auto f = [&]() { return sum_all(mul(g.forward(Var::constant(z)), Var::constant(w))); };
  // Outputs are ~1e-3 at init; scale them up so the check is not at the floor.
  for (auto& p : g.params().params()) {
    for (double& v : p.value().storage()) v *= 10.0;
  }
  EXPECT_LT(grad_check_params(f, g.params().params()), 1e-5);
}

TEST(Critic, FullSizeShapesAndPermutationInvariance) {
  Critic d(CriticConfig::full(), 1);
  Rng rng(2);
  Tensor x = random_tensor(rng, 1536, 3);
  CriticOutput o = d.forward(Var::constant(x), 1536);
  EXPECT_EQ(o.score.shape(), (Shape{1, 1}));
  EXPECT_EQ(o.last_conv.shape(), (Shape{1536, 1024}));
  CriticOutput p = d.forward(Var::constant(permute_rows(x, shuffled(1536, 4))), 1536);
  EXPECT_EQ(o.score.item(), p.score.item());
}

TEST(Critic, BatchedScores) {
  Critic d(CriticConfig::desk(), 1);
  Rng rng(2);
  Tensor a = random_tensor(rng, 32, 3), b = random_tensor(rng, 32, 3);
  Tensor ab({64, 3});
  std::copy(a.data().begin(), a.data().end(), ab.data().begin());
  std::copy(b.data().begin(), b.data().end(), ab.data().begin() + 96);
  Tensor s = d.forward(Var::constant(ab), 32).score.value();
  EXPECT_EQ(s(0, 0), d.forward(Var::constant(a), 32).score.item());
  EXPECT_EQ(s(1, 0), d.forward(Var::constant(b), 32).score.item());
}

TEST(ReconHead, ShapesRangeAndErrors) {
  ReconHead head(ReconConfig::full(), 1024, 1);
  Rng rng(3);
  Tensor feats = random_tensor(rng, 1280, 1024, 0.0, 1.0);
  Tensor out = head.forward(Var::constant(feats), 256).value();
  EXPECT_EQ(out.shape(), (Shape{5, 96}));
  for (double v : out.data()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(head.forward(Var::constant(random_tensor(rng, 300, 1024)), 256), DimensionError);
}

TEST(ReconHead, PermutingWithinBlockKeepsLatent) {
  ReconHead head(ReconConfig::desk(), 16, 1);
  Rng rng(3);
  Tensor feats = random_tensor(rng, 3 * 16, 16);
  Tensor base = head.forward(Var::constant(feats), 16).value();
  std::vector<std::size_t> perm(48);
  std::iota(perm.begin(), perm.end(), 0);
  auto inner = shuffled(16, 8);
  for (std::size_t i = 0; i < 16; ++i) perm[16 + i] = 16 + inner[i];
  Tensor moved = head.forward(Var::constant(permute_rows(feats, perm)), 16).value();
  EXPECT_EQ(moved, base);
}

TEST(HullNet, ScalarAndPermutationInvariance) {
  HullNet h(HullNetConfig::full(), 1);
  Rng rng(5);
  Tensor x = random_tensor(rng, 256, 3);
  Var out = h.forward(Var::constant(x), 256);
  EXPECT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_EQ(h.predict(x), h.predict(permute_rows(x, shuffled(256, 2))));
}

TEST(PartitionedCloud, BlocksAndLabels) {
  PartitionedCloud pc{Tensor::matrix(4, 3, {0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3}), 2};
  EXPECT_EQ(pc.roots(), 2u);
  EXPECT_EQ(pc.block(1), Tensor::matrix(2, 3, {2, 2, 2, 3, 3, 3}));
  EXPECT_EQ(pc.labels(), (std::vector<int>{0, 0, 1, 1}));
}
