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

// The four networks: multi-rooted tree generator, critic, the critic's
// latent-reconstruction head and the hull-distance predictor.
//
// Batches are stacked along rows. A generator batch of B bundles with R roots
// and P points per root produces (B*R*P) x 3 rows ordered by sample, then
// root, then tree position.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrgan/nn.hpp"
#include "mrgan/ops.hpp"

namespace mrgan {

enum class MixStrategy { kUniform, kHalf, kSingle, kIndependent };

const char* to_string(MixStrategy s);

struct LatentBundle {
  Tensor z;  // R x z_dim
  MixStrategy strategy = MixStrategy::kIndependent;

  std::size_t roots() const { return z.rows(); }
};

struct PartitionedCloud {
  Tensor points;  // (R * points_per_root) x 3
  std::size_t points_per_root = 0;

  std::size_t roots() const { return points_per_root ? points.rows() / points_per_root : 0; }
  std::size_t root_of_point(std::size_t p) const { return p / points_per_root; }
  Tensor block(std::size_t root) const;
  std::vector<int> labels() const;
};

struct GeneratorConfig {
  std::size_t roots = 5;
  std::size_t root_dim = 256;
  std::size_t z_dim = 96;
  std::vector<std::size_t> branching{2, 2, 2, 2, 16};
  // Output width of each tree layer; the last is 3.
  std::vector<std::size_t> features{128, 128, 128, 128, 3};
  // Feature sharing follows this tree layer (1-based).
  std::size_t share_after_layer = 1;
  std::size_t share_dim = 16;
  // Replaces feature sharing by the identity; roots then never interact.
  bool share_identity = false;

  static GeneratorConfig full(std::size_t roots);
  // Small net for the GAN smoke run: branching [2,2,4], 16 points per root.
  static GeneratorConfig smoke(std::size_t roots = 2);
  // Gradient-check size: branching [2,2], 8 features.
  static GeneratorConfig tiny(std::size_t roots = 2);

  std::size_t points_per_root() const;
  std::size_t num_points() const { return roots * points_per_root(); }
  void validate() const;
};

struct CriticConfig {
  std::vector<std::size_t> conv{64, 128, 512, 1024};
  std::vector<std::size_t> dense{1024, 512, 512, 1};

  static CriticConfig full() { return {}; }
  static CriticConfig desk() { return {{32, 64, 128, 256}, {256, 128, 128, 1}}; }
  static CriticConfig tiny() { return {{8, 8}, {8, 1}}; }
  void validate() const;
};

struct ReconConfig {
  std::vector<std::size_t> hidden{512, 128, 128};
  std::size_t z_dim = 96;

  static ReconConfig full() { return {}; }
  static ReconConfig desk() { return {{128, 64, 64}, 96}; }
  static ReconConfig tiny() { return {{8}, 96}; }
};

struct HullNetConfig {
  std::vector<std::size_t> conv{64, 128, 256, 512};
  std::vector<std::size_t> dense{512, 256, 128, 64, 31, 1};

  static HullNetConfig full() { return {}; }
  static HullNetConfig desk() { return {{32, 64, 128}, {128, 64, 32, 1}}; }
  static HullNetConfig tiny() { return {{8}, {8, 1}}; }
  void validate() const;
};

struct Linear {
  Parameter w;
  Parameter b;

  Var operator()(const Var& x) const { return affine(x, w.var(), b.var()); }
};

// Weight 0.02 N(0,1), bias zero.
Linear make_linear(ParamStore& store, const std::string& prefix, std::size_t in,
                   std::size_t out, Rng& rng);

// scale * (x - mean) / max(std, 1e-6) + bias, per row; mean and population std
// over the row's channels.
Var adain(const Var& x, const Var& scale, const Var& bias);
inline constexpr double kAdainStdFloor = 1e-6;

// Node features of a growing tree. levels[d] holds the features at depth d;
// the last level is the current one. Rows of each level are ordered so that
// the parent of row i at depth d+1 is row i / branching[d].
struct TreeNodeSet {
  std::vector<Var> levels;
  std::vector<std::size_t> branching;  // degree used to reach each deeper level

  const Var& current() const { return levels.back(); }
  std::size_t depth() const { return levels.size() - 1; }
  // Row indices of every ancestor of row i of the current level, shallowest
  // first.
  std::vector<std::size_t> ancestry(std::size_t i) const;
};

struct TreeLayerParams {
  Var w_loop;              // Fin x Fout
  std::vector<Var> w_anc;  // one F_d x Fout per ancestor depth
  Var bias;                // 1 x Fout
  Var branch;              // Fout x (degree * Fout): [B_1 | ... | B_degree]
};

// v' = v W_loop + sum_d a_d W_anc[d] + b, then child j = v' B_j. The output
// has degree rows per input row.
TreeNodeSet treegcn_forward(const TreeNodeSet& nodes, const TreeLayerParams& params,
                            std::size_t degree);

struct FeatureShareParams {
  Linear dense;  // F -> share_dim
  Linear conv;   // F + share_dim -> F
};

// Max-pool over each group of group_rows rows, dense, broadcast-concat, then a
// pointwise linear map with LeakyReLU.
Var feature_share(const Var& features, std::size_t group_rows, const FeatureShareParams& params);

struct Style {
  Var scale;  // n x root_dim
  Var bias;
};

class Generator {
 public:
  Generator(GeneratorConfig config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // z: n x z_dim -> per-row AdaIN scale (1 + raw) and bias.
  Style mapping_forward(const Var& z) const;
  // z: (B*R) x z_dim -> (B*R*points_per_root) x 3.
  Var forward(const Var& z) const;
  // Gradient-free generation of one bundle.
  PartitionedCloud generate(const LatentBundle& bundle) const;
  std::vector<PartitionedCloud> generate(const std::vector<LatentBundle>& bundles) const;

 private:
  GeneratorConfig config_;
  ParamStore store_;
  Linear map0_, map1_;
  Parameter roots_;
  struct Layer {
    Parameter w_loop;
    std::vector<Parameter> w_anc;
    Parameter bias;
    Parameter branch;
  };
  std::vector<Layer> layers_;
  FeatureShareParams share_;
};

struct CriticOutput {
  Var score;      // B x 1
  Var last_conv;  // (B*N) x conv.back(), after activation
};

class Critic {
 public:
  Critic(CriticConfig config, std::uint64_t seed);

  const CriticConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // x: (B*N) x 3.
  CriticOutput forward(const Var& x, std::size_t points_per_cloud) const;

 private:
  CriticConfig config_;
  ParamStore store_;
  std::vector<Linear> conv_, dense_;
};

class ReconHead {
 public:
  ReconHead(ReconConfig config, std::size_t in_features, std::uint64_t seed);

  const ReconConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // last_conv: (B*R*P) x F -> (B*R) x z_dim, one row per root block.
  Var forward(const Var& last_conv, std::size_t points_per_root) const;

 private:
  ReconConfig config_;
  ParamStore store_;
  std::vector<Linear> layers_;
};

class HullNet {
 public:
  HullNet(HullNetConfig config, std::uint64_t seed);

  const HullNetConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // x: (B*N) x 3 -> B x 1.
  Var forward(const Var& x, std::size_t points_per_cloud) const;
  double predict(const Tensor& cloud) const;

 private:
  HullNetConfig config_;
  ParamStore store_;
  std::vector<Linear> conv_, dense_;
};

// Stacks bundles row-wise into a (B*R) x z_dim tensor.
Tensor stack_latents(const std::vector<LatentBundle>& bundles);

}  // namespace mrgan
