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

#include "mrgan/model.hpp"

#include <numeric>
#include <stdexcept>

namespace mrgan {

namespace {

Tensor gaussian(Rng& rng, std::size_t r, std::size_t c, double stddev) {
  Tensor t({r, c});
  for (double& v : t.storage()) v = stddev * normal(rng);
  return t;
}

constexpr double kWeightStd = 0.02;
constexpr double kRootStd = 0.1;

std::vector<std::size_t> group_index(std::size_t rows, std::size_t group) {
  std::vector<std::size_t> idx(rows);
  for (std::size_t i = 0; i < rows; ++i) idx[i] = i / group;
  return idx;
}

void require_positive(const std::vector<std::size_t>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + " must not be empty");
  for (std::size_t x : v) {
    if (x == 0) throw std::invalid_argument(std::string(what) + " entries must be positive");
  }
}

}  // namespace

const char* to_string(MixStrategy s) {
  switch (s) {
    case MixStrategy::kUniform: return "uniform";
    case MixStrategy::kHalf: return "half";
    case MixStrategy::kSingle: return "single";
    case MixStrategy::kIndependent: return "independent";
  }
  return "unknown";
}

Tensor PartitionedCloud::block(std::size_t root) const {
  if (root >= roots()) throw std::out_of_range("root index out of range");
  Tensor out({points_per_root, 3});
  const auto src = points.data().subspan(root * points_per_root * 3, points_per_root * 3);
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

std::vector<int> PartitionedCloud::labels() const {
  std::vector<int> out(points.rows());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = static_cast<int>(root_of_point(p));
  return out;
}

GeneratorConfig GeneratorConfig::full(std::size_t roots) {
  GeneratorConfig c;
  c.roots = roots;
  return c;
}

GeneratorConfig GeneratorConfig::smoke(std::size_t roots) {
  GeneratorConfig c;
  c.roots = roots;
  c.root_dim = 32;
  c.branching = {2, 2, 4};
  c.features = {32, 32, 3};
  c.share_dim = 8;
  return c;
}

GeneratorConfig GeneratorConfig::tiny(std::size_t roots) {
  GeneratorConfig c;
  c.roots = roots;
  c.root_dim = 8;
  c.branching = {2, 2};
  c.features = {8, 3};
  c.share_dim = 4;
  return c;
}

std::size_t GeneratorConfig::points_per_root() const {
  return std::accumulate(branching.begin(), branching.end(), std::size_t{1},
                         std::multiplies<>());
}

void GeneratorConfig::validate() const {
  if (roots == 0) throw std::invalid_argument("generator needs at least one root");
  if (root_dim == 0 || z_dim == 0 || share_dim == 0) {
    throw std::invalid_argument("generator widths must be positive");
  }
  require_positive(branching, "branching");
  require_positive(features, "features");
  if (features.size() != branching.size()) {
    throw std::invalid_argument("features and branching must have the same length");
  }
  if (features.back() != 3) throw std::invalid_argument("last tree layer must output 3 features");
  if (share_after_layer == 0 || share_after_layer > branching.size()) {
    throw std::invalid_argument("share_after_layer out of range");
  }
}

void CriticConfig::validate() const {
  require_positive(conv, "critic conv widths");
  require_positive(dense, "critic dense widths");
  if (dense.back() != 1) throw std::invalid_argument("critic must end in one output");
}

void HullNetConfig::validate() const {
  require_positive(conv, "hullnet conv widths");
  require_positive(dense, "hullnet dense widths");
  if (dense.back() != 1) throw std::invalid_argument("hullnet must end in one output");
}

Linear make_linear(ParamStore& store, const std::string& prefix, std::size_t in,
                   std::size_t out, Rng& rng) {
  return {store.add(prefix + "/w", gaussian(rng, in, out, kWeightStd)),
          store.add(prefix + "/b", Tensor({1, out}, 0.0))};
}

Var adain(const Var& x, const Var& scale, const Var& bias) {
  if (scale.shape() != x.shape() || bias.shape() != x.shape()) {
    throw DimensionError("adain: style " + shape_str(scale.shape()) + "/" +
                         shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  const std::size_t c = x.cols();
  const double inv = 1.0 / static_cast<double>(c);
  Var mean = mrgan::scale(sum_cols(x), inv);
  Var centered = sub(x, broadcast_cols(mean, c));
  Var var = mrgan::scale(sum_cols(square(centered)), inv);
  Var stddev = clamp_min(mrgan::sqrt(var), kAdainStdFloor);
  Var normed = div(centered, broadcast_cols(stddev, c));
  return add(mul(scale, normed), bias);
}

std::vector<std::size_t> TreeNodeSet::ancestry(std::size_t i) const {
  const std::size_t p = current().rows();
  if (i >= p) throw std::out_of_range("tree node index out of range");
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d + 1 < levels.size(); ++d) out.push_back(i / (p / levels[d].rows()));
  return out;
}

TreeNodeSet treegcn_forward(const TreeNodeSet& nodes, const TreeLayerParams& params,
                            std::size_t degree) {
  const Var& v = nodes.current();
  const std::size_t p = v.rows();
  if (params.w_anc.size() != nodes.depth()) {
    throw DimensionError("treegcn: " + std::to_string(params.w_anc.size()) +
                         " ancestor weights for depth " + std::to_string(nodes.depth()));
  }
  if (degree == 0) throw std::invalid_argument("treegcn: branch degree must be positive");
  Var h = matmul(v, params.w_loop);
  const std::size_t fout = h.cols();
  for (std::size_t d = 0; d < nodes.depth(); ++d) {
    const Var& a = nodes.levels[d];
    if (a.rows() == 0 || p % a.rows() != 0) {
      throw DimensionError("treegcn: level " + std::to_string(d) + " has " +
                           std::to_string(a.rows()) + " rows, not a divisor of " +
                           std::to_string(p));
    }
    h = add(h, index_rows(matmul(a, params.w_anc[d]), group_index(p, p / a.rows())));
  }
  h = add(h, broadcast_rows(params.bias, p));
  if (params.branch.rows() != fout || params.branch.cols() != degree * fout) {
    throw DimensionError("treegcn: branch matrix " + shape_str(params.branch.shape()) +
                         " does not match " + std::to_string(fout) + " features x degree " +
                         std::to_string(degree));
  }
  TreeNodeSet out = nodes;
  out.levels.push_back(reshape(matmul(h, params.branch), p * degree, fout));
  out.branching.push_back(degree);
  return out;
}

Var feature_share(const Var& features, std::size_t group_rows, const FeatureShareParams& params) {
  const std::size_t p = features.rows();
  Var pooled = pool(features, PoolMode::kMax, group_rows);
  Var summary = params.dense(pooled);
  Var spread = index_rows(summary, group_index(p, group_rows));
  return leaky_relu(params.conv(concat_cols(features, spread)));
}

Generator::Generator(GeneratorConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const auto& c = config_;
  map0_ = make_linear(store_, "gen/map0", c.z_dim, c.root_dim, rng);
  map1_ = make_linear(store_, "gen/map1", c.root_dim, 2 * c.root_dim, rng);
  roots_ = store_.add("gen/roots", gaussian(rng, c.roots, c.root_dim, kRootStd));
  std::vector<std::size_t> widths{c.root_dim};
  for (std::size_t l = 0; l < c.branching.size(); ++l) {
    const std::string pre = "gen/tree" + std::to_string(l);
    const std::size_t fin = widths.back();
    const std::size_t fout = c.features[l];
    Layer layer;
    layer.w_loop = store_.add(pre + "/W_loop", gaussian(rng, fin, fout, kWeightStd));
    for (std::size_t d = 0; d < l; ++d) {
      layer.w_anc.push_back(store_.add(pre + "/W_anc" + std::to_string(d),
                                       gaussian(rng, widths[d], fout, kWeightStd)));
    }
    layer.bias = store_.add(pre + "/b", Tensor({1, fout}, 0.0));
    layer.branch = store_.add(pre + "/branch",
                              gaussian(rng, fout, c.branching[l] * fout, kWeightStd));
    layers_.push_back(std::move(layer));
    widths.push_back(fout);
    if (l + 1 == c.share_after_layer) {
      share_.dense = make_linear(store_, "gen/share/dense", fout, c.share_dim, rng);
      share_.conv = make_linear(store_, "gen/share/conv", fout + c.share_dim, fout, rng);
    }
  }
}

Style Generator::mapping_forward(const Var& z) const {
  if (z.cols() != config_.z_dim) {
    throw DimensionError("mapping: latent " + shape_str(z.shape()) + " expected width " +
                         std::to_string(config_.z_dim));
  }
  Var raw = map1_(leaky_relu(map0_(z)));
  const std::size_t d = config_.root_dim;
  return {add_scalar(slice_cols(raw, 0, d), 1.0), slice_cols(raw, d, 2 * d)};
}

Var Generator::forward(const Var& z) const {
  const auto& c = config_;
  const std::size_t n = z.rows();
  if (n == 0 || n % c.roots != 0) {
    throw DimensionError("generator: " + std::to_string(n) + " latent rows for " +
                         std::to_string(c.roots) + " roots");
  }
  Style style = mapping_forward(z);
  std::vector<std::size_t> root_idx(n);
  for (std::size_t i = 0; i < n; ++i) root_idx[i] = i % c.roots;
  Var x0 = adain(index_rows(roots_.var(), std::move(root_idx)), style.scale, style.bias);

  TreeNodeSet nodes{{x0}, {}};
  std::size_t per_root = 1;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    TreeLayerParams tp{layer.w_loop.var(), {}, layer.bias.var(), layer.branch.var()};
    for (const auto& w : layer.w_anc) tp.w_anc.push_back(w.var());
    nodes = treegcn_forward(nodes, tp, c.branching[l]);
    per_root *= c.branching[l];
    if (l + 1 == c.share_after_layer && !c.share_identity) {
      nodes.levels.back() = feature_share(nodes.current(), c.roots * per_root, share_);
    }
  }
  return leaky_relu(nodes.current());
}

PartitionedCloud Generator::generate(const LatentBundle& bundle) const {
  return generate(std::vector<LatentBundle>{bundle}).front();
}

std::vector<PartitionedCloud> Generator::generate(const std::vector<LatentBundle>& bundles) const {
  NoGradGuard guard;
  for (const auto& b : bundles) {
    if (b.roots() != config_.roots) {
      throw DimensionError("bundle has " + std::to_string(b.roots()) + " roots, generator has " +
                           std::to_string(config_.roots));
    }
  }
  const Tensor all = forward(Var::constant(stack_latents(bundles))).value();
  const std::size_t ppr = config_.points_per_root();
  const std::size_t per = config_.num_points() * 3;
  std::vector<PartitionedCloud> out;
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    const auto src = all.data().subspan(b * per, per);
    out.push_back({Tensor({config_.num_points(), 3}, std::vector<double>(src.begin(), src.end())),
                   ppr});
  }
  return out;
}

Critic::Critic(CriticConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  std::size_t in = 3;
  for (std::size_t i = 0; i < config_.conv.size(); ++i) {
    conv_.push_back(make_linear(store_, "disc/conv" + std::to_string(i), in, config_.conv[i], rng));
    in = config_.conv[i];
  }
  for (std::size_t i = 0; i < config_.dense.size(); ++i) {
    dense_.push_back(
        make_linear(store_, "disc/dense" + std::to_string(i), in, config_.dense[i], rng));
    in = config_.dense[i];
  }
}

CriticOutput Critic::forward(const Var& x, std::size_t points_per_cloud) const {
  Var h = x;
  for (const auto& l : conv_) h = leaky_relu(l(h));
  Var last = h;
  h = pool(h, PoolMode::kMax, points_per_cloud);
  for (const auto& l : dense_) h = l(h);
  return {h, last};
}

ReconHead::ReconHead(ReconConfig config, std::size_t in_features, std::uint64_t seed)
    : config_(std::move(config)) {
  Rng rng(seed);
  std::size_t in = in_features;
  std::vector<std::size_t> widths = config_.hidden;
  widths.push_back(config_.z_dim);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers_.push_back(make_linear(store_, "recon/conv" + std::to_string(i), in, widths[i], rng));
    in = widths[i];
  }
}

Var ReconHead::forward(const Var& last_conv, std::size_t points_per_root) const {
  if (points_per_root == 0 || last_conv.rows() % points_per_root != 0) {
    throw DimensionError("recon head: " + std::to_string(last_conv.rows()) +
                         " points are not a multiple of " + std::to_string(points_per_root));
  }
  Var h = pool(last_conv, PoolMode::kMax, points_per_root);
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = leaky_relu(layers_[i](h));
  return mrgan::tanh(layers_.back()(h));
}

HullNet::HullNet(HullNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  std::size_t in = 3;
  for (std::size_t i = 0; i < config_.conv.size(); ++i) {
    conv_.push_back(make_linear(store_, "hull/conv" + std::to_string(i), in, config_.conv[i], rng));
    in = config_.conv[i];
  }
  in *= 2;
  for (std::size_t i = 0; i < config_.dense.size(); ++i) {
    dense_.push_back(
        make_linear(store_, "hull/dense" + std::to_string(i), in, config_.dense[i], rng));
    in = config_.dense[i];
  }
}

Var HullNet::forward(const Var& x, std::size_t points_per_cloud) const {
  Var h = x;
  for (const auto& l : conv_) h = leaky_relu(l(h));
  h = concat_cols(pool(h, PoolMode::kMin, points_per_cloud), pool(h, PoolMode::kMax, points_per_cloud));
  for (const auto& l : dense_) h = leaky_relu(l(h));
  return h;
}

double HullNet::predict(const Tensor& cloud) const {
  NoGradGuard guard;
  return forward(Var::constant(cloud), cloud.rows()).item();
}

Tensor stack_latents(const std::vector<LatentBundle>& bundles) {
  if (bundles.empty()) throw std::invalid_argument("no latent bundles");
  const std::size_t r = bundles.front().z.rows();
  const std::size_t d = bundles.front().z.cols();
  Tensor out({bundles.size() * r, d});
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    if (bundles[b].z.shape() != bundles.front().z.shape()) {
      throw DimensionError("latent bundles differ in shape");
    }
    std::copy(bundles[b].z.data().begin(), bundles[b].z.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(b * r * d));
  }
  return out;
}

}  // namespace mrgan
