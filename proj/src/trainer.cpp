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

#include "mrgan/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace mrgan {

// ---------------------------------------------------------------------------
// Config text.

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

struct Entry {
  std::string key;
  std::string value;
  std::size_t line;
};

std::vector<Entry> split_entries(const std::string& text) {
  std::vector<Entry> out;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    }
    Entry e{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)),
            no};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(no) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("bad value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean '" + v + "' for " + key);
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_num<std::size_t>(key, trim(tok)));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

const char* fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename Config>
using Setter = std::function<void(Config&, const std::string& key, const std::string& value)>;

template <typename Config>
Config apply_entries(Config base, const std::vector<Entry>& entries,
                     const std::map<std::string, Setter<Config>>& table) {
  for (const auto& e : entries) {
    auto it = table.find(e.key);
    if (it == table.end()) {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
    try {
      it->second(base, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  return base;
}

bool wants_desk(const std::vector<Entry>& entries) {
  bool desk = false;
  for (const auto& e : entries) {
    if (e.key == "desk_scale") desk = parse_bool(e.key, e.value);
  }
  return desk;
}

#define MRGAN_NUM(T, field) [](auto& c, const std::string& k, const std::string& v) { field = parse_num<T>(k, v); }
#define MRGAN_BOOL(field) [](auto& c, const std::string& k, const std::string& v) { field = parse_bool(k, v); }
#define MRGAN_LIST(field) [](auto& c, const std::string& k, const std::string& v) { field = parse_list(k, v); }
#define MRGAN_STR(field) [](auto& c, const std::string&, const std::string& v) { field = v; }

const std::map<std::string, Setter<TrainConfig>>& train_keys() {
  static const std::map<std::string, Setter<TrainConfig>> table = {
      {"roots", MRGAN_NUM(std::size_t, c.gen.roots)},
      {"root_dim", MRGAN_NUM(std::size_t, c.gen.root_dim)},
      {"branching", MRGAN_LIST(c.gen.branching)},
      {"features", MRGAN_LIST(c.gen.features)},
      {"share_after_layer", MRGAN_NUM(std::size_t, c.gen.share_after_layer)},
      {"share_dim", MRGAN_NUM(std::size_t, c.gen.share_dim)},
      {"share_identity", MRGAN_BOOL(c.gen.share_identity)},
      {"critic_conv", MRGAN_LIST(c.critic.conv)},
      {"critic_dense", MRGAN_LIST(c.critic.dense)},
      {"recon_hidden", MRGAN_LIST(c.recon.hidden)},
      {"hull_conv", MRGAN_LIST(c.hull.conv)},
      {"hull_dense", MRGAN_LIST(c.hull.dense)},
      {"epochs", MRGAN_NUM(std::size_t, c.epochs)},
      {"steps", MRGAN_NUM(std::size_t, c.steps)},
      {"batch_size", MRGAN_NUM(std::size_t, c.batch_size)},
      {"d_steps_per_g", MRGAN_NUM(std::size_t, c.d_steps_per_g)},
      {"g_lr", MRGAN_NUM(double, c.g_adam.lr)},
      {"g_beta1", MRGAN_NUM(double, c.g_adam.beta1)},
      {"g_beta2", MRGAN_NUM(double, c.g_adam.beta2)},
      {"d_lr", MRGAN_NUM(double, c.d_adam.lr)},
      {"d_beta1", MRGAN_NUM(double, c.d_adam.beta1)},
      {"d_beta2", MRGAN_NUM(double, c.d_adam.beta2)},
      {"adam_eps",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.g_adam.eps = c.d_adam.eps = parse_num<double>(k, v);
       }},
      {"lambda_h", MRGAN_NUM(double, c.weights.h)},
      {"lambda_rd", MRGAN_NUM(double, c.weights.rd)},
      {"lambda_t", MRGAN_NUM(double, c.weights.t)},
      {"lambda_rec", MRGAN_NUM(double, c.weights.rec)},
      {"lambda_gp", MRGAN_NUM(double, c.weights.gp)},
      {"use_h", MRGAN_BOOL(c.weights.use_h)},
      {"use_rd", MRGAN_BOOL(c.weights.use_rd)},
      {"use_t", MRGAN_BOOL(c.weights.use_t)},
      {"use_rec", MRGAN_BOOL(c.weights.use_rec)},
      {"triplets", MRGAN_NUM(std::size_t, c.triplets)},
      {"triplet_margin", MRGAN_NUM(double, c.triplet_margin)},
      {"seed", MRGAN_NUM(std::uint64_t, c.seed)},
      {"dataset", MRGAN_STR(c.dataset)},
      {"synthetic_clouds", MRGAN_NUM(std::size_t, c.synthetic_clouds)},
      {"desk_scale", MRGAN_BOOL(c.desk_scale)},
      {"checkpoint_every", MRGAN_NUM(std::size_t, c.checkpoint_every)},
      {"out_dir", MRGAN_STR(c.out_dir)},
      {"hullnet", MRGAN_STR(c.hullnet)},
  };
  return table;
}

const char* source_name(HullSourceKind k) {
  switch (k) {
    case HullSourceKind::kSynthetic: return "synthetic";
    case HullSourceKind::kDirectory: return "directory";
    case HullSourceKind::kMixed: return "mixed";
  }
  return "synthetic";
}

const std::map<std::string, Setter<HullTrainConfig>>& hull_keys() {
  static const std::map<std::string, Setter<HullTrainConfig>> table = {
      {"batches", MRGAN_NUM(std::size_t, c.batches)},
      {"batch_size", MRGAN_NUM(std::size_t, c.batch_size)},
      {"points", MRGAN_NUM(std::size_t, c.points)},
      {"lr", MRGAN_NUM(double, c.adam.lr)},
      {"beta1", MRGAN_NUM(double, c.adam.beta1)},
      {"beta2", MRGAN_NUM(double, c.adam.beta2)},
      {"adam_eps", MRGAN_NUM(double, c.adam.eps)},
      {"source",
       [](HullTrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "synthetic") c.source.kind = HullSourceKind::kSynthetic;
         else if (v == "directory") c.source.kind = HullSourceKind::kDirectory;
         else if (v == "mixed") c.source.kind = HullSourceKind::kMixed;
         else throw ConfigError("bad value '" + v + "' for " + k);
       }},
      {"source_dir",
       [](HullTrainConfig& c, const std::string&, const std::string& v) { c.source.dir = v; }},
      {"hull_conv", MRGAN_LIST(c.net.conv)},
      {"hull_dense", MRGAN_LIST(c.net.dense)},
      {"seed", MRGAN_NUM(std::uint64_t, c.seed)},
      {"eval_count", MRGAN_NUM(std::size_t, c.eval_count)},
      {"log_every", MRGAN_NUM(std::size_t, c.log_every)},
      {"desk_scale", MRGAN_BOOL(c.desk_scale)},
  };
  return table;
}

#undef MRGAN_NUM
#undef MRGAN_BOOL
#undef MRGAN_LIST
#undef MRGAN_STR

}  // namespace

TrainConfig TrainConfig::full(std::size_t roots) {
  TrainConfig c;
  c.gen = GeneratorConfig::full(roots);
  return c;
}

TrainConfig TrainConfig::desk(std::size_t roots) {
  TrainConfig c;
  c.gen = GeneratorConfig::smoke(roots);
  c.critic = CriticConfig::desk();
  c.recon = ReconConfig::desk();
  c.hull = HullNetConfig::desk();
  c.epochs = 20;
  c.desk_scale = true;
  return c;
}

TrainConfig TrainConfig::smoke() {
  TrainConfig c = desk(2);
  c.dataset = kTwoSphereDataset;
  c.synthetic_clouds = 16;
  c.steps = 200;
  return c;
}

TrainConfig TrainConfig::tiny() {
  TrainConfig c;
  c.gen = GeneratorConfig::tiny(2);
  c.critic = CriticConfig::tiny();
  c.recon = ReconConfig::tiny();
  c.hull = HullNetConfig::tiny();
  c.batch_size = 4;
  c.d_steps_per_g = 2;
  c.steps = 6;
  c.triplets = 16;
  c.dataset = kTwoSphereDataset;
  c.synthetic_clouds = 8;
  return c;
}

void TrainConfig::validate() const {
  gen.validate();
  critic.validate();
  hull.validate();
  if (recon.z_dim != gen.z_dim) throw ConfigError("recon head and generator latent sizes differ");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (d_steps_per_g < 1) throw ConfigError("d_steps_per_g must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (weights.use_t && gen.roots >= 2 && triplets < 1) {
    throw ConfigError("triplets must be at least 1 when the triplet loss is on");
  }
  if (dataset.empty()) throw ConfigError("dataset is not set");
}

std::size_t TrainConfig::total_steps(std::size_t dataset_size) const {
  if (steps > 0) return steps;
  const std::size_t per_g = batch_size * d_steps_per_g;
  return epochs * std::max<std::size_t>(1, (dataset_size + per_g - 1) / per_g);
}

TrainConfig parse_train_config(const std::string& text) {
  const auto entries = split_entries(text);
  TrainConfig base = wants_desk(entries) ? TrainConfig::desk() : TrainConfig::full();
  return apply_entries(base, entries, train_keys());
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_train_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream o;
  o << "desk_scale = " << fmt_bool(c.desk_scale) << '\n'
    << "roots = " << c.gen.roots << '\n'
    << "root_dim = " << c.gen.root_dim << '\n'
    << "branching = " << fmt_list(c.gen.branching) << '\n'
    << "features = " << fmt_list(c.gen.features) << '\n'
    << "share_after_layer = " << c.gen.share_after_layer << '\n'
    << "share_dim = " << c.gen.share_dim << '\n'
    << "share_identity = " << fmt_bool(c.gen.share_identity) << '\n'
    << "critic_conv = " << fmt_list(c.critic.conv) << '\n'
    << "critic_dense = " << fmt_list(c.critic.dense) << '\n'
    << "recon_hidden = " << fmt_list(c.recon.hidden) << '\n'
    << "hull_conv = " << fmt_list(c.hull.conv) << '\n'
    << "hull_dense = " << fmt_list(c.hull.dense) << '\n'
    << "epochs = " << c.epochs << '\n'
    << "steps = " << c.steps << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "d_steps_per_g = " << c.d_steps_per_g << '\n'
    << "g_lr = " << fmt_double(c.g_adam.lr) << '\n'
    << "g_beta1 = " << fmt_double(c.g_adam.beta1) << '\n'
    << "g_beta2 = " << fmt_double(c.g_adam.beta2) << '\n'
    << "d_lr = " << fmt_double(c.d_adam.lr) << '\n'
    << "d_beta1 = " << fmt_double(c.d_adam.beta1) << '\n'
    << "d_beta2 = " << fmt_double(c.d_adam.beta2) << '\n'
    << "adam_eps = " << fmt_double(c.g_adam.eps) << '\n'
    << "lambda_h = " << fmt_double(c.weights.h) << '\n'
    << "lambda_rd = " << fmt_double(c.weights.rd) << '\n'
    << "lambda_t = " << fmt_double(c.weights.t) << '\n'
    << "lambda_rec = " << fmt_double(c.weights.rec) << '\n'
    << "lambda_gp = " << fmt_double(c.weights.gp) << '\n'
    << "use_h = " << fmt_bool(c.weights.use_h) << '\n'
    << "use_rd = " << fmt_bool(c.weights.use_rd) << '\n'
    << "use_t = " << fmt_bool(c.weights.use_t) << '\n'
    << "use_rec = " << fmt_bool(c.weights.use_rec) << '\n'
    << "triplets = " << c.triplets << '\n'
    << "triplet_margin = " << fmt_double(c.triplet_margin) << '\n'
    << "seed = " << c.seed << '\n'
    << "dataset = " << c.dataset << '\n'
    << "synthetic_clouds = " << c.synthetic_clouds << '\n'
    << "checkpoint_every = " << c.checkpoint_every << '\n'
    << "out_dir = " << c.out_dir << '\n'
    << "hullnet = " << c.hullnet << '\n';
  return o.str();
}

HullTrainConfig HullTrainConfig::desk() {
  HullTrainConfig c;
  c.batches = 2000;
  c.net = HullNetConfig::desk();
  c.desk_scale = true;
  return c;
}

void HullTrainConfig::validate() const {
  net.validate();
  if (batch_size < 1 || points < 4 || eval_count < 2 || log_every < 1) {
    throw ConfigError("hull training counts must be positive (at least 4 points, 2 eval clouds)");
  }
  if (source.kind != HullSourceKind::kSynthetic && source.dir.empty()) {
    throw ConfigError("source_dir is required for directory and mixed sources");
  }
}

HullTrainConfig parse_hull_config(const std::string& text) {
  const auto entries = split_entries(text);
  HullTrainConfig base = wants_desk(entries) ? HullTrainConfig::desk() : HullTrainConfig::full();
  return apply_entries(base, entries, hull_keys());
}

std::string to_config_text(const HullTrainConfig& c) {
  std::ostringstream o;
  o << "desk_scale = " << fmt_bool(c.desk_scale) << '\n'
    << "batches = " << c.batches << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "points = " << c.points << '\n'
    << "lr = " << fmt_double(c.adam.lr) << '\n'
    << "beta1 = " << fmt_double(c.adam.beta1) << '\n'
    << "beta2 = " << fmt_double(c.adam.beta2) << '\n'
    << "adam_eps = " << fmt_double(c.adam.eps) << '\n'
    << "source = " << source_name(c.source.kind) << '\n'
    << "source_dir = " << c.source.dir.string() << '\n'
    << "hull_conv = " << fmt_list(c.net.conv) << '\n'
    << "hull_dense = " << fmt_list(c.net.dense) << '\n'
    << "seed = " << c.seed << '\n'
    << "eval_count = " << c.eval_count << '\n'
    << "log_every = " << c.log_every << '\n';
  return o.str();
}

std::string apply_overrides(const std::string& text, const std::vector<std::string>& overrides) {
  std::string out = text;
  if (!out.empty() && out.back() != '\n') out += '\n';
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || trim(o.substr(0, eq)).empty()) {
      throw ConfigError("override '" + o + "' is not key=value");
    }
    out += trim(o.substr(0, eq)) + " = " + trim(o.substr(eq + 1)) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics log.

void MetricsLog::add(std::uint64_t step, std::string name, double value) {
  rows_.push_back({step, std::move(name), value});
}

std::size_t MetricsLog::count(const std::string& name) const {
  return static_cast<std::size_t>(
      std::count_if(rows_.begin(), rows_.end(), [&](const MetricRow& r) { return r.name == name; }));
}

std::vector<double> MetricsLog::values(const std::string& name) const {
  std::vector<double> out;
  for (const auto& r : rows_) {
    if (r.name == name) out.push_back(r.value);
  }
  return out;
}

std::string MetricsLog::csv() const {
  std::string s = "step,loss_name,value\n";
  for (const auto& r : rows_) {
    s += std::to_string(r.step) + ',' + r.name + ',' + fmt_double(r.value) + '\n';
  }
  return s;
}

void MetricsLog::write_csv(const fs::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << csv();
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Latent sampling and data.

LatentBundle sample_mixing(std::size_t roots, Rng& rng, std::size_t z_dim) {
  const auto s = static_cast<MixStrategy>(uniform_index(rng, 4));
  return sample_mixing(roots, s, rng, z_dim);
}

LatentBundle sample_mixing(std::size_t roots, MixStrategy strategy, Rng& rng, std::size_t z_dim) {
  if (roots == 0) throw std::invalid_argument("sample_mixing: need at least one root");
  const std::size_t codes = strategy == MixStrategy::kUniform       ? 1
                            : strategy == MixStrategy::kIndependent ? roots
                                                                    : 2;
  Tensor z({codes, z_dim});
  for (double& v : z.storage()) v = normal(rng);

  // source[r] is the code row used by root r.
  std::vector<std::size_t> source(roots, 0);
  switch (strategy) {
    case MixStrategy::kUniform:
      break;
    case MixStrategy::kIndependent:
      std::iota(source.begin(), source.end(), 0);
      break;
    case MixStrategy::kHalf: {
      std::vector<std::size_t> order(roots);
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = roots; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
      for (std::size_t i = (roots + 1) / 2; i < roots; ++i) source[order[i]] = 1;
      break;
    }
    case MixStrategy::kSingle:
      source[uniform_index(rng, roots)] = 1;
      break;
  }
  LatentBundle b{Tensor({roots, z_dim}), strategy};
  for (std::size_t r = 0; r < roots; ++r) {
    std::copy_n(z.row(source[r]).begin(), z_dim, b.z.row(r).begin());
  }
  return b;
}

Dataset two_sphere_dataset(std::size_t count, std::size_t n_points, std::uint64_t seed) {
  Dataset ds;
  ds.class_name = "two-spheres";
  ds.n_points = n_points;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    const double gap = uniform(rng, 0.4, 0.7);
    SyntheticSpec spec;
    spec.points_per_cloud = n_points;
    spec.primitives.push_back(
        Sphere{{-gap, uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)}, uniform(rng, 0.25, 0.5)});
    spec.primitives.push_back(
        Sphere{{gap, uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)}, uniform(rng, 0.25, 0.5)});
    ds.clouds.push_back(normalize_unit_sphere(sample_synthetic(spec, rng())));
  }
  return ds;
}

Dataset load_training_data(const TrainConfig& config) {
  const std::size_t n = config.gen.num_points();
  if (config.dataset == kTwoSphereDataset) {
    return two_sphere_dataset(config.synthetic_clouds, n, derive_seed(config.seed, 101));
  }
  return ingest_dataset(config.dataset, n, derive_seed(config.seed, 102));
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("pearson: size mismatch");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Hull net pretraining.

namespace {

Tensor stack_clouds(const std::vector<const Tensor*>& clouds) {
  const std::size_t n = clouds.front()->rows();
  Tensor out({clouds.size() * n, 3});
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    if (clouds[i]->rows() != n) throw DimensionError("clouds in a batch differ in size");
    std::copy(clouds[i]->data().begin(), clouds[i]->data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(i * n * 3));
  }
  return out;
}

std::vector<Parameter> collect(std::initializer_list<ParamStore*> stores) {
  std::vector<Parameter> out;
  for (ParamStore* s : stores) {
    for (const auto& p : s->params()) out.push_back(p);
  }
  return out;
}

constexpr std::uint64_t kHeldOutStream = 0x4845'4C44;

}  // namespace

double evaluate_hullnet(const HullNet& net, const std::vector<HullSample>& samples) {
  std::vector<double> pred, label;
  for (const auto& s : samples) {
    pred.push_back(net.predict(s.cloud.points));
    label.push_back(s.label);
  }
  return pearson(pred, label);
}

HullNet load_hullnet(const Checkpoint& ckpt) {
  const HullTrainConfig config = parse_hull_config(ckpt.config);
  HullNet net(config.net, 0);
  restore_params(ckpt, net.params());
  return net;
}

HullTrainResult train_hullnet(const HullTrainConfig& config) {
  config.validate();
  HullTrainResult res{HullNet(config.net, derive_seed(config.seed, 1)), {}, 0.0, {}};
  HullNet& net = res.net;
  AdamState opt{config.adam, 0, {}};
  HullSampler sampler(config.points, config.source);
  const std::uint64_t data_seed = derive_seed(config.seed, 2);

  for (std::size_t b = 0; b < config.batches; ++b) {
    std::vector<HullSample> batch;
    batch.reserve(config.batch_size);
    for (std::size_t i = 0; i < config.batch_size; ++i) {
      batch.push_back(sampler.sample(data_seed, b * config.batch_size + i));
    }
    std::vector<const Tensor*> clouds;
    Tensor labels({config.batch_size, 1});
    for (std::size_t i = 0; i < batch.size(); ++i) {
      clouds.push_back(&batch[i].cloud.points);
      labels[i] = batch[i].label;
    }
    net.params().zero_grad();
    Var pred = net.forward(Var::constant(stack_clouds(clouds)), config.points);
    Var loss = mean_all(square(sub(pred, Var::constant(labels))));
    const double value = loss.value().item();
    if (!std::isfinite(value)) {
      throw NumericError("hull net loss is not finite at batch " + std::to_string(b));
    }
    backward(loss);
    adam_step(net.params().params(), opt);
    if ((b + 1) % config.log_every == 0 || b + 1 == config.batches) res.log.add(b + 1, "hull_l2", value);
    if ((b + 1) % 100 == 0) spdlog::info("hullnet batch {}/{} l2 {:.6g}", b + 1, config.batches, value);
  }

  const auto heldout = make_hull_dataset(config.eval_count, config.points,
                                         derive_seed(config.seed, kHeldOutStream), config.source);
  res.heldout_pearson = evaluate_hullnet(net, heldout);
  res.log.add(config.batches, "heldout_pearson", res.heldout_pearson);

  res.checkpoint.config = to_config_text(config);
  store_params(res.checkpoint, net.params());
  store_adam(res.checkpoint, "hull", opt);
  res.checkpoint.step = config.batches;
  return res;
}

// ---------------------------------------------------------------------------
// GAN training.

namespace {

HullNet make_hull(const TrainConfig& config, std::optional<HullNet> given) {
  if (given) return std::move(*given);
  if (!config.hullnet.empty()) {
    if (fs::exists(config.hullnet)) return load_hullnet(load_checkpoint(config.hullnet));
    spdlog::warn("hull net checkpoint {} not found; the convexity loss uses a random network",
                 config.hullnet);
  } else if (config.weights.use_h) {
    spdlog::warn("no hull net checkpoint given; the convexity loss uses a random network");
  }
  return HullNet(config.hull, derive_seed(config.seed, 4));
}

TrainConfig checked(TrainConfig c) {
  c.validate();
  return c;
}

Dataset fit_data(Dataset data, std::size_t n_points, std::uint64_t seed) {
  if (data.clouds.empty()) throw std::invalid_argument("training data has no clouds");
  for (std::size_t i = 0; i < data.clouds.size(); ++i) {
    if (data.clouds[i].size() != n_points) {
      data.clouds[i] = subsample(data.clouds[i], n_points, derive_seed(seed, i));
    }
  }
  data.n_points = n_points;
  return data;
}

CloudScorer scorer(const Critic& critic) {
  return [&critic](const Var& x, std::size_t n) { return critic.forward(x, n).score; };
}

CloudScorer scorer(const HullNet& net) {
  return [&net](const Var& x, std::size_t n) { return net.forward(x, n); };
}

}  // namespace

GanTrainer::GanTrainer(TrainConfig config, Dataset data, std::optional<HullNet> hull)
    : config_(checked(std::move(config))),
      data_(fit_data(std::move(data), config_.gen.num_points(), derive_seed(config_.seed, 103))),
      gen_(config_.gen, derive_seed(config_.seed, 1)),
      critic_(config_.critic, derive_seed(config_.seed, 2)),
      recon_(config_.recon, config_.critic.conv.back(), derive_seed(config_.seed, 3)),
      hull_(make_hull(config_, std::move(hull))),
      g_opt_{config_.g_adam, 0, {}},
      d_opt_{config_.d_adam, 0, {}},
      rng_(derive_seed(config_.seed, 5)) {
  // The checkpointed config must describe the hull net actually in use.
  config_.hull = hull_.config();
  hull_.params().set_requires_grad(false);
}

GanTrainer::GanTrainer(const Checkpoint& ckpt, Dataset data)
    : GanTrainer(parse_train_config(ckpt.config), std::move(data),
                 HullNet(parse_train_config(ckpt.config).hull, 0)) {
  restore_params(ckpt, gen_.params());
  restore_params(ckpt, critic_.params());
  restore_params(ckpt, recon_.params());
  restore_params(ckpt, hull_.params());
  restore_adam(ckpt, "g", g_opt_);
  restore_adam(ckpt, "d", d_opt_);
  restore_rng_state(rng_, ckpt.rng_state);
  step_ = ckpt.step;
}

Checkpoint GanTrainer::checkpoint() const {
  Checkpoint ck;
  ck.config = to_config_text(config_);
  store_params(ck, gen_.params());
  store_params(ck, critic_.params());
  store_params(ck, recon_.params());
  store_params(ck, hull_.params());
  store_adam(ck, "g", g_opt_);
  store_adam(ck, "d", d_opt_);
  ck.rng_state = rng_state(rng_);
  ck.step = step_;
  return ck;
}

Tensor GanTrainer::real_batch() {
  std::vector<const Tensor*> clouds;
  for (std::size_t i = 0; i < config_.batch_size; ++i) {
    clouds.push_back(&data_.clouds[uniform_index(rng_, data_.clouds.size())].points);
  }
  return stack_clouds(clouds);
}

Tensor GanTrainer::latent_batch() {
  std::vector<LatentBundle> bundles;
  for (std::size_t i = 0; i < config_.batch_size; ++i) {
    bundles.push_back(sample_mixing(config_.gen.roots, rng_, config_.gen.z_dim));
  }
  return stack_latents(bundles);
}

void GanTrainer::check_finite(const std::vector<std::pair<std::string, double>>& terms) {
  bool ok = true;
  for (const auto& [name, v] : terms) ok = ok && std::isfinite(v);
  if (ok) return;
  std::string msg = "non-finite loss at step " + std::to_string(step_) + ":";
  for (const auto& [name, v] : terms) msg += " " + name + "=" + fmt_double(v);
  if (!config_.out_dir.empty()) {
    fs::create_directories(config_.out_dir);
    const fs::path dump = fs::path(config_.out_dir) / ("nan_dump_step" + std::to_string(step_) + ".txt");
    std::ofstream out(dump);
    out << msg << "\n\n# config\n" << to_config_text(config_) << "\n# log\n" << log_.csv();
    msg += " (dump: " + dump.string() + ")";
  }
  spdlog::error("{}", msg);
  throw NumericError(msg);
}

void GanTrainer::d_step() {
  const std::size_t n = config_.gen.num_points();
  const std::size_t ppr = config_.gen.points_per_root();
  const LossWeights& w = config_.weights;

  Tensor real = real_batch();
  Tensor z = latent_batch();
  Tensor fake;
  {
    NoGradGuard guard;
    fake = gen_.forward(Var::constant(z)).value();
  }
  gen_.params().set_requires_grad(false);
  critic_.params().set_requires_grad(true);
  recon_.params().set_requires_grad(w.use_rec);

  auto d_params = collect({&critic_.params(), &recon_.params()});
  for (auto& p : d_params) p.zero_grad();
  const Var fake_v = Var::constant(fake);
  CriticLoss cl = wgan_d_loss(scorer(critic_), Var::constant(real), fake_v, n, w.gp, rng_);
  Var total = cl.total;
  double rec_value = 0.0;
  if (w.use_rec) {
    Var rec = recon_loss(Var::constant(z), recon_.forward(critic_.forward(fake_v, n).last_conv, ppr));
    rec_value = rec.value().item();
    total = add(total, scale(rec, w.rec));
  }
  std::vector<std::pair<std::string, double>> terms = {
      {"d_loss", total.value().item()},
      {"d_wgan", cl.wasserstein.value().item()},
      {"d_gp", cl.penalty.value().item()}};
  if (w.use_rec) terms.emplace_back("d_rec", rec_value);
  check_finite(terms);
  backward(total);
  adam_step(d_params, d_opt_);
  for (const auto& [name, v] : terms) log_.add(step_, name, v);
}

void GanTrainer::g_step() {
  const std::size_t roots = config_.gen.roots;
  Tensor z = latent_batch();
  std::vector<Triplet> triplets;
  if (config_.weights.use_t && roots >= 2) {
    triplets = sample_triplets(config_.batch_size, roots, config_.gen.points_per_root(),
                               config_.triplets, rng_);
  }
  gen_.params().set_requires_grad(true);
  critic_.params().set_requires_grad(false);
  recon_.params().set_requires_grad(false);
  gen_.params().zero_grad();

  GeneratorObjective obj = generator_objective(gen_, critic_, recon_, hull_, z, triplets, config_);
  std::vector<std::pair<std::string, double>> terms = {{"g_loss", obj.total.value().item()}};
  const std::pair<const char*, const Var*> named[] = {{"g_wgan", &obj.parts.wgan},
                                                      {"g_h", &obj.parts.h},
                                                      {"g_rd", &obj.parts.rd},
                                                      {"g_t", &obj.parts.t},
                                                      {"g_rec", &obj.parts.rec}};
  for (const auto& [name, v] : named) {
    if (v->defined()) terms.emplace_back(name, v->value().item());
  }
  check_finite(terms);
  backward(obj.total);
  adam_step(gen_.params().params(), g_opt_);
  for (const auto& [name, v] : terms) log_.add(step_, name, v);
}

void GanTrainer::train_step() {
  for (std::size_t i = 0; i < config_.d_steps_per_g; ++i) d_step();
  g_step();
  ++step_;
}

void GanTrainer::run(std::size_t target) {
  const bool writing = !config_.out_dir.empty();
  if (writing) fs::create_directories(config_.out_dir);
  const fs::path dir = config_.out_dir;
  while (step_ < target) {
    train_step();
    if (step_ % 10 == 0 || step_ == target) {
      const auto g = log_.values("g_loss");
      spdlog::info("step {}/{} g_loss {:.6g}", step_, target, g.empty() ? 0.0 : g.back());
    }
    if (writing && config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06llu.mrgf", static_cast<unsigned long long>(step_));
      save(dir / name);
      log_.write_csv(dir / "metrics.csv");
    }
  }
  if (writing) {
    save(dir / "final.mrgf");
    log_.write_csv(dir / "metrics.csv");
  }
}

GeneratorObjective generator_objective(const Generator& gen, const Critic& critic,
                                       const ReconHead& recon, const HullNet& hull,
                                       const Tensor& z, const std::vector<Triplet>& triplets,
                                       const TrainConfig& config) {
  const std::size_t n = config.gen.num_points();
  const std::size_t roots = config.gen.roots;
  const std::size_t ppr = config.gen.points_per_root();
  const LossWeights& w = config.weights;

  Var fake = gen.forward(Var::constant(z));
  CriticOutput out = critic.forward(fake, n);
  GeneratorObjective obj;
  obj.parts.wgan = neg(mean_all(out.score));
  if (w.use_h) obj.parts.h = convexity_loss(scorer(hull), fake, ppr);
  if (w.use_rd && roots >= 2) obj.parts.rd = root_drop_loss(scorer(critic), fake, roots, ppr).value;
  if (w.use_t && roots >= 2) obj.parts.t = triplet_loss(fake, triplets, config.triplet_margin);
  if (w.use_rec) obj.parts.rec = recon_loss(Var::constant(z), recon.forward(out.last_conv, ppr));
  obj.total = total_g_loss(obj.parts, w);
  return obj;
}

Generator load_generator(const Checkpoint& ckpt) {
  const TrainConfig config = parse_train_config(ckpt.config);
  Generator gen(config.gen, 0);
  restore_params(ckpt, gen.params());
  return gen;
}

}  // namespace mrgan
