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

// GAN training loop, hull-net pretraining and the root-mixing latent sampler.
//
// Config files are "key = value" lines; '#' starts a comment. Lists are comma
// separated ("branching = 2,2,4"). When desk_scale is true the desk presets
// are applied first and the remaining keys override them, whatever their
// position in the file.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrgan/checkpoint.hpp"
#include "mrgan/hull.hpp"
#include "mrgan/losses.hpp"
#include "mrgan/model.hpp"
#include "mrgan/pointcloud.hpp"

namespace mrgan {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dataset path selecting the built-in synthetic two-sphere clouds.
inline constexpr const char* kTwoSphereDataset = "synthetic:two-spheres";

struct TrainConfig {
  GeneratorConfig gen = GeneratorConfig::full(5);
  CriticConfig critic = CriticConfig::full();
  ReconConfig recon = ReconConfig::full();
  HullNetConfig hull = HullNetConfig::full();
  std::size_t epochs = 500;
  std::size_t steps = 0;  // generator steps; 0 derives them from epochs
  std::size_t batch_size = 16;
  std::size_t d_steps_per_g = 8;
  AdamConfig g_adam{1e-4, 0.0, 0.99, 1e-8};
  AdamConfig d_adam{1e-4, 0.0, 0.99, 1e-8};
  LossWeights weights;
  std::size_t triplets = kTripletsPerStep;
  double triplet_margin = kTripletMargin;
  std::uint64_t seed = 1;
  std::string dataset;
  std::size_t synthetic_clouds = 16;
  bool desk_scale = false;
  std::size_t checkpoint_every = 500;
  std::string out_dir;
  std::string hullnet;  // pretrained hull-net checkpoint, optional

  static TrainConfig full(std::size_t roots = 5);
  static TrainConfig desk(std::size_t roots = 2);
  // R=2, branching 2,2,4, two-sphere data, 200 steps.
  static TrainConfig smoke();
  // Smallest useful network, for tests.
  static TrainConfig tiny();

  void validate() const;
  // Generator steps for a dataset of n clouds: steps if set, else
  // epochs * ceil(n / (batch_size * d_steps_per_g)).
  std::size_t total_steps(std::size_t dataset_size) const;
};

TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string to_config_text(const TrainConfig& config);

struct HullTrainConfig {
  std::size_t batches = 20000;
  std::size_t batch_size = 64;
  std::size_t points = 256;
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  HullSource source;
  HullNetConfig net = HullNetConfig::full();
  std::uint64_t seed = 1;
  std::size_t eval_count = 512;  // held-out clouds for the Pearson check
  std::size_t log_every = 1;
  bool desk_scale = false;

  static HullTrainConfig full() { return {}; }
  // 2000 batches of synthetic clouds on the desk network.
  static HullTrainConfig desk();
  void validate() const;
};

HullTrainConfig parse_hull_config(const std::string& text);
std::string to_config_text(const HullTrainConfig& config);

// Applies "key=value" overrides (as given on a command line) to config text.
std::string apply_overrides(const std::string& text, const std::vector<std::string>& overrides);

struct MetricRow {
  std::uint64_t step = 0;
  std::string name;
  double value = 0.0;

  bool operator==(const MetricRow&) const = default;
};

class MetricsLog {
 public:
  void add(std::uint64_t step, std::string name, double value);
  const std::vector<MetricRow>& rows() const { return rows_; }
  std::size_t count(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;

  // "step,loss_name,value" header, values printed with 17 significant digits.
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<MetricRow> rows_;
};

LatentBundle sample_mixing(std::size_t roots, Rng& rng, std::size_t z_dim = 96);
LatentBundle sample_mixing(std::size_t roots, MixStrategy strategy, Rng& rng,
                           std::size_t z_dim = 96);

// count clouds of two unit-normalized spheres with random centers and radii.
Dataset two_sphere_dataset(std::size_t count, std::size_t n_points, std::uint64_t seed);

// Two-sphere data for kTwoSphereDataset, otherwise ingest of the directory.
Dataset load_training_data(const TrainConfig& config);

// Pearson correlation; 0 when either side has no variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

struct HullTrainResult {
  HullNet net;
  MetricsLog log;
  double heldout_pearson = 0.0;
  Checkpoint checkpoint;
};

HullTrainResult train_hullnet(const HullTrainConfig& config);

// Rebuilds a hull net from a train_hullnet checkpoint.
HullNet load_hullnet(const Checkpoint& ckpt);

// Correlation of net predictions with labels over the given samples.
double evaluate_hullnet(const HullNet& net, const std::vector<HullSample>& samples);

class GanTrainer {
 public:
  // A missing hull net is randomly initialized from config.hull.
  GanTrainer(TrainConfig config, Dataset data, std::optional<HullNet> hull = std::nullopt);
  // Continues from a checkpoint written by checkpoint().
  GanTrainer(const Checkpoint& ckpt, Dataset data);

  // One generator update preceded by d_steps_per_g critic updates. Throws
  // NumericError after writing a dump when a loss is not finite.
  void train_step();
  // Trains until step() reaches target, checkpointing every
  // checkpoint_every steps when out_dir is set.
  void run(std::size_t target);
  void run() { run(config_.total_steps(data_.clouds.size())); }

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const { save_checkpoint(checkpoint(), path); }

  std::uint64_t step() const { return step_; }
  const TrainConfig& config() const { return config_; }
  const MetricsLog& log() const { return log_; }
  const Generator& generator() const { return gen_; }
  const Critic& critic() const { return critic_; }
  const ReconHead& recon() const { return recon_; }
  const HullNet& hullnet() const { return hull_; }

 private:
  void d_step();
  void g_step();
  Tensor real_batch();
  Tensor latent_batch();
  void check_finite(const std::vector<std::pair<std::string, double>>& terms);

  TrainConfig config_;
  Dataset data_;
  Generator gen_;
  Critic critic_;
  ReconHead recon_;
  HullNet hull_;
  AdamState g_opt_;
  AdamState d_opt_;
  Rng rng_;
  std::uint64_t step_ = 0;
  MetricsLog log_;
};

// Generator objective for latents z (B*R rows). Terms that are disabled, or
// that need two roots when R is 1, stay undefined.
struct GeneratorObjective {
  GeneratorLossParts parts;
  Var total;
};
GeneratorObjective generator_objective(const Generator& gen, const Critic& critic,
                                       const ReconHead& recon, const HullNet& hull,
                                       const Tensor& z, const std::vector<Triplet>& triplets,
                                       const TrainConfig& config);

// Generator with the parameters of a training checkpoint.
Generator load_generator(const Checkpoint& ckpt);

}  // namespace mrgan
