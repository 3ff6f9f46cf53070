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

#include "mrgan/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <iostream>
#include <sstream>

#include "mrgan/checkpoint.hpp"
#include "mrgan/metrics.hpp"
#include "mrgan/pointcloud.hpp"
#include "mrgan/service.hpp"
#include "mrgan/trainer.hpp"

namespace fs = std::filesystem;

namespace mrgan {

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void setup_logging() {
  static bool done = false;
  if (!done) {
    done = true;
    auto logger = spdlog::stderr_color_mt("mrgan");
    spdlog::set_default_logger(logger);
  }
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("MRGAN_LOG")) {
    const std::string v = env;
    if (v == "error") level = spdlog::level::err;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
    else spdlog::warn("MRGAN_LOG must be error, info or debug; got '{}'", v);
  }
  spdlog::set_level(level);
}

MixStrategy parse_strategy(const std::string& s) {
  if (s == "uniform") return MixStrategy::kUniform;
  if (s == "half") return MixStrategy::kHalf;
  if (s == "single") return MixStrategy::kSingle;
  if (s == "independent") return MixStrategy::kIndependent;
  throw UsageError("unknown strategy '" + s + "'");
}

std::vector<std::size_t> parse_index_list(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": bad index '" + tok + "'");
    }
  }
  return out;
}

void check_roots(const std::vector<std::size_t>& roots, std::size_t r, const char* flag) {
  for (std::size_t i : roots) {
    if (i >= r) {
      throw UsageError(std::string(flag) + ": root " + std::to_string(i) + " out of range (R = " +
                       std::to_string(r) + ")");
    }
  }
}

// The latent bundle a seed stands for.
LatentBundle seed_bundle(const Generator& g, std::uint64_t seed, MixStrategy s) {
  Rng rng(seed);
  return sample_mixing(g.config().roots, s, rng, g.config().z_dim);
}

void write_partitioned(const PartitionedCloud& c, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_cloud(PointCloud(c.points, c.labels()), path);
}

std::string cloud_name(const std::string& prefix, std::size_t i) {
  return prefix + "_" + std::to_string(i) + ".xyz";
}

std::vector<Tensor> load_dir(const fs::path& dir) {
  std::vector<Tensor> out;
  for (const auto& f : list_cloud_files(dir)) out.push_back(load_cloud(f).points);
  if (out.empty()) throw IoError("no cloud files in " + dir.string());
  return out;
}

// Brings every cloud to the smallest point count of both sets.
void equalize(std::vector<Tensor>& a, std::vector<Tensor>& b, std::uint64_t seed) {
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto* set : {&a, &b}) {
    for (const auto& t : *set) n = std::min(n, t.rows());
  }
  std::uint64_t k = 0;
  for (auto* set : {&a, &b}) {
    for (auto& t : *set) {
      if (t.rows() != n) t = subsample(PointCloud(t), n, derive_seed(seed, k)).points;
      ++k;
    }
  }
}

struct Cli {
  std::ostream& out;
  CLI::App app{"mrgan: multi-root point cloud GAN toolkit", "mrgan"};

  // Shared option storage.
  std::string config_path, ckpt, out_path, data_dir, hullnet_path, ref_dir, gen_dir, ui_dir;
  std::string addr = kDefaultAddress;
  std::string strategy = "independent";
  std::string prefix = "sample";
  std::string roots_from_b, root_list, branching, threshold_cache, before_path, after_path;
  std::vector<std::string> sets, disabled;
  std::uint64_t seed = 1, seed_a = 1, seed_b = 2;
  std::size_t n = 1, steps = 0, roots = 0, grid = 0, grid_res = kJsdGrid, k = 5, root = 0;
  std::size_t n_pairs = 2500, trials = 1000;
  bool desk = false;

  explicit Cli(std::ostream& o) : out(o) {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    auto* ingest = app.add_subcommand("ingest", "Normalize and subsample a directory of clouds");
    ingest->add_option("--in", data_dir, "Input directory of .xyz clouds")->required();
    ingest->add_option("--out", out_path, "Output directory")->required();
    ingest->add_option("--n", n, "Points per cloud")->capture_default_str();
    ingest->add_option("--seed", seed, "Subsampling seed")->capture_default_str();
    ingest->callback([this] { cmd_ingest(); });

    auto* hull = app.add_subcommand("hullnet-train", "Pretrain the convexity network");
    hull->add_option("--config", config_path, "Config file (key = value)");
    hull->add_option("--set", sets, "Config override key=value (repeatable)");
    hull->add_flag("--desk", desk, "Start from the desk preset");
    hull->add_option("--steps", steps, "Number of batches");
    hull->add_option("--seed", seed, "Seed");
    hull->add_option("--out", out_path, "Output directory")->required();
    hull->callback([this, hull] { cmd_hullnet(hull); });

    auto* train = app.add_subcommand("train", "Train the GAN");
    train->add_option("--config", config_path, "Config file (key = value)");
    train->add_option("--set", sets, "Config override key=value (repeatable)");
    train->add_flag("--desk", desk, "Start from the desk preset");
    train->add_option("--seed", seed, "Seed");
    train->add_option("--steps", steps, "Generator steps (overrides epochs)");
    train->add_option("--roots", roots, "Number of roots R");
    train->add_option("--branching", branching, "Tree branching, e.g. 2,2,4");
    train->add_option("--disable-loss", disabled, "Turn off h, rd, t or rec (repeatable)")
        ->check(CLI::IsMember({"h", "rd", "t", "rec"}));
    train->add_option("--data", data_dir, "Dataset directory or synthetic:two-spheres");
    train->add_option("--hullnet", hullnet_path, "Pretrained hull net checkpoint");
    train->add_option("--ckpt", ckpt, "Resume from this checkpoint");
    train->add_option("--out", out_path, "Output directory")->required();
    train->callback([this, train] { cmd_train(train); });

    auto* gen = app.add_subcommand("generate", "Sample shapes from a checkpoint");
    gen->add_option("--ckpt", ckpt, "Checkpoint")->required();
    gen->add_option("--n", n, "Number of shapes")->capture_default_str();
    gen->add_option("--seed", seed, "Seed")->capture_default_str();
    gen->add_option("--strategy", strategy, "uniform, half, single or independent")
        ->capture_default_str();
    gen->add_option("--out", out_path, "Output directory")->capture_default_str();
    gen->add_option("--prefix", prefix, "File name prefix")->capture_default_str();
    gen->callback([this] { cmd_generate(); });

    auto* mix = app.add_subcommand("mix", "Mix root codes of two shapes");
    mix->add_option("--ckpt", ckpt, "Checkpoint")->required();
    auto* sa = mix->add_option("--seed-a", seed_a, "Seed of shape A");
    auto* sb = mix->add_option("--seed-b", seed_b, "Seed of shape B");
    auto* s = mix->add_option("--seed", seed, "Sets seed-a (and seed-b = seed + 1) when not given");
    mix->add_option("--roots-from-b", roots_from_b, "Roots taken from B, e.g. 0,2");
    mix->add_option("--grid", grid, "Write a (k+1)x(k+1) mixing grid with k rows and columns");
    mix->add_option("--out", out_path, "Output file, or directory with --grid")->required();
    mix->callback([this, sa, sb, s] {
      if (s->count() && !sa->count()) seed_a = seed;
      if (s->count() && !sb->count()) seed_b = seed + 1;
      cmd_mix();
    });

    auto* interp = app.add_subcommand("interpolate", "Interpolate root codes between two shapes");
    interp->add_option("--ckpt", ckpt, "Checkpoint")->required();
    auto* ia = interp->add_option("--seed-a", seed_a, "Seed of the start shape");
    auto* ib = interp->add_option("--seed-b", seed_b, "Seed of the end shape");
    auto* is = interp->add_option("--seed", seed, "Sets seed-a (and seed-b = seed + 1) when not given");
    interp->add_option("--roots", root_list, "Roots to interpolate (default all), e.g. 1,3");
    interp->add_option("--k", k, "Interpolation steps")->capture_default_str();
    interp->add_option("--out", out_path, "Output directory")->required();
    interp->add_option("--prefix", prefix, "File name prefix");
    interp->callback([this, ia, ib, is] {
      if (is->count() && !ia->count()) seed_a = seed;
      if (is->count() && !ib->count()) seed_b = seed + 1;
      cmd_interpolate();
    });

    auto* drop = app.add_subcommand("rootdrop", "Emit a shape without one root");
    drop->add_option("--ckpt", ckpt, "Checkpoint")->required();
    drop->add_option("--seed", seed, "Seed")->capture_default_str();
    drop->add_option("--root", root, "Root to drop")->required();
    drop->add_option("--out", out_path, "Output file")->required();
    drop->callback([this] { cmd_rootdrop(); });

    auto* eval = app.add_subcommand("evaluate", "JSD, MMD and coverage against references");
    eval->add_option("--ref-dir", ref_dir, "Reference clouds")->required();
    auto* gd = eval->add_option("--gen-dir", gen_dir, "Generated clouds");
    auto* ec = eval->add_option("--ckpt", ckpt, "Generate from this checkpoint instead");
    gd->excludes(ec);
    ec->excludes(gd);
    eval->add_option("--n", n, "Shapes to generate with --ckpt (default: reference count)");
    eval->add_option("--seed", seed, "Seed")->capture_default_str();
    eval->add_option("--grid-res", grid_res, "JSD grid resolution")->capture_default_str();
    eval->add_option("--out", out_path, "Write the report as CSV");
    eval->callback([this, gd, ec, eval] { cmd_evaluate(gd->count() > 0, ec->count() > 0, eval); });

    auto* dis = app.add_subcommand("disentangle", "Fraction of points moved by a root resample");
    dis->add_option("--ckpt", ckpt, "Checkpoint")->required();
    dis->add_option("--n-pairs", n_pairs, "Shape pairs for the threshold")->capture_default_str();
    dis->add_option("--trials", trials, "Resample trials")->capture_default_str();
    dis->add_option("--seed", seed, "Seed")->capture_default_str();
    dis->add_option("--threshold-cache", threshold_cache, "Threshold cache file (default <ckpt>.threshold)");
    dis->add_option("--out", out_path, "Write the report as CSV");
    dis->callback([this] { cmd_disentangle(); });

    auto* heat = app.add_subcommand("heatmap", "Per-point displacement export");
    auto* hc = heat->add_option("--ckpt", ckpt, "Checkpoint: resample roots of a generated shape");
    auto* hb = heat->add_option("--before", before_path, "Cloud file before the edit");
    auto* ha = heat->add_option("--after", after_path, "Cloud file after the edit");
    hc->excludes(hb)->excludes(ha);
    hb->excludes(hc);
    ha->excludes(hc);
    heat->add_option("--seed", seed, "Seed of the shape")->capture_default_str();
    heat->add_option("--seed-b", seed_b, "Seed supplying the replacement codes")->capture_default_str();
    heat->add_option("--roots", root_list, "Roots replaced from seed-b (default 0)");
    heat->add_option("--out", out_path, "Output cloud file")->required();
    heat->callback([this, hc, hb, ha] { cmd_heatmap(hc->count() > 0, hb->count() > 0, ha->count() > 0); });

    auto* serve = app.add_subcommand("serve", "Run the studio HTTP service");
    serve->add_option("--ckpt", ckpt, "Checkpoint")->required();
    serve->add_option("--addr", addr, "host:port")->capture_default_str();
    serve->add_option("--ui-dir", ui_dir, "Static UI assets");
    serve->add_option("--seed", seed, "Seed for unseeded latent samples")->capture_default_str();
    serve->callback([this] { cmd_serve(); });
  }

  Generator generator() const { return load_generator(load_checkpoint(ckpt)); }

  void cmd_ingest() {
    fs::create_directories(out_path);
    const auto files = list_cloud_files(data_dir);
    if (files.empty()) throw IoError("no cloud files in " + data_dir);
    Dataset ds = ingest_dataset(data_dir, n, seed);
    for (std::size_t i = 0; i < files.size(); ++i) {
      save_cloud(ds.clouds[i], fs::path(out_path) / files[i].filename());
    }
    out << "ingested " << files.size() << " clouds of " << n << " points into " << out_path << '\n';
  }

  std::string read_config() const {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open config " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    if (desk) text = "desk_scale = true\n" + text;
    return apply_overrides(text, sets);
  }

  void cmd_hullnet(CLI::App* sub) {
    std::vector<std::string> flags;
    if (sub->count("--steps")) flags.push_back("batches=" + std::to_string(steps));
    if (sub->count("--seed")) flags.push_back("seed=" + std::to_string(seed));
    HullTrainConfig c = parse_hull_config(apply_overrides(read_config(), flags));
    fs::create_directories(out_path);
    HullTrainResult r = train_hullnet(c);
    save_checkpoint(r.checkpoint, fs::path(out_path) / "hullnet.mrgf");
    r.log.write_csv(fs::path(out_path) / "hullnet_metrics.csv");
    out << "held-out pearson " << r.heldout_pearson << '\n'
        << "wrote " << (fs::path(out_path) / "hullnet.mrgf").string() << '\n';
  }

  void cmd_train(CLI::App* sub) {
    if (!ckpt.empty()) {
      Checkpoint ck = load_checkpoint(ckpt);
      TrainConfig c = parse_train_config(ck.config);
      c.out_dir = out_path;
      ck.config = to_config_text(c);
      const std::size_t target = sub->count("--steps") ? steps : c.total_steps(load_training_data(c).clouds.size());
      GanTrainer t(ck, load_training_data(c));
      t.run(target);
      out << "resumed at step " << ck.step << ", finished at step " << t.step() << '\n';
      return;
    }
    std::vector<std::string> flags;
    if (sub->count("--seed")) flags.push_back("seed=" + std::to_string(seed));
    if (sub->count("--steps")) flags.push_back("steps=" + std::to_string(steps));
    if (sub->count("--roots")) flags.push_back("roots=" + std::to_string(roots));
    if (sub->count("--data")) flags.push_back("dataset=" + data_dir);
    if (sub->count("--hullnet")) flags.push_back("hullnet=" + hullnet_path);
    for (const auto& d : disabled) flags.push_back("use_" + d + "=false");
    flags.push_back("out_dir=" + out_path);
    TrainConfig c = parse_train_config(apply_overrides(read_config(), flags));
    if (sub->count("--branching")) {
      std::string text = apply_overrides(to_config_text(c), {"branching=" + branching});
      TrainConfig b = parse_train_config(text);
      if (b.gen.features.size() != b.gen.branching.size()) {
        // Keep the hidden width and end in coordinates.
        std::vector<std::size_t> f(b.gen.branching.size(), c.gen.features.front());
        f.back() = 3;
        b.gen.features = f;
        b.gen.share_after_layer = std::min(b.gen.share_after_layer, f.size());
      }
      c = b;
    }
    GanTrainer t(c, load_training_data(c));
    t.run();
    out << "trained " << t.step() << " steps; checkpoint " << (fs::path(out_path) / "final.mrgf").string()
        << '\n';
  }

  void cmd_generate() {
    Generator g = generator();
    const MixStrategy s = parse_strategy(strategy);
    Rng rng(seed);
    std::vector<LatentBundle> bundles;
    for (std::size_t i = 0; i < n; ++i) {
      bundles.push_back(sample_mixing(g.config().roots, s, rng, g.config().z_dim));
    }
    const fs::path dir = out_path.empty() ? fs::path(".") : fs::path(out_path);
    auto clouds = g.generate(bundles);
    for (std::size_t i = 0; i < clouds.size(); ++i) write_partitioned(clouds[i], dir / cloud_name(prefix, i));
    out << "wrote " << n << " shapes to " << dir.string() << '\n';
  }

  LatentBundle mixed(const LatentBundle& a, const LatentBundle& b,
                     const std::vector<std::size_t>& from_b) const {
    LatentBundle m = a;
    for (std::size_t r : from_b) std::copy(b.z.row(r).begin(), b.z.row(r).end(), m.z.row(r).begin());
    return m;
  }

  void cmd_mix() {
    Generator g = generator();
    const std::size_t r = g.config().roots;
    std::vector<std::size_t> from_b;
    if (!roots_from_b.empty()) {
      from_b = parse_index_list(roots_from_b, "--roots-from-b");
    } else {
      for (std::size_t i = r / 2; i < r; ++i) from_b.push_back(i);
    }
    check_roots(from_b, r, "--roots-from-b");
    if (grid == 0) {
      const LatentBundle a = seed_bundle(g, seed_a, MixStrategy::kIndependent);
      const LatentBundle b = seed_bundle(g, seed_b, MixStrategy::kIndependent);
      write_partitioned(g.generate(mixed(a, b, from_b)), out_path);
      out << "wrote " << out_path << '\n';
      return;
    }
    // Row i uses seed-a + i, column j seed-b + j; headers are the pure shapes.
    const fs::path dir = out_path;
    for (std::size_t i = 0; i <= grid; ++i) {
      for (std::size_t j = 0; j <= grid; ++j) {
        if (i == 0 && j == 0) continue;
        LatentBundle cell;
        if (i == 0) {
          cell = seed_bundle(g, seed_b + j - 1, MixStrategy::kIndependent);
        } else if (j == 0) {
          cell = seed_bundle(g, seed_a + i - 1, MixStrategy::kIndependent);
        } else {
          cell = mixed(seed_bundle(g, seed_a + i - 1, MixStrategy::kIndependent),
                       seed_bundle(g, seed_b + j - 1, MixStrategy::kIndependent), from_b);
        }
        write_partitioned(g.generate(cell),
                          dir / ("grid_r" + std::to_string(i) + "_c" + std::to_string(j) + ".xyz"));
      }
    }
    out << "wrote " << (grid + 1) * (grid + 1) - 1 << " grid cells to " << dir.string() << '\n';
  }

  void cmd_interpolate() {
    if (k == 0) throw UsageError("--k must be at least 1");
    Generator g = generator();
    const std::size_t r = g.config().roots;
    std::vector<std::size_t> which;
    if (root_list.empty()) {
      for (std::size_t i = 0; i < r; ++i) which.push_back(i);
    } else {
      which = parse_index_list(root_list, "--roots");
    }
    check_roots(which, r, "--roots");
    const LatentBundle a = seed_bundle(g, seed_a, MixStrategy::kIndependent);
    const LatentBundle b = seed_bundle(g, seed_b, MixStrategy::kIndependent);
    const std::string pre = prefix == "sample" ? "interp" : prefix;
    for (std::size_t step = 0; step <= k; ++step) {
      const double t = static_cast<double>(step) / static_cast<double>(k);
      LatentBundle m = a;
      for (std::size_t root_i : which) {
        for (std::size_t c = 0; c < m.z.cols(); ++c) m.z(root_i, c) = (1 - t) * a.z(root_i, c) + t * b.z(root_i, c);
      }
      write_partitioned(g.generate(m), fs::path(out_path) / cloud_name(pre, step));
    }
    out << "wrote " << k + 1 << " frames to " << out_path << '\n';
  }

  void cmd_rootdrop() {
    Generator g = generator();
    check_roots({root}, g.config().roots, "--root");
    PartitionedCloud c = g.generate(seed_bundle(g, seed, MixStrategy::kIndependent));
    const auto labels = c.labels();
    std::vector<double> pts;
    std::vector<int> kept;
    for (std::size_t p = 0; p < c.points.rows(); ++p) {
      if (c.root_of_point(p) == root) continue;
      for (int d = 0; d < 3; ++d) pts.push_back(c.points(p, d));
      kept.push_back(labels[p]);
    }
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    const std::size_t count = kept.size();
    save_cloud(PointCloud(Tensor({count, 3}, std::move(pts)), std::move(kept)), out_path);
    out << "wrote " << out_path << '\n';
  }

  void cmd_evaluate(bool have_gen_dir, bool have_ckpt, CLI::App* sub) {
    if (have_gen_dir == have_ckpt) throw UsageError("evaluate needs exactly one of --gen-dir or --ckpt");
    std::vector<Tensor> ref = load_dir(ref_dir);
    std::vector<Tensor> gen;
    if (have_gen_dir) {
      gen = load_dir(gen_dir);
    } else {
      Generator g = generator();
      const std::size_t count = sub->count("--n") ? n : ref.size();
      Rng rng(seed);
      std::vector<LatentBundle> bundles;
      for (std::size_t i = 0; i < count; ++i) {
        bundles.push_back(sample_mixing(g.config().roots, MixStrategy::kIndependent, rng, g.config().z_dim));
      }
      for (auto& c : g.generate(bundles)) gen.push_back(std::move(c.points));
    }
    equalize(gen, ref, seed);
    MetricReport r = evaluate_sets(gen, ref, grid_res);
    out << r.text();
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      if (!f) throw IoError("cannot write " + out_path);
      f << r.csv();
    }
  }

  void cmd_disentangle() {
    Checkpoint ck = load_checkpoint(ckpt);
    Generator g = load_generator(ck);
    const fs::path cache = threshold_cache.empty() ? fs::path(ckpt + ".threshold") : fs::path(threshold_cache);
    ThresholdCache key{fs::absolute(ckpt).string(), ck.step, n_pairs, seed, 0.0};
    DisentangleModel model = disentangle_model(g);
    DisentangleOptions opt;
    opt.n_pairs = n_pairs;
    opt.n_trials = trials;
    opt.seed = seed;
    opt.threshold = read_threshold_cache(cache, key);
    if (!opt.threshold) {
      key.threshold = displacement_threshold(model, n_pairs, seed);
      write_threshold_cache(cache, key);
      opt.threshold = key.threshold;
    } else {
      spdlog::info("reusing cached threshold from {}", cache.string());
    }
    DisentanglementReport r = disentanglement(model, opt);
    out << r.text();
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      if (!f) throw IoError("cannot write " + out_path);
      f << r.csv();
    }
  }

  void cmd_heatmap(bool have_ckpt, bool have_before, bool have_after) {
    Tensor before, after;
    if (have_ckpt) {
      Generator g = generator();
      std::vector<std::size_t> which = root_list.empty() ? std::vector<std::size_t>{0}
                                                         : parse_index_list(root_list, "--roots");
      check_roots(which, g.config().roots, "--roots");
      const LatentBundle a = seed_bundle(g, seed, MixStrategy::kIndependent);
      const LatentBundle b = seed_bundle(g, seed_b, MixStrategy::kIndependent);
      before = g.generate(a).points;
      after = g.generate(mixed(a, b, which)).points;
    } else if (have_before && have_after) {
      before = load_cloud(before_path).points;
      after = load_cloud(after_path).points;
    } else {
      throw UsageError("heatmap needs --ckpt, or both --before and --after");
    }
    Heatmap h = locality_heatmap(before, after);
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    export_heatmap(h, after, out_path);
    out << "distance range [" << h.min << ", " << h.max << "], wrote " << out_path << '\n';
  }

  void cmd_serve() {
    auto [host, port] = parse_address(addr);
    StudioService service(load_checkpoint(ckpt), ui_dir, seed);
    HttpServer server(service);
    const bool ok = server.listen(host, port, [&](int bound) {
      spdlog::info("serving on http://{}:{}/ (ui at /ui)", host, bound);
    });
    if (!ok) throw IoError("cannot listen on " + addr);
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  setup_logging();
  Cli cli(out);
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    cli.app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << cli.app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << cli.app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << cli.app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mrgan
