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

// Runs the acceptance checks and prints one PASS or FAIL line per criterion.
// Exit status is nonzero when any criterion fails.

#include <spdlog/spdlog.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mrgan/checkpoint.hpp"
#include "mrgan/hull.hpp"
#include "mrgan/losses.hpp"
#include "mrgan/metrics.hpp"
#include "mrgan/model.hpp"
#include "mrgan/trainer.hpp"
#include "primitive_cases.hpp"

namespace fs = std::filesystem;
using namespace mrgan;
using mrgan::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back(what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- gradients

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Outcome o;
  double worst = 0.0;
  for (const auto& [name, err] : mrgan::testing::check_primitives()) {
    worst = std::max(worst, err);
    o.require(err < 1e-6, name + " rel err " + num(err));
  }
  o.note("primitives worst " + num(worst));

  TrainConfig c = TrainConfig::tiny();
  c.batch_size = 2;
  Generator gen(c.gen, 1);
  Critic critic(c.critic, 2);
  ReconHead recon(c.recon, c.critic.conv.back(), 3);
  HullNet hull(c.hull, 4);
  for (auto& p : gen.params().params()) {
    for (double& v : p.value().storage()) v *= 10.0;
  }
  critic.params().set_requires_grad(false);
  recon.params().set_requires_grad(false);
  hull.params().set_requires_grad(false);
  Rng rng(6);
  std::vector<LatentBundle> bundles{sample_mixing(2, rng), sample_mixing(2, rng)};
  const Tensor z = stack_latents(bundles);
  const auto triplets = sample_triplets(2, 2, c.gen.points_per_root(), 8, rng);
  auto f = [&]() { return generator_objective(gen, critic, recon, hull, z, triplets, c).total; };
  const double e2e = grad_check_params(f, gen.params().params());
  o.require(e2e < 1e-4, "end-to-end rel err " + num(e2e));
  o.note("generator loss " + num(e2e));
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "runtime " + num(secs) + " s");
  return o;
}

// ---- shapes

Tensor random_latents(std::size_t r, std::uint64_t seed) {
  Rng rng(seed);
  Tensor z({r, 96});
  for (double& v : z.storage()) v = normal(rng);
  return z;
}

Outcome shape_contracts() {
  Outcome o;
  Critic critic(CriticConfig::full(), 1);
  ReconHead recon(ReconConfig::full(), CriticConfig::full().conv.back(), 2);
  HullNet hull(HullNetConfig::full(), 3);
  for (std::size_t r : {1u, 2u, 5u, 6u}) {
    const std::string tag = "R=" + std::to_string(r) + ": ";
    GeneratorConfig gc = GeneratorConfig::full(r);
    Generator g(gc, 10 + r);
    const Tensor z = random_latents(r, r);
    PartitionedCloud pc = g.generate(LatentBundle{z, MixStrategy::kIndependent});
    o.require(pc.points.shape() == Shape{256 * r, 3}, tag + "generator " + shape_str(pc.points.shape()));
    o.require(pc.points_per_root == 256 && pc.roots() == r, tag + "points per root");
    o.require(pc.points.all_finite(), tag + "non-finite points");

    // Without feature sharing a root's code only moves its own 256 rows.
    gc.share_identity = true;
    Generator iso(gc, 20 + r);
    const Tensor before = iso.generate(LatentBundle{z, MixStrategy::kIndependent}).points;
    for (std::size_t k = 0; k < r; ++k) {
      Tensor z2 = z;
      for (std::size_t c = 0; c < 96; ++c) z2(k, c) += 0.5;
      const Tensor after = iso.generate(LatentBundle{z2, MixStrategy::kIndependent}).points;
      for (std::size_t p = 0; p < after.rows(); ++p) {
        bool same = true;
        for (int d = 0; d < 3; ++d) same = same && after(p, d) == before(p, d);
        if ((p / 256 == k) == same) {
          o.require(false, tag + "point " + std::to_string(p) + " outside block " + std::to_string(k));
          break;
        }
      }
    }

    NoGradGuard ng;
    CriticOutput co = critic.forward(Var::constant(pc.points), 256 * r);
    o.require(co.score.shape() == Shape{1, 1}, tag + "critic score " + shape_str(co.score.shape()));
    Tensor rec = recon.forward(co.last_conv, 256).value();
    o.require(rec.shape() == Shape{r, 96}, tag + "recon " + shape_str(rec.shape()));
    Var h = hull.forward(Var::constant(pc.block(0)), 256);
    o.require(h.shape() == Shape{1, 1}, tag + "hullnet " + shape_str(h.shape()));
  }
  return o;
}

// ---- geometry

Tensor cube_corners() {
  Tensor t({8, 3});
  for (std::size_t i = 0; i < 8; ++i) {
    t(i, 0) = static_cast<double>(i & 1);
    t(i, 1) = static_cast<double>((i >> 1) & 1);
    t(i, 2) = static_cast<double>((i >> 2) & 1);
  }
  return t;
}

std::optional<std::string> hull_problem(const Tensor& pts, const ConvexHull& h) {
  for (std::size_t f = 0; f < h.faces.size(); ++f) {
    const auto& n = h.normals[f];
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      const double s = n[0] * pts(i, 0) + n[1] * pts(i, 1) + n[2] * pts(i, 2);
      if (s > h.offsets[f] + 1e-9) return "point outside face";
    }
  }
  const auto v = static_cast<long>(h.vertices.rows());
  const auto t = static_cast<long>(h.faces.size());
  const auto e = static_cast<long>(h.num_edges());
  if (3 * t != 2 * e) return "3F != 2E";
  if (v - e + t != 2) return "V - E + F != 2";
  return std::nullopt;
}

Outcome geometry_oracle() {
  const auto t0 = Clock::now();
  Outcome o;
  const Tensor cube = cube_corners();
  const double d_cube = distance_to_hull(cube);
  o.require(d_cube == 0.0, "cube corners " + num(d_cube));
  Tensor centered({9, 3});
  for (std::size_t i = 0; i < 24; ++i) centered[i] = cube[i];
  centered(8, 0) = centered(8, 1) = centered(8, 2) = 0.5;
  const double d_center = distance_to_hull(centered);
  o.require(std::abs(d_center - 0.5 / 9.0) < 1e-12, "cube+center " + num(d_center));

  Rng rng(7);
  Tensor pts = random_tensor(rng, 60, 3);
  const double base = distance_to_hull(pts);
  double drift = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
    const Eigen::Matrix3d rot = q.normalized().toRotationMatrix();
    const Eigen::Vector3d shift(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3));
    Tensor moved(pts.shape());
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      Eigen::Vector3d p = rot * Eigen::Vector3d(pts(i, 0), pts(i, 1), pts(i, 2)) + shift;
      for (int k = 0; k < 3; ++k) moved(i, k) = p[k];
    }
    drift = std::max(drift, std::abs(distance_to_hull(moved) - base));
  }
  o.require(drift < 1e-9, "rigid motion drift " + num(drift));
  o.note("rigid drift " + num(drift));

  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 4 + uniform_index(rng, 200);
    Tensor cloud = random_tensor(rng, n, 3);
    if (auto why = hull_problem(cloud, convex_hull3(cloud))) {
      if (bad++ == 0) o.require(false, "hull trial " + std::to_string(trial) + ": " + *why);
    }
  }
  o.require(bad == 0, std::to_string(bad) + " invalid hulls");
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "runtime " + num(secs) + " s");
  return o;
}

// ---- losses

Outcome loss_identities() {
  Outcome o;
  const std::size_t roots = 3, ppr = 4;
  Rng rng(5);
  const Var fake = Var::constant(random_tensor(rng, 2 * roots * ppr, 3));
  // Ignores which points are present.
  CloudScorer blind = [](const Var& x, std::size_t n) {
    return Var::constant(Tensor({x.rows() / n, 1}, 1.5));
  };
  const double blind_rd = root_drop_loss(blind, fake, roots, ppr).value.item();
  o.require(blind_rd == 0.0, "root-blind critic " + num(blind_rd));

  // 2 on full clouds, 1 once any block is missing.
  CloudScorer halves = [&](const Var& x, std::size_t n) {
    return Var::constant(Tensor({x.rows() / n, 1}, n == roots * ppr ? 2.0 : 1.0));
  };
  const double hand = root_drop_loss(halves, fake, roots, ppr).value.item();
  o.require(hand == 0.5, "D(G)=2, D(G without a root)=1 gives " + num(hand));

  const Var one = Var::constant(Tensor::scalar(1.0));
  const LossWeights w;
  o.require(w.h == 1.0 && w.t == 1.0 && w.rec == 1.0 && w.rd == 0.1, "default weights");
  const double total = total_g_loss(GeneratorLossParts{one, one, one, one, one}, w).item();
  o.require(total == 4.1, "unit terms total " + num(total));
  return o;
}

// ---- mixing

std::size_t odd_rows(const Tensor& z) {
  std::map<std::vector<double>, std::size_t> counts;
  for (std::size_t r = 0; r < z.rows(); ++r) ++counts[{z.row(r).begin(), z.row(r).end()}];
  std::size_t most = 0;
  for (const auto& [row, c] : counts) most = std::max(most, c);
  return z.rows() - most;
}

std::size_t distinct_rows(const Tensor& z) {
  std::set<std::vector<double>> rows;
  for (std::size_t r = 0; r < z.rows(); ++r) rows.emplace(z.row(r).begin(), z.row(r).end());
  return rows.size();
}

Outcome mixing_sampler() {
  Outcome o;
  Rng rng(11);
  std::map<MixStrategy, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    LatentBundle b = sample_mixing(5, rng);
    ++counts[b.strategy];
    if (b.strategy == MixStrategy::kUniform && distinct_rows(b.z) != 1) {
      o.require(false, "uniform bundle with " + std::to_string(distinct_rows(b.z)) + " rows");
    }
    if (b.strategy == MixStrategy::kSingle && (odd_rows(b.z) != 1 || distinct_rows(b.z) != 2)) {
      o.require(false, "single bundle with " + std::to_string(odd_rows(b.z)) + " odd rows");
    }
  }
  o.require(counts.size() == 4, "not every strategy drawn");
  for (const auto& [s, c] : counts) {
    const double f = static_cast<double>(c) / draws;
    o.require(f >= 0.23 && f <= 0.27, std::string(to_string(s)) + " frequency " + num(f));
    o.note(std::string(to_string(s)) + " " + num(f));
  }
  return o;
}

// ---- metrics

double brute_force_emd(const Tensor& a, const Tensor& b) {
  std::vector<std::size_t> perm(a.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      s += std::hypot(a(i, 0) - b(perm[i], 0), a(i, 1) - b(perm[i], 1), a(i, 2) - b(perm[i], 2));
    }
    best = std::min(best, s / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome metric_identities() {
  Outcome o;
  Rng rng(9);
  std::vector<Tensor> s;
  for (int i = 0; i < 5; ++i) s.push_back(random_tensor(rng, 64, 3));
  o.require(jsd(s, s) == 0.0, "jsd(S,S) " + num(jsd(s, s)));
  std::vector<Tensor> lo{random_tensor(rng, 64, 3, -1.0, -0.2)};
  std::vector<Tensor> hi{random_tensor(rng, 64, 3, 0.2, 1.0)};
  const double disjoint = jsd(lo, hi);
  o.require(std::abs(disjoint - std::log(2.0)) <= 1e-12, "disjoint jsd " + num(disjoint));
  for (CloudDistance d : {CloudDistance::kChamfer, CloudDistance::kEmd}) {
    const std::string tag = d == CloudDistance::kChamfer ? "CD" : "EMD";
    const double m = mmd(s, s, d), c = coverage(s, s, d);
    o.require(m == 0.0, "mmd-" + tag + "(S,S) " + num(m));
    o.require(c == 100.0, "cov-" + tag + "(S,S) " + num(c));
  }
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 6);
    Tensor a = random_tensor(rng, n, 3), b = random_tensor(rng, n, 3);
    worst = std::max(worst, std::abs(emd(a, b) - brute_force_emd(a, b)));
  }
  o.require(worst <= 1e-12, "emd vs brute force " + num(worst));
  return o;
}

// ---- hull net

struct HullRun {
  Outcome outcome;
  std::optional<HullNet> net;
};

HullRun hullnet_training() {
  const auto t0 = Clock::now();
  HullRun run;
  HullTrainConfig c = HullTrainConfig::desk();
  c.log_every = 100;
  Outcome& o = run.outcome;
  o.require(c.batches == 2000 && c.batch_size == 64, "desk recipe size");
  o.require(c.adam.lr == 1e-3 && c.adam.beta1 == 0.9 && c.adam.beta2 == 0.999, "adam settings");
  HullTrainResult r = train_hullnet(c);
  o.require(r.heldout_pearson >= 0.8, "held-out pearson " + num(r.heldout_pearson));
  o.note("pearson " + num(r.heldout_pearson));
  const double secs = seconds_since(t0);
  o.note(num(secs) + " s");
  o.require(secs < 1800.0, "runtime " + num(secs) + " s");
  run.net = std::move(r.net);
  return run;
}

// ---- GAN smoke

Outcome gan_smoke(const std::optional<HullNet>& hull) {
  Outcome o;
  TrainConfig c = TrainConfig::smoke();
  o.require(c.gen.roots == 2 && c.dataset == kTwoSphereDataset, "smoke config");
  o.require(c.d_steps_per_g == 8, "critic steps per generator step");
  o.require(c.steps == 200, "smoke steps");
  const Dataset data = load_training_data(c);

  auto finite_log = [&](const MetricsLog& log, const char* which) {
    for (const auto& row : log.rows()) {
      if (!std::isfinite(row.value)) {
        o.require(false, std::string(which) + ": " + row.name + " not finite at step " +
                             std::to_string(row.step));
        return;
      }
    }
  };

  GanTrainer a(c, data, hull);
  a.run(200);
  finite_log(a.log(), "run A");
  o.require(a.log().count("g_loss") == 200 && a.log().count("d_loss") == 1600,
            "step counts " + std::to_string(a.log().count("g_loss")) + "/" +
                std::to_string(a.log().count("d_loss")));
  const std::string log200 = a.log().csv();

  const fs::path dir = fs::temp_directory_path() / ("mrgan_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path mid = dir / "step200.mrgf";
  save_checkpoint(a.checkpoint(), mid);

  GanTrainer b(c, data, hull);
  b.run(200);
  o.require(b.log().csv() == log200, "logs differ between runs with the same seed");
  o.require(serialize_checkpoint(b.checkpoint()) == serialize_checkpoint(a.checkpoint()),
            "weights differ between runs with the same seed");

  a.run(300);
  finite_log(a.log(), "run A continued");
  GanTrainer resumed(load_checkpoint(mid), data);
  o.require(resumed.step() == 200, "resumed at step " + std::to_string(resumed.step()));
  resumed.run(300);
  std::vector<MetricRow> tail;
  for (const auto& row : a.log().rows()) {
    if (row.step >= 200) tail.push_back(row);
  }
  o.require(resumed.log().rows() == tail, "resumed log differs over steps 200-300");
  o.require(serialize_checkpoint(resumed.checkpoint()) == serialize_checkpoint(a.checkpoint()),
            "resumed state differs at step 300");
  fs::remove_all(dir);
  const auto& g = a.log().values("g_loss");
  o.note("g_loss " + num(g.front()) + " -> " + num(g.back()));
  return o;
}

// ---- disentanglement

Outcome disentanglement_stub() {
  Outcome o;
  const std::size_t roots = 4, ppr = 8;
  DisentangleModel m;
  m.roots = roots;
  m.points_per_root = ppr;
  m.z_dim = 4;
  // Block r sits at its own code; other blocks ignore it.
  m.generate = [](const LatentBundle& b) {
    Tensor pts({roots * ppr, 3});
    for (std::size_t p = 0; p < pts.rows(); ++p) {
      for (int k = 0; k < 3; ++k) pts(p, k) = b.z(p / ppr, k) + 0.01 * static_cast<double>(p % ppr);
    }
    return pts;
  };
  const double thr = displacement_threshold(m, 200, 3);
  m.resample = [thr](const LatentBundle& b, std::size_t root, Rng&) {
    LatentBundle out = b;
    out.z(root, 0) += 2.0 * thr;
    return out;
  };
  DisentangleOptions opt;
  opt.n_trials = 200;
  opt.threshold = thr;
  DisentanglementReport r = disentanglement(m, opt);
  o.require(r.frac_modified == 1.0, "frac_modified " + num(r.frac_modified));
  o.require(r.frac_unmodified == 0.0, "frac_unmodified " + num(r.frac_unmodified));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks", "acceptance"};
  std::vector<std::string> only;
  app.add_option("--only", only, "Run only these criteria (by short name)");
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::warn);
  std::optional<HullNet> trained;
  struct Criterion {
    std::string key;
    std::string title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradients", "gradient suite", gradient_suite},
      {"shapes", "shape contracts", shape_contracts},
      {"geometry", "geometry oracle", geometry_oracle},
      {"losses", "loss identities", loss_identities},
      {"mixing", "mixing sampler distribution", mixing_sampler},
      {"metrics", "metric identities", metric_identities},
      {"hullnet", "hull net desk training",
       [&] {
         HullRun r = hullnet_training();
         trained = std::move(r.net);
         return r.outcome;
       }},
      {"gan", "GAN smoke training", [&] { return gan_smoke(trained); }},
      {"disentangle", "disentanglement harness", disentanglement_stub},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.key) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("%s %s [%.1f s]%s%s\n", o.pass ? "PASS" : "FAIL", c.title.c_str(), seconds_since(t0),
                detail.empty() ? "" : ": ", detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
