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

#include "mrgan/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "mrgan/pointcloud.hpp"

namespace fs = std::filesystem;

namespace mrgan {

namespace {

void check_cloud(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.cols() != 3 || t.rows() == 0) {
    throw DimensionError(std::string(what) + ": expected a non-empty N x 3 cloud, got " +
                         shape_str(t.shape()));
  }
}

double sq_dist(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  const double dx = a(i, 0) - b(j, 0), dy = a(i, 1) - b(j, 1), dz = a(i, 2) - b(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

double one_way(const Tensor& a, const Tensor& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.rows(); ++j) best = std::min(best, sq_dist(a, i, b, j));
    total += best;
  }
  return total / static_cast<double>(a.rows());
}

void check_square(const Tensor& cost) {
  if (cost.rank() != 2 || cost.rows() != cost.cols()) {
    throw DimensionError("assignment needs a square cost matrix, got " + shape_str(cost.shape()));
  }
}

template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double chamfer(const Tensor& a, const Tensor& b) {
  check_cloud(a, "chamfer");
  check_cloud(b, "chamfer");
  return one_way(a, b) + one_way(b, a);
}

std::vector<std::size_t> hungarian(const Tensor& cost) {
  check_square(cost);
  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with potentials; index 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t j = 1; j <= n; ++j) out[p[j] - 1] = j - 1;
  return out;
}

std::vector<std::size_t> auction(const Tensor& cost, double rel_tol) {
  check_square(cost);
  const std::size_t n = cost.rows();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  if (n == 1) return {0};

  double max_cost = 0.0, row_lb = 0.0, col_lb = 0.0;
  std::vector<double> col_min(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    double rmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double c = cost(i, j);
      max_cost = std::max(max_cost, c);
      rmin = std::min(rmin, c);
      col_min[j] = std::min(col_min[j], c);
    }
    row_lb += rmin;
  }
  for (double c : col_min) col_lb += c;
  // The final assignment is within n * eps of optimal; the lower bound turns
  // that into a relative guarantee.
  const double lower = std::max(row_lb, col_lb);
  const double eps_final =
      std::max(rel_tol * lower / static_cast<double>(n), 1e-12 * std::max(max_cost, 1.0));

  std::vector<double> price(n, 0.0);
  std::vector<std::size_t> owner(n), assigned(n);
  double eps = std::max(max_cost / 4.0, eps_final);
  while (true) {
    std::fill(owner.begin(), owner.end(), kNone);
    std::fill(assigned.begin(), assigned.end(), kNone);
    std::vector<std::size_t> queue(n);
    std::iota(queue.begin(), queue.end(), 0);
    while (!queue.empty()) {
      const std::size_t i = queue.back();
      queue.pop_back();
      // Benefit is -cost; find the best and second-best object.
      double best = -std::numeric_limits<double>::infinity(), second = best;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double val = -cost(i, j) - price[j];
        if (val > best) {
          second = best;
          best = val;
          best_j = j;
        } else if (val > second) {
          second = val;
        }
      }
      price[best_j] += best - second + eps;
      if (owner[best_j] != kNone) {
        assigned[owner[best_j]] = kNone;
        queue.push_back(owner[best_j]);
      }
      owner[best_j] = i;
      assigned[i] = best_j;
    }
    if (eps <= eps_final) break;
    eps = std::max(eps / 5.0, eps_final);
  }
  return assigned;
}

EmdResult emd_detailed(const Tensor& a, const Tensor& b) {
  check_cloud(a, "emd");
  check_cloud(b, "emd");
  if (a.rows() != b.rows()) {
    throw DimensionError("emd needs equally sized clouds, got " + std::to_string(a.rows()) +
                         " and " + std::to_string(b.rows()));
  }
  const std::size_t n = a.rows();
  Tensor cost({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = std::sqrt(sq_dist(a, i, b, j));
  }
  EmdResult r;
  r.approximate = n > kExactEmdLimit;
  const auto match = r.approximate ? auction(cost) : hungarian(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost(i, match[i]);
  r.value = total / static_cast<double>(n);
  return r;
}

double jsd_distributions(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size() || p.empty()) {
    throw std::invalid_argument("jsd: distributions differ in length or are empty");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) total += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) total += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::max(0.0, total);
}

std::vector<double> occupancy(const std::vector<Tensor>& set, std::size_t grid_res) {
  if (grid_res == 0) throw std::invalid_argument("jsd: grid resolution must be positive");
  std::vector<double> counts(grid_res * grid_res * grid_res, 0.0);
  const double res = static_cast<double>(grid_res);
  auto cell = [&](double x) {
    const double c = std::floor((x + 1.0) * 0.5 * res);
    return static_cast<std::size_t>(std::clamp(c, 0.0, res - 1.0));
  };
  for (const auto& cloud : set) {
    check_cloud(cloud, "jsd");
    for (std::size_t i = 0; i < cloud.rows(); ++i) {
      counts[(cell(cloud(i, 0)) * grid_res + cell(cloud(i, 1))) * grid_res + cell(cloud(i, 2))] += 1.0;
    }
  }
  return counts;
}

double jsd(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref, std::size_t grid_res) {
  if (gen.empty() || ref.empty()) throw std::invalid_argument("jsd: empty cloud set");
  auto normalized = [&](const std::vector<Tensor>& set) {
    auto c = occupancy(set, grid_res);
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    for (double& v : c) v /= total;
    return c;
  };
  return jsd_distributions(normalized(gen), normalized(ref));
}

Tensor distance_matrix(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref,
                       CloudDistance dist, bool* approximate) {
  if (gen.empty() || ref.empty()) throw std::invalid_argument("empty cloud set");
  Tensor d({gen.size(), ref.size()});
  std::atomic<bool> approx{false};
  parallel_for(gen.size() * ref.size(), [&](std::size_t k) {
    const std::size_t g = k / ref.size(), r = k % ref.size();
    if (dist == CloudDistance::kChamfer) {
      d(g, r) = chamfer(gen[g], ref[r]);
    } else {
      EmdResult e = emd_detailed(gen[g], ref[r]);
      if (e.approximate) approx = true;
      d(g, r) = e.value;
    }
  });
  if (approximate) *approximate = approx;
  return d;
}

double mmd_from(const Tensor& d) {
  double total = 0.0;
  for (std::size_t r = 0; r < d.cols(); ++r) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < d.rows(); ++g) best = std::min(best, d(g, r));
    total += best;
  }
  return total / static_cast<double>(d.cols());
}

double coverage_from(const Tensor& d) {
  std::vector<char> hit(d.cols(), 0);
  for (std::size_t g = 0; g < d.rows(); ++g) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < d.cols(); ++r) {
      if (d(g, r) < d(g, best)) best = r;
    }
    hit[best] = 1;
  }
  const auto matched = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  return 100.0 * matched / static_cast<double>(d.cols());
}

double mmd(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref, CloudDistance dist) {
  return mmd_from(distance_matrix(gen, ref, dist));
}

double coverage(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref,
                CloudDistance dist) {
  return coverage_from(distance_matrix(gen, ref, dist));
}

MetricReport evaluate_sets(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref,
                           std::size_t grid_res) {
  MetricReport r;
  r.n_gen = gen.size();
  r.n_ref = ref.size();
  r.jsd = jsd(gen, ref, grid_res);
  const Tensor cd = distance_matrix(gen, ref, CloudDistance::kChamfer);
  const Tensor ed = distance_matrix(gen, ref, CloudDistance::kEmd, &r.emd_approximate);
  r.mmd_cd = mmd_from(cd);
  r.cov_cd = coverage_from(cd);
  r.mmd_emd = mmd_from(ed);
  r.cov_emd = coverage_from(ed);
  return r;
}

std::string MetricReport::csv() const {
  return "metric,value\njsd," + fmt(jsd) + "\nmmd_cd," + fmt(mmd_cd) + "\nmmd_emd," +
         fmt(mmd_emd) + "\ncov_cd," + fmt(cov_cd) + "\ncov_emd," + fmt(cov_emd) + "\nn_gen," +
         std::to_string(n_gen) + "\nn_ref," + std::to_string(n_ref) + "\nemd_approximate," +
         (emd_approximate ? "1" : "0") + "\n";
}

std::string MetricReport::text() const {
  std::ostringstream o;
  o << "generated clouds: " << n_gen << ", reference clouds: " << n_ref << '\n'
    << "JSD      " << fmt(jsd) << '\n'
    << "MMD-CD   " << fmt(mmd_cd) << '\n'
    << "MMD-EMD  " << fmt(mmd_emd) << (emd_approximate ? "  (auction approximation)" : "") << '\n'
    << "COV-CD   " << fmt(cov_cd) << " %\n"
    << "COV-EMD  " << fmt(cov_emd) << " %\n";
  return o.str();
}

std::string DisentanglementReport::csv() const {
  return "metric,value\nfrac_modified," + fmt(frac_modified) + "\nfrac_unmodified," +
         fmt(frac_unmodified) + "\nratio," + (ratio ? fmt(*ratio) : std::string("undefined")) +
         "\nthreshold," + fmt(threshold) + "\nn_trials," + std::to_string(n_trials) + "\n";
}

std::string DisentanglementReport::text() const {
  std::ostringstream o;
  o << "threshold        " << fmt(threshold) << '\n'
    << "trials           " << n_trials << '\n'
    << "frac modified    " << fmt(frac_modified) << '\n'
    << "frac unmodified  " << fmt(frac_unmodified) << '\n'
    << "ratio            " << (ratio ? fmt(*ratio) : std::string("undefined")) << '\n';
  return o.str();
}

namespace {

LatentBundle random_bundle(const DisentangleModel& m, Rng& rng) {
  LatentBundle b{Tensor({m.roots, m.z_dim}), MixStrategy::kIndependent};
  for (double& v : b.z.storage()) v = normal(rng);
  return b;
}

LatentBundle resample_root(const LatentBundle& b, std::size_t root, Rng& rng) {
  LatentBundle out = b;
  for (double& v : out.z.row(root)) v = normal(rng);
  return out;
}

Tensor checked_generate(const DisentangleModel& m, const LatentBundle& b) {
  Tensor pts = m.generate(b);
  if (pts.rows() != m.roots * m.points_per_root || pts.cols() != 3) {
    throw DimensionError("disentanglement: generator returned " + shape_str(pts.shape()));
  }
  return pts;
}

double point_dist(const Tensor& a, const Tensor& b, std::size_t p) {
  return std::sqrt(sq_dist(a, p, b, p));
}

}  // namespace

DisentangleModel disentangle_model(const Generator& gen) {
  DisentangleModel m;
  m.roots = gen.config().roots;
  m.points_per_root = gen.config().points_per_root();
  m.z_dim = gen.config().z_dim;
  m.generate = [&gen](const LatentBundle& b) { return gen.generate(b).points; };
  return m;
}

double displacement_threshold(const DisentangleModel& model, std::size_t n_pairs,
                              std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("disentanglement: n_pairs must be positive");
  Rng rng(derive_seed(seed, 1));
  double total = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const Tensor a = checked_generate(model, random_bundle(model, rng));
    const Tensor b = checked_generate(model, random_bundle(model, rng));
    double sum = 0.0;
    for (std::size_t p = 0; p < a.rows(); ++p) sum += point_dist(a, b, p);
    total += sum / static_cast<double>(a.rows());
  }
  return total / static_cast<double>(n_pairs);
}

DisentanglementReport disentanglement(const DisentangleModel& model,
                                      const DisentangleOptions& options) {
  DisentanglementReport rep;
  rep.n_trials = options.n_trials;
  rep.threshold = options.threshold ? *options.threshold
                                    : displacement_threshold(model, options.n_pairs, options.seed);
  Rng rng(derive_seed(options.seed, 2));
  const std::size_t ppr = model.points_per_root;
  double in_flagged = 0, out_flagged = 0, in_total = 0, out_total = 0;
  for (std::size_t t = 0; t < options.n_trials; ++t) {
    const LatentBundle before = random_bundle(model, rng);
    const std::size_t root = uniform_index(rng, model.roots);
    const LatentBundle after = model.resample ? model.resample(before, root, rng)
                                              : resample_root(before, root, rng);
    const Tensor a = checked_generate(model, before);
    const Tensor b = checked_generate(model, after);
    for (std::size_t p = 0; p < a.rows(); ++p) {
      const bool flagged = point_dist(a, b, p) > rep.threshold;
      if (p / ppr == root) {
        in_total += 1;
        in_flagged += flagged;
      } else {
        out_total += 1;
        out_flagged += flagged;
      }
    }
  }
  rep.frac_modified = in_total > 0 ? in_flagged / in_total : 0.0;
  rep.frac_unmodified = out_total > 0 ? out_flagged / out_total : 0.0;
  if (rep.frac_unmodified > 0.0) rep.ratio = rep.frac_modified / rep.frac_unmodified;
  return rep;
}

std::optional<double> read_threshold_cache(const fs::path& path, const ThresholdCache& key) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::map<std::string, std::string> kv;
  std::string k, v;
  while (in >> k && std::getline(in >> std::ws, v)) kv[k] = v;
  try {
    if (kv.at("checkpoint") != key.checkpoint || kv.at("step") != std::to_string(key.step) ||
        kv.at("n_pairs") != std::to_string(key.n_pairs) ||
        kv.at("seed") != std::to_string(key.seed)) {
      return std::nullopt;
    }
    return std::stod(kv.at("threshold"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_threshold_cache(const fs::path& path, const ThresholdCache& e) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", e.threshold);
  out << "checkpoint " << e.checkpoint << "\nstep " << e.step << "\nn_pairs " << e.n_pairs
      << "\nseed " << e.seed << "\nthreshold " << buf << '\n';
}

Heatmap locality_heatmap(const Tensor& before, const Tensor& after) {
  check_cloud(before, "heatmap");
  check_cloud(after, "heatmap");
  if (before.rows() != after.rows()) {
    throw DimensionError("heatmap needs equal point counts, got " + std::to_string(before.rows()) +
                         " and " + std::to_string(after.rows()));
  }
  Heatmap h;
  for (std::size_t p = 0; p < before.rows(); ++p) h.distances.push_back(point_dist(before, after, p));
  auto [lo, hi] = std::minmax_element(h.distances.begin(), h.distances.end());
  h.min = *lo;
  h.max = *hi;
  return h;
}

void export_heatmap(const Heatmap& map, const Tensor& after, const fs::path& path) {
  if (map.distances.size() != after.rows()) {
    throw DimensionError("heatmap export: distance count does not match the cloud");
  }
  save_scalar_cloud({after, map.distances}, path, {"min " + fmt(map.min), "max " + fmt(map.max)});
}

}  // namespace mrgan
