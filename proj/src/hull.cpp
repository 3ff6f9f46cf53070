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

#include "mrgan/hull.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace mrgan {

namespace {

using Vec3 = Eigen::Vector3d;

struct Face {
  std::array<int, 3> v;
  Vec3 n;
  double d = 0.0;
  std::vector<int> outside;
  bool alive = true;
  std::uint64_t stamp = 0;
};

class Quickhull {
 public:
  explicit Quickhull(const Tensor& points) : n_(static_cast<int>(points.rows())) {
    if (points.rank() != 2 || points.cols() != 3) {
      throw DimensionError("convex_hull3 expects N x 3 points, got " + shape_str(points.shape()));
    }
    if (n_ < 4) throw DegenerateHullError("convex hull needs at least 4 points");
    pts_.reserve(n_);
    double scale = 1.0;
    for (int i = 0; i < n_; ++i) {
      pts_.emplace_back(points(i, 0), points(i, 1), points(i, 2));
      scale = std::max(scale, pts_.back().cwiseAbs().maxCoeff());
    }
    eps_ = kHullEps * scale;
  }

  ConvexHull run() {
    build_simplex();
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (faces_[f].alive && !faces_[f].outside.empty()) add_point(static_cast<int>(f));
    }
    return collect();
  }

 private:
  double dist(const Face& f, int p) const { return f.n.dot(pts_[p]) - f.d; }

  std::uint64_t key(int a, int b) const {
    return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n_) +
           static_cast<std::uint64_t>(b);
  }

  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = n.norm();
    if (len > 0.0) n /= len;
    f.n = n;
    f.d = n.dot(pts_[a]);
    const int id = static_cast<int>(faces_.size());
    faces_.push_back(std::move(f));
    for (int k = 0; k < 3; ++k) {
      auto [it, fresh] = edges_.emplace(key(faces_[id].v[k], faces_[id].v[(k + 1) % 3]), id);
      if (!fresh) throw DegenerateHullError("convex hull lost manifoldness (numerical failure)");
    }
    return id;
  }

  void build_simplex() {
    // Extreme points along the axes; the farthest pair seeds the simplex.
    std::array<int, 6> ext{};
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < 3; ++k) {
        if (pts_[i][k] < pts_[ext[2 * k]][k]) ext[2 * k] = i;
        if (pts_[i][k] > pts_[ext[2 * k + 1]][k]) ext[2 * k + 1] = i;
      }
    }
    int a = 0, b = 0;
    double best = -1.0;
    for (int i : ext) {
      for (int j : ext) {
        const double dd = (pts_[i] - pts_[j]).squaredNorm();
        if (dd > best) best = dd, a = i, b = j;
      }
    }
    if (std::sqrt(best) <= eps_) throw DegenerateHullError("points are coincident");

    const Vec3 dir = (pts_[b] - pts_[a]).normalized();
    int c = -1;
    best = eps_;
    for (int i = 0; i < n_; ++i) {
      const double dd = (pts_[i] - pts_[a]).cross(dir).norm();
      if (dd > best) best = dd, c = i;
    }
    if (c < 0) throw DegenerateHullError("points are collinear");

    const Vec3 pn = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]).normalized();
    int d = -1;
    best = eps_;
    for (int i = 0; i < n_; ++i) {
      const double dd = std::abs(pn.dot(pts_[i] - pts_[a]));
      if (dd > best) best = dd, d = i;
    }
    if (d < 0) throw DegenerateHullError("points are coplanar");

    // Orient so that d lies below face (a,b,c).
    if (pn.dot(pts_[d] - pts_[a]) > 0) std::swap(b, c);
    make_face(a, b, c);
    make_face(a, d, b);
    make_face(b, d, c);
    make_face(c, d, a);

    std::vector<int> rest;
    for (int i = 0; i < n_; ++i) {
      if (i != a && i != b && i != c && i != d) rest.push_back(i);
    }
    assign(rest, 0);
  }

  // Gives each point to the face (from index first on) it lies farthest above.
  void assign(const std::vector<int>& candidates, std::size_t first) {
    for (int p : candidates) {
      int best_face = -1;
      double best = eps_;
      for (std::size_t f = first; f < faces_.size(); ++f) {
        if (!faces_[f].alive) continue;
        const double dd = dist(faces_[f], p);
        if (dd > best) best = dd, best_face = static_cast<int>(f);
      }
      if (best_face >= 0) faces_[best_face].outside.push_back(p);
    }
  }

  void add_point(int start) {
    const Face& sf = faces_[start];
    int eye = sf.outside.front();
    double far = dist(sf, eye);
    for (int p : sf.outside) {
      const double dd = dist(sf, p);
      if (dd > far) far = dd, eye = p;
    }

    const std::uint64_t stamp = ++stamp_;
    std::vector<int> visible{start};
    faces_[start].stamp = stamp;
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t i = 0; i < visible.size(); ++i) {
      const Face& f = faces_[visible[i]];
      for (int k = 0; k < 3; ++k) {
        const int u = f.v[k], w = f.v[(k + 1) % 3];
        const int nb = edges_.at(key(w, u));
        if (faces_[nb].stamp == stamp) continue;
        if (dist(faces_[nb], eye) > eps_) {
          faces_[nb].stamp = stamp;
          visible.push_back(nb);
        } else {
          horizon.emplace_back(u, w);
        }
      }
    }
    // A face judged visible after its edge was recorded as horizon would leave
    // a stale entry; drop those.
    std::erase_if(horizon, [&](const std::pair<int, int>& e) {
      return faces_[edges_.at(key(e.second, e.first))].stamp == stamp;
    });

    std::vector<int> orphans;
    for (int fid : visible) {
      Face& f = faces_[fid];
      for (int p : f.outside) {
        if (p != eye) orphans.push_back(p);
      }
      f.outside.clear();
      f.outside.shrink_to_fit();
      f.alive = false;
      for (int k = 0; k < 3; ++k) edges_.erase(key(f.v[k], f.v[(k + 1) % 3]));
    }
    const std::size_t first_new = faces_.size();
    for (auto [u, w] : horizon) make_face(u, w, eye);
    assign(orphans, first_new);
  }

  ConvexHull collect() const {
    ConvexHull h;
    std::vector<int> remap(n_, -1);
    for (const Face& f : faces_) {
      if (!f.alive) continue;
      std::array<int, 3> tri{};
      for (int k = 0; k < 3; ++k) {
        int& slot = remap[f.v[k]];
        if (slot < 0) {
          slot = static_cast<int>(h.source_index.size());
          h.source_index.push_back(static_cast<std::size_t>(f.v[k]));
        }
        tri[k] = slot;
      }
      h.faces.push_back(tri);
      h.normals.push_back({f.n[0], f.n[1], f.n[2]});
      h.offsets.push_back(f.d);
    }
    h.vertices = Tensor({h.source_index.size(), 3});
    for (std::size_t i = 0; i < h.source_index.size(); ++i) {
      for (int k = 0; k < 3; ++k) h.vertices(i, k) = pts_[h.source_index[i]][k];
    }
    return h;
  }

  int n_;
  double eps_ = kHullEps;
  std::vector<Vec3> pts_;
  std::vector<Face> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::uint64_t stamp_ = 0;
};

Vec3 to_vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

void sample_sphere(const Sphere& s, std::size_t count, Rng& rng, Tensor& out, std::size_t row) {
  for (std::size_t i = 0; i < count; ++i, ++row) {
    Vec3 g;
    do {
      g = Vec3(normal(rng), normal(rng), normal(rng));
    } while (g.norm() < 1e-12);
    const Vec3 p = to_vec(s.center) + s.radius * g.normalized();
    for (int k = 0; k < 3; ++k) out(row, k) = p[k];
  }
}

void sample_box(const Box& b, std::size_t count, Rng& rng, Tensor& out, std::size_t row) {
  const auto& h = b.half_extents;
  // Face pair k is normal to axis k with area 4 * h[u] * h[v].
  const std::array<double, 3> pair_area{h[1] * h[2], h[0] * h[2], h[0] * h[1]};
  const double total = pair_area[0] + pair_area[1] + pair_area[2];
  for (std::size_t i = 0; i < count; ++i, ++row) {
    double pick = uniform(rng, 0.0, total);
    int axis = 0;
    while (axis < 2 && pick >= pair_area[axis]) pick -= pair_area[axis++];
    const double sign = uniform(rng) < 0.5 ? -1.0 : 1.0;
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      p[k] = k == axis ? sign * h[k] : uniform(rng, -h[k], h[k]);
    }
    p += to_vec(b.center);
    for (int k = 0; k < 3; ++k) out(row, k) = p[k];
  }
}

}  // namespace

ConvexHull convex_hull3(const Tensor& points) { return Quickhull(points).run(); }

double distance_to_hull(const Tensor& points, const ConvexHull& hull) {
  const std::size_t n = points.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = INFINITY;
    for (std::size_t f = 0; f < hull.faces.size(); ++f) {
      const auto& nv = hull.normals[f];
      const double dd =
          hull.offsets[f] - (nv[0] * points(i, 0) + nv[1] * points(i, 1) + nv[2] * points(i, 2));
      best = std::min(best, dd);
    }
    total += std::max(best, 0.0);
  }
  return total / static_cast<double>(n);
}

double distance_to_hull(const Tensor& points) { return distance_to_hull(points, convex_hull3(points)); }

double distance_to_hull_jittered(const Tensor& points, std::uint64_t seed) {
  try {
    return distance_to_hull(points);
  } catch (const DegenerateHullError&) {
    Rng rng(seed);
    Tensor jittered = points;
    for (double& v : jittered.storage()) v += uniform(rng, -1e-6, 1e-6);
    return distance_to_hull(jittered);
  }
}

double surface_area(const Primitive& p) {
  if (const auto* s = std::get_if<Sphere>(&p)) {
    return 4.0 * std::numbers::pi * s->radius * s->radius;
  }
  const auto& h = std::get<Box>(p).half_extents;
  return 8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2]);
}

PointCloud sample_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.primitives.empty()) throw std::invalid_argument("synthetic spec has no primitives");
  if (spec.points_per_cloud == 0) throw std::invalid_argument("points_per_cloud must be positive");
  for (const auto& p : spec.primitives) {
    const bool ok = std::visit(
        [](const auto& q) {
          if constexpr (std::is_same_v<std::decay_t<decltype(q)>, Sphere>) {
            return q.radius > 0.0;
          } else {
            return q.half_extents[0] > 0.0 && q.half_extents[1] > 0.0 && q.half_extents[2] > 0.0;
          }
        },
        p);
    if (!ok) throw std::invalid_argument("primitive sizes must be positive");
  }

  // Largest-remainder allocation so the counts sum to points_per_cloud.
  const std::size_t m = spec.primitives.size();
  std::vector<double> area(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total += area[i] = surface_area(spec.primitives[i]);
  std::vector<std::size_t> count(m);
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t used = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double exact = static_cast<double>(spec.points_per_cloud) * area[i] / total;
    count[i] = static_cast<std::size_t>(std::floor(exact));
    used += count[i];
    remainder.emplace_back(-(exact - std::floor(exact)), i);
  }
  std::stable_sort(remainder.begin(), remainder.end());
  for (std::size_t k = 0; used < spec.points_per_cloud; ++k, ++used) ++count[remainder[k % m].second];

  Rng rng(seed);
  Tensor pts({spec.points_per_cloud, 3});
  std::size_t row = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (const auto* s = std::get_if<Sphere>(&spec.primitives[i])) {
      sample_sphere(*s, count[i], rng, pts, row);
    } else {
      sample_box(std::get<Box>(spec.primitives[i]), count[i], rng, pts, row);
    }
    row += count[i];
  }
  return PointCloud(std::move(pts));
}

SyntheticSpec random_synthetic_spec(Rng& rng, std::size_t points_per_cloud) {
  SyntheticSpec spec;
  spec.points_per_cloud = points_per_cloud;
  const std::size_t k = 1 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < k; ++i) {
    std::array<double, 3> c{};
    for (double& v : c) v = uniform(rng, -0.5, 0.5);
    if (uniform(rng) < 0.5) {
      spec.primitives.emplace_back(Sphere{c, uniform(rng, 0.2, 0.6)});
    } else {
      std::array<double, 3> h{};
      for (double& v : h) v = uniform(rng, 0.2, 0.6);
      spec.primitives.emplace_back(Box{c, h});
    }
  }
  return spec;
}

HullSampler::HullSampler(std::size_t n_points, HullSource source)
    : n_points_(n_points), source_(std::move(source)) {
  if (n_points_ < 4) throw std::invalid_argument("hull samples need at least 4 points");
  if (source_.kind != HullSourceKind::kSynthetic) {
    for (const auto& f : list_cloud_files(source_.dir)) {
      pool_.push_back(normalize_unit_sphere(load_cloud(f)));
    }
    if (pool_.empty()) throw IoError("no cloud files in " + source_.dir.string());
  }
}

HullSample HullSampler::sample(std::uint64_t seed, std::uint64_t index) const {
  Rng rng(derive_seed(seed, index));
  for (int attempt = 0; attempt < 100; ++attempt) {
    bool from_dir = source_.kind == HullSourceKind::kDirectory ||
                    (source_.kind == HullSourceKind::kMixed && uniform(rng) < 0.5);
    PointCloud cloud;
    if (from_dir) {
      const PointCloud& src = pool_[uniform_index(rng, pool_.size())];
      cloud = PointCloud(subsample(src, n_points_, rng()).points);
    } else {
      cloud = sample_synthetic(random_synthetic_spec(rng, n_points_), rng());
    }
    try {
      const double label = distance_to_hull(cloud.points);
      return {std::move(cloud), label};
    } catch (const DegenerateHullError&) {
      continue;
    }
  }
  throw DegenerateHullError("hull sampler kept drawing degenerate clouds");
}

std::vector<HullSample> make_hull_dataset(std::size_t count, std::size_t n_points,
                                          std::uint64_t seed, const HullSource& source) {
  if (count == 0) throw std::invalid_argument("hull dataset count must be at least 1");
  HullSampler sampler(n_points, source);
  std::vector<HullSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.sample(seed, i));
  return out;
}

void write_hull_dataset(const std::vector<HullSample>& samples, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream index(dir / "index.txt");
  if (!index) throw IoError("cannot write " + (dir / "index.txt").string());
  char buf[64];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "sample_%06zu.xyz", i);
    save_cloud(samples[i].cloud, dir / buf);
    index << buf;
    std::snprintf(buf, sizeof buf, " %.17g\n", samples[i].label);
    index << buf;
  }
  if (!index) throw IoError("failed writing hull index in " + dir.string());
}

std::vector<HullSample> read_hull_dataset(const fs::path& dir) {
  std::ifstream index(dir / "index.txt");
  if (!index) throw IoError("cannot open " + (dir / "index.txt").string());
  std::vector<HullSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name;
    double label = 0.0;
    if (!(ls >> name >> label)) {
      throw CloudFormatError((dir / "index.txt").string() + ":" + std::to_string(line_no) +
                             ": expected 'filename label'");
    }
    out.push_back({load_cloud(dir / name), label});
  }
  return out;
}

}  // namespace mrgan
