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

// Convex hulls of 3D point sets, the distance-to-hull measure and the
// synthetic sphere/box clouds used to train the hull-distance network.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <variant>
#include <vector>

#include "mrgan/pointcloud.hpp"
#include "mrgan/rng.hpp"

namespace mrgan {

class DegenerateHullError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kHullEps = 1e-9;

struct ConvexHull {
  Tensor vertices;                          // V x 3
  std::vector<std::size_t> source_index;    // input row of each vertex
  std::vector<std::array<int, 3>> faces;    // counter-clockwise seen from outside
  std::vector<std::array<double, 3>> normals;
  std::vector<double> offsets;              // n . x = d on the face plane

  std::size_t num_edges() const { return faces.size() * 3 / 2; }
};

// Quickhull. Throws DegenerateHullError for fewer than 4 points or when the
// points are coplanar, collinear or coincident within kHullEps.
ConvexHull convex_hull3(const Tensor& points);

// Mean over points of the distance to the nearest face plane.
double distance_to_hull(const Tensor& points);
double distance_to_hull(const Tensor& points, const ConvexHull& hull);

// As distance_to_hull, but a degenerate cloud is retried once after adding
// uniform jitter of magnitude 1e-6.
double distance_to_hull_jittered(const Tensor& points, std::uint64_t seed);

struct Sphere {
  std::array<double, 3> center{};
  double radius = 1.0;
};

struct Box {
  std::array<double, 3> center{};
  std::array<double, 3> half_extents{0.5, 0.5, 0.5};
};

using Primitive = std::variant<Sphere, Box>;

struct SyntheticSpec {
  std::vector<Primitive> primitives;
  std::size_t points_per_cloud = 256;
};

double surface_area(const Primitive& p);

// Uniform over the union of primitive surfaces; points are split between
// primitives in proportion to surface area.
PointCloud sample_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// One to three spheres or boxes, centers in [-0.5,0.5]^3, radii and
// half-extents in [0.2,0.6].
SyntheticSpec random_synthetic_spec(Rng& rng, std::size_t points_per_cloud);

enum class HullSourceKind { kSynthetic, kDirectory, kMixed };

struct HullSource {
  HullSourceKind kind = HullSourceKind::kSynthetic;
  std::filesystem::path dir;  // cloud directory for kDirectory and kMixed
};

struct HullSample {
  PointCloud cloud;
  double label = 0.0;
};

// Produces (cloud, distance_to_hull) pairs. Sample i depends only on seed and
// i. Degenerate draws are re-drawn.
class HullSampler {
 public:
  HullSampler(std::size_t n_points, HullSource source);

  HullSample sample(std::uint64_t seed, std::uint64_t index) const;

 private:
  std::size_t n_points_;
  HullSource source_;
  std::vector<PointCloud> pool_;
};

std::vector<HullSample> make_hull_dataset(std::size_t count, std::size_t n_points,
                                          std::uint64_t seed, const HullSource& source);

// One cloud file per sample plus "index.txt" of "filename label" lines.
void write_hull_dataset(const std::vector<HullSample>& samples, const std::filesystem::path& dir);
std::vector<HullSample> read_hull_dataset(const std::filesystem::path& dir);

}  // namespace mrgan
