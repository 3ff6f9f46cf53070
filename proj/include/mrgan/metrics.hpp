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

// Evaluation metrics over point clouds (N x 3 tensors) and sets of clouds.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrgan/model.hpp"
#include "mrgan/rng.hpp"
#include "mrgan/tensor.hpp"

namespace mrgan {

// Mean squared nearest-neighbour distance, summed over both directions.
double chamfer(const Tensor& a, const Tensor& b);

inline constexpr std::size_t kExactEmdLimit = 512;
inline constexpr double kAuctionRelTol = 1e-3;

struct EmdResult {
  double value = 0.0;
  bool approximate = false;  // auction solver was used
};

// Mean Euclidean distance under the optimal bijection. Exact (Hungarian) up to
// kExactEmdLimit points, auction above.
EmdResult emd_detailed(const Tensor& a, const Tensor& b);
inline double emd(const Tensor& a, const Tensor& b) { return emd_detailed(a, b).value; }

// Minimum-cost perfect matching of a square cost matrix; returns the column
// assigned to every row.
std::vector<std::size_t> hungarian(const Tensor& cost);
// Auction assignment, total cost within rel_tol of the optimum.
std::vector<std::size_t> auction(const Tensor& cost, double rel_tol = kAuctionRelTol);

inline constexpr std::size_t kJsdGrid = 28;

// JSD in nats between two distributions of equal length; 0 log 0 = 0.
double jsd_distributions(const std::vector<double>& p, const std::vector<double>& q);
// Occupancy counts of every point of the set on a grid_res^3 grid over
// [-1,1]^3 (outside points go to the nearest cell).
std::vector<double> occupancy(const std::vector<Tensor>& set, std::size_t grid_res);
double jsd(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref,
           std::size_t grid_res = kJsdGrid);

enum class CloudDistance { kChamfer, kEmd };

// gen.size() x ref.size() matrix of pair distances, computed in parallel.
Tensor distance_matrix(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref,
                       CloudDistance dist, bool* approximate = nullptr);

// Mean over ref of the nearest gen distance. d is gen x ref.
double mmd_from(const Tensor& d);
// Percentage of ref clouds that are the nearest ref of some gen cloud.
double coverage_from(const Tensor& d);

double mmd(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref, CloudDistance dist);
double coverage(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref,
                CloudDistance dist);

struct MetricReport {
  double jsd = 0.0;
  double mmd_cd = 0.0;
  double mmd_emd = 0.0;
  double cov_cd = 0.0;
  double cov_emd = 0.0;
  std::size_t n_gen = 0;
  std::size_t n_ref = 0;
  bool emd_approximate = false;

  std::string csv() const;
  std::string text() const;
};

MetricReport evaluate_sets(const std::vector<Tensor>& gen, const std::vector<Tensor>& ref,
                           std::size_t grid_res = kJsdGrid);

struct DisentanglementReport {
  double frac_modified = 0.0;
  double frac_unmodified = 0.0;
  std::optional<double> ratio;  // undefined when frac_unmodified is 0
  double threshold = 0.0;
  std::size_t n_trials = 0;

  std::string csv() const;
  std::string text() const;
};

// What the disentanglement harness needs from a model. resample returns the
// bundle with root r's latent replaced; the default draws a fresh N(0,1) code.
struct DisentangleModel {
  std::size_t roots = 0;
  std::size_t points_per_root = 0;
  std::size_t z_dim = 96;
  std::function<Tensor(const LatentBundle&)> generate;
  std::function<LatentBundle(const LatentBundle&, std::size_t root, Rng&)> resample;
};

DisentangleModel disentangle_model(const Generator& gen);

struct DisentangleOptions {
  std::size_t n_pairs = 2500;
  std::size_t n_trials = 1000;
  std::uint64_t seed = 1;
  std::optional<double> threshold;  // cached value; computed when empty
};

// Mean over n_pairs independent shape pairs of the mean per-point distance
// under index correspondence.
double displacement_threshold(const DisentangleModel& model, std::size_t n_pairs,
                              std::uint64_t seed);

DisentanglementReport disentanglement(const DisentangleModel& model,
                                      const DisentangleOptions& options);

// Threshold cache file: one "key value" line per field; reused only when
// every key matches.
struct ThresholdCache {
  std::string checkpoint;
  std::uint64_t step = 0;
  std::size_t n_pairs = 0;
  std::uint64_t seed = 0;
  double threshold = 0.0;
};
std::optional<double> read_threshold_cache(const std::filesystem::path& path,
                                           const ThresholdCache& key);
void write_threshold_cache(const std::filesystem::path& path, const ThresholdCache& entry);

struct Heatmap {
  std::vector<double> distances;
  double min = 0.0;
  double max = 0.0;
};

// Per-point distances between equally sized clouds.
Heatmap locality_heatmap(const Tensor& before, const Tensor& after);
// Cloud file of "after" with the distance as fourth column and min/max in
// comment lines.
void export_heatmap(const Heatmap& map, const Tensor& after, const std::filesystem::path& path);

}  // namespace mrgan
