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

// Point clouds on disk use a plain text format:
//
//   # optional comment lines anywhere
//   N
//   x y z [label]      (N rows)
//
// The label column is an integer part index when present.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrgan/tensor.hpp"

namespace mrgan {

class CloudFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PointCloud {
  Tensor points;            // N x 3
  std::vector<int> labels;  // empty, or one part index per point

  PointCloud() = default;
  explicit PointCloud(Tensor pts, std::vector<int> lbl = {});

  std::size_t size() const { return points.rows(); }
  bool has_labels() const { return !labels.empty(); }
};

struct Dataset {
  std::vector<PointCloud> clouds;
  std::string class_name;
  std::size_t n_points = 0;
};

PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

// Rows of "x y z value" with a real-valued fourth column, e.g. heatmaps.
struct ScalarCloud {
  Tensor points;
  std::vector<double> values;
};
ScalarCloud load_scalar_cloud(const std::filesystem::path& path);
void save_scalar_cloud(const ScalarCloud& cloud, const std::filesystem::path& path,
                       const std::vector<std::string>& header_comments = {});

// Centroid to the origin, largest point norm to 1. Coincident points only get
// centered.
PointCloud normalize_unit_sphere(const PointCloud& cloud);

// Uniform without replacement for n <= N, with replacement above.
PointCloud subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

// Cloud files (*.xyz) of a directory in lexicographic order.
std::vector<std::filesystem::path> list_cloud_files(const std::filesystem::path& dir);

// Loads, normalizes and subsamples every cloud file of dir.
Dataset ingest_dataset(const std::filesystem::path& dir, std::size_t n_points,
                       std::uint64_t seed);

}  // namespace mrgan
