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

#include "mrgan/pointcloud.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "mrgan/rng.hpp"

namespace fs = std::filesystem;

namespace mrgan {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_skippable(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

// Shared reader: returns rows of 3 or 4 tokens after the count header.
struct RawCloud {
  std::vector<double> xyz;
  std::vector<std::string_view> fourth;
  std::vector<std::size_t> line_of_row;
  std::string text;
};

void parse_raw(const fs::path& path, RawCloud& raw, bool& has_fourth) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  raw.text = ss.str();
  const std::string name = path.string();
  auto fail = [&](std::size_t line, const std::string& what) -> void {
    throw CloudFormatError(name + ":" + std::to_string(line) + ": " + what);
  };

  std::string_view text = raw.text;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  long long expected = -1;
  has_fourth = false;
  std::size_t rows = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (is_skippable(line)) {
      if (end == text.size()) break;
      continue;
    }
    auto toks = split_ws(line);
    if (expected < 0) {
      if (toks.size() != 1 || !parse_number(toks[0], expected) || expected < 0) {
        fail(line_no, "expected a point count");
      }
      if (expected == 0) throw CloudFormatError(name + ": empty cloud");
    } else {
      if (static_cast<long long>(rows) >= expected) {
        fail(line_no, "more rows than the declared count " + std::to_string(expected));
      }
      if (toks.size() != 3 && toks.size() != 4) fail(line_no, "expected 3 or 4 columns");
      if (rows == 0) has_fourth = toks.size() == 4;
      if ((toks.size() == 4) != has_fourth) fail(line_no, "inconsistent column count");
      for (int k = 0; k < 3; ++k) {
        double v;
        if (!parse_number(toks[k], v) || !std::isfinite(v)) {
          fail(line_no, "bad coordinate '" + std::string(toks[k]) + "'");
        }
        raw.xyz.push_back(v);
      }
      if (has_fourth) raw.fourth.push_back(toks[3]);
      raw.line_of_row.push_back(line_no);
      ++rows;
    }
    if (end == text.size()) break;
  }
  if (expected < 0) throw CloudFormatError(name + ": empty cloud");
  if (static_cast<long long>(rows) != expected) {
    throw CloudFormatError(name + ": declared " + std::to_string(expected) + " points but found " +
                           std::to_string(rows));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

PointCloud::PointCloud(Tensor pts, std::vector<int> lbl)
    : points(std::move(pts)), labels(std::move(lbl)) {
  if (points.rank() != 2 || points.cols() != 3) {
    throw DimensionError("point cloud must be Nx3, got " + shape_str(points.shape()));
  }
  if (!labels.empty() && labels.size() != points.rows()) {
    throw DimensionError("label count does not match point count");
  }
}

PointCloud load_cloud(const fs::path& path) {
  RawCloud raw;
  bool has_fourth = false;
  parse_raw(path, raw, has_fourth);
  const std::size_t n = raw.xyz.size() / 3;
  std::vector<int> labels;
  if (has_fourth) {
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      int v;
      if (!parse_number(raw.fourth[i], v) || v < 0) {
        throw CloudFormatError(path.string() + ":" + std::to_string(raw.line_of_row[i]) +
                               ": label must be a non-negative integer");
      }
      labels.push_back(v);
    }
  }
  return PointCloud(Tensor({n, 3}, std::move(raw.xyz)), std::move(labels));
}

void save_cloud(const PointCloud& cloud, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << cloud.size() << '\n';
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out << fmt9(cloud.points(i, 0)) << ' ' << fmt9(cloud.points(i, 1)) << ' '
        << fmt9(cloud.points(i, 2));
    if (cloud.has_labels()) out << ' ' << cloud.labels[i];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ScalarCloud load_scalar_cloud(const fs::path& path) {
  RawCloud raw;
  bool has_fourth = false;
  parse_raw(path, raw, has_fourth);
  if (!has_fourth) throw CloudFormatError(path.string() + ": expected a value column");
  const std::size_t n = raw.xyz.size() / 3;
  ScalarCloud sc{Tensor({n, 3}, std::move(raw.xyz)), {}};
  for (std::size_t i = 0; i < n; ++i) {
    double v;
    if (!parse_number(raw.fourth[i], v)) {
      throw CloudFormatError(path.string() + ":" + std::to_string(raw.line_of_row[i]) +
                             ": bad value column");
    }
    sc.values.push_back(v);
  }
  return sc;
}

void save_scalar_cloud(const ScalarCloud& cloud, const fs::path& path,
                       const std::vector<std::string>& header_comments) {
  std::ofstream out = open_out(path);
  for (const auto& c : header_comments) out << "# " << c << '\n';
  const std::size_t n = cloud.points.rows();
  out << n << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << fmt9(cloud.points(i, 0)) << ' ' << fmt9(cloud.points(i, 1)) << ' '
        << fmt9(cloud.points(i, 2)) << ' ' << fmt9(cloud.values[i]) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  double c[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) c[k] += cloud.points(i, k);
  }
  for (double& v : c) v /= static_cast<double>(n);
  Tensor pts({n, 3});
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int k = 0; k < 3; ++k) {
      pts(i, k) = cloud.points(i, k) - c[k];
      sq += pts(i, k) * pts(i, k);
    }
    max_norm = std::max(max_norm, std::sqrt(sq));
  }
  if (max_norm > 0.0) {
    for (double& v : pts.storage()) v /= max_norm;
  }
  return PointCloud(std::move(pts), cloud.labels);
}

PointCloud subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("subsample: n must be at least 1");
  const std::size_t total = cloud.size();
  Rng rng(seed);
  std::vector<std::size_t> pick;
  if (n <= total) {
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + uniform_index(rng, total - i);
      std::swap(idx[i], idx[j]);
    }
    pick.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    for (std::size_t i = 0; i < n; ++i) pick.push_back(uniform_index(rng, total));
  }
  Tensor pts({n, 3});
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) pts(i, k) = cloud.points(pick[i], k);
    if (cloud.has_labels()) labels.push_back(cloud.labels[pick[i]]);
  }
  return PointCloud(std::move(pts), std::move(labels));
}

std::vector<fs::path> list_cloud_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xyz") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

Dataset ingest_dataset(const fs::path& dir, std::size_t n_points, std::uint64_t seed) {
  auto files = list_cloud_files(dir);
  if (files.empty()) throw IoError("no cloud files in " + dir.string());
  Dataset ds;
  ds.class_name = dir.filename().string();
  if (ds.class_name.empty()) ds.class_name = dir.parent_path().filename().string();
  ds.n_points = n_points;
  for (std::size_t i = 0; i < files.size(); ++i) {
    PointCloud c;
    try {
      c = load_cloud(files[i]);
    } catch (const CloudFormatError& e) {
      throw CloudFormatError(std::string("while ingesting ") + files[i].filename().string() +
                             ": " + e.what());
    }
    ds.clouds.push_back(subsample(normalize_unit_sphere(c), n_points, derive_seed(seed, i)));
  }
  return ds;
}

}  // namespace mrgan
