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

// HTTP inference service over a trained generator.
//
//   GET  /health          -> {"status":"ok"}
//   GET  /model/info      -> {"R", "points_per_root", "z_dim"}
//   POST /latents/sample  {"seed"?, "id"?, "strategy"?} -> {"id", "z"}
//   POST /generate        GenerateRequest -> GenerateResponse
//   POST /heatmap         {"before": GenerateRequest, "after": GenerateRequest}
//   GET  /ui, /ui/<file>  static assets
//
// GenerateRequest: "bundle" (stored id) or "z" (flat R*z_dim array), plus
// optional "sources" (per-root bundle id or null), "interpolate" ({"root",
// "t", "target"} or a list of them) and "drop_root". Latent arrays are flat,
// row-major per root.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "mrgan/checkpoint.hpp"
#include "mrgan/model.hpp"

namespace mrgan {

inline constexpr const char* kDefaultAddress = "127.0.0.1:8087";

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class StudioService {
 public:
  // ui_dir holds the static mixer assets; a placeholder page is served when
  // it is empty or missing.
  // Unseeded /latents/sample calls draw from a sequence derived from seed.
  explicit StudioService(const Checkpoint& ckpt, std::filesystem::path ui_dir = {},
                         std::uint64_t seed = 0);

  // Thread-safe. Only /latents/sample changes state.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::string& body);

  const Generator& generator() const { return gen_; }
  std::size_t bundle_count() const;

 private:
  HttpResponse info() const;
  HttpResponse sample(const std::string& body);
  HttpResponse generate(const std::string& body) const;
  HttpResponse heatmap(const std::string& body) const;
  HttpResponse static_file(const std::string& path) const;

  Generator gen_;
  std::filesystem::path ui_dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Tensor> bundles_;
  std::uint64_t seed_ = 0;
  std::uint64_t sampled_ = 0;
};

// "host:port" -> (host, port). Throws std::invalid_argument.
std::pair<std::string, int> parse_address(const std::string& addr);

// Blocks serving HTTP until stop is called from another thread (or forever).
// on_ready runs once the socket is bound.
class HttpServer {
 public:
  explicit HttpServer(StudioService& service);
  ~HttpServer();
  // Binds and serves; returns false when the address cannot be bound.
  bool listen(const std::string& host, int port, const std::function<void(int port)>& on_ready = {});
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mrgan
