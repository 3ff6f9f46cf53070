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

#include "mrgan/service.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mrgan/metrics.hpp"
#include "mrgan/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mrgan {

namespace {

struct HttpError {
  int status;
  std::string message;
};

HttpResponse json_response(const json& j, int status = 200) {
  return {status, "application/json", j.dump()};
}

HttpResponse error_response(int status, const std::string& msg) {
  return json_response({{"error", msg}}, status);
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw HttpError{400, "malformed JSON body"};
  if (!j.is_object()) throw HttpError{400, "request body must be a JSON object"};
  return j;
}

std::size_t root_index(const json& j, const char* what, std::size_t roots) {
  if (!j.is_number_integer() || j.get<long long>() < 0 || j.get<long long>() >= static_cast<long long>(roots)) {
    throw HttpError{400, std::string(what) + " must be a root index in [0, " + std::to_string(roots) + ")"};
  }
  return j.get<std::size_t>();
}

const std::string& string_field(const json& j, const char* what) {
  if (!j.is_string()) throw HttpError{400, std::string(what) + " must be a string"};
  return j.get_ref<const std::string&>();
}

json flat(const Tensor& t) { return json(t.storage()); }

const char* content_type_for(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

constexpr const char* kPlaceholderPage =
    "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>mrgan studio</title></head>\n"
    "<body><h1>mrgan studio</h1><p>No UI bundle is installed. Start the service with --ui-dir "
    "pointing at the built mixer assets. The JSON API is live: try <a href=\"/model/info\">"
    "/model/info</a>.</p></body></html>\n";

struct Generated {
  PartitionedCloud cloud;
  std::vector<std::string> sources;
  std::optional<std::size_t> dropped;
};

}  // namespace

StudioService::StudioService(const Checkpoint& ckpt, fs::path ui_dir, std::uint64_t seed)
    : gen_(load_generator(ckpt)), ui_dir_(std::move(ui_dir)), seed_(seed) {}

std::size_t StudioService::bundle_count() const {
  std::shared_lock lock(mu_);
  return bundles_.size();
}

HttpResponse StudioService::handle(const std::string& method, const std::string& path,
                                   const std::string& body) {
  try {
    const bool get = method == "GET", post = method == "POST";
    if (path == "/health") {
      if (!get) return error_response(405, "use GET");
      return json_response({{"status", "ok"}});
    }
    if (path == "/model/info") {
      if (!get) return error_response(405, "use GET");
      return info();
    }
    if (path == "/latents/sample") {
      if (!post) return error_response(405, "use POST");
      return sample(body);
    }
    if (path == "/generate") {
      if (!post) return error_response(405, "use POST");
      return generate(body);
    }
    if (path == "/heatmap") {
      if (!post) return error_response(405, "use POST");
      return heatmap(body);
    }
    if (path == "/ui" || path.rfind("/ui/", 0) == 0) {
      if (!get) return error_response(405, "use GET");
      return static_file(path);
    }
    return error_response(404, "no route " + path);
  } catch (const HttpError& e) {
    return error_response(e.status, e.message);
  } catch (const json::exception& e) {
    return error_response(400, std::string("bad request: ") + e.what());
  } catch (const NumericError& e) {
    return error_response(500, e.what());
  } catch (const std::exception& e) {
    spdlog::error("{} {}: {}", method, path, e.what());
    return error_response(500, e.what());
  }
}

HttpResponse StudioService::info() const {
  const auto& c = gen_.config();
  return json_response({{"R", c.roots}, {"points_per_root", c.points_per_root()}, {"z_dim", c.z_dim}});
}

HttpResponse StudioService::sample(const std::string& body) {
  const json req = parse_body(body);
  const auto& c = gen_.config();
  MixStrategy strategy = MixStrategy::kIndependent;
  bool random_strategy = false;
  if (req.contains("strategy")) {
    const std::string& s = string_field(req["strategy"], "strategy");
    if (s == "uniform") strategy = MixStrategy::kUniform;
    else if (s == "half") strategy = MixStrategy::kHalf;
    else if (s == "single") strategy = MixStrategy::kSingle;
    else if (s == "independent") strategy = MixStrategy::kIndependent;
    else if (s == "random") random_strategy = true;
    else throw HttpError{400, "unknown strategy '" + s + "'"};
  }
  std::optional<std::uint64_t> seed;
  if (req.contains("seed")) {
    if (!req["seed"].is_number_unsigned()) throw HttpError{400, "seed must be a non-negative integer"};
    seed = req["seed"].get<std::uint64_t>();
  }
  std::optional<std::string> id;
  if (req.contains("id")) {
    id = string_field(req["id"], "id");
    if (id->empty()) throw HttpError{400, "id must not be empty"};
  }

  std::unique_lock lock(mu_);
  const std::uint64_t n = sampled_++;
  Rng rng(seed ? *seed : derive_seed(seed_, n));
  LatentBundle b = random_strategy ? sample_mixing(c.roots, rng, c.z_dim)
                                   : sample_mixing(c.roots, strategy, rng, c.z_dim);
  const std::string key = id ? *id : "b" + std::to_string(n);
  if (bundles_.count(key)) throw HttpError{409, "bundle id '" + key + "' already exists"};
  bundles_.emplace(key, b.z);
  lock.unlock();
  return json_response({{"id", key}, {"z", flat(b.z)}, {"R", c.roots}, {"z_dim", c.z_dim},
                        {"strategy", to_string(b.strategy)}});
}

namespace {

class RequestResolver {
 public:
  RequestResolver(const Generator& gen, const std::map<std::string, Tensor>& bundles)
      : gen_(gen), bundles_(bundles) {}

  const Tensor& bundle(const std::string& id) const {
    auto it = bundles_.find(id);
    if (it == bundles_.end()) throw HttpError{404, "unknown bundle id '" + id + "'"};
    return it->second;
  }

  // Latents and per-root annotations of a request.
  std::pair<Tensor, std::vector<std::string>> latents(const json& req) const {
    if (!req.is_object()) throw HttpError{400, "generate request must be an object"};
    const auto& c = gen_.config();
    const std::size_t roots = c.roots, zd = c.z_dim;
    Tensor z;
    std::vector<std::string> src(roots);
    if (req.contains("bundle")) {
      const std::string& id = string_field(req["bundle"], "bundle");
      z = bundle(id);
      std::fill(src.begin(), src.end(), id);
    } else if (req.contains("z")) {
      const json& arr = req["z"];
      if (!arr.is_array()) throw HttpError{400, "z must be a flat number array"};
      if (arr.size() != roots * zd) {
        throw HttpError{409, "latent length " + std::to_string(arr.size()) + " does not match " +
                                 std::to_string(roots) + " x " + std::to_string(zd)};
      }
      std::vector<double> v;
      v.reserve(arr.size());
      for (const auto& x : arr) {
        if (!x.is_number()) throw HttpError{400, "z must contain only numbers"};
        v.push_back(x.get<double>());
      }
      z = Tensor({roots, zd}, std::move(v));
      std::fill(src.begin(), src.end(), "explicit");
    } else {
      throw HttpError{400, "request needs \"bundle\" or \"z\""};
    }

    if (req.contains("sources") && !req["sources"].is_null()) {
      const json& s = req["sources"];
      if (!s.is_array()) throw HttpError{400, "sources must be an array"};
      if (s.size() != roots) {
        throw HttpError{409, "sources has " + std::to_string(s.size()) + " entries for " +
                                 std::to_string(roots) + " roots"};
      }
      for (std::size_t r = 0; r < roots; ++r) {
        if (s[r].is_null()) continue;
        const std::string& id = string_field(s[r], "sources entry");
        const Tensor& other = bundle(id);
        std::copy_n(other.row(r).begin(), zd, z.row(r).begin());
        src[r] = id;
      }
    }

    if (req.contains("interpolate") && !req["interpolate"].is_null()) {
      json list = req["interpolate"];
      if (list.is_object()) list = json::array({list});
      if (!list.is_array()) throw HttpError{400, "interpolate must be an object or array"};
      for (const auto& it : list) {
        if (!it.is_object() || !it.contains("root") || !it.contains("t") || !it.contains("target")) {
          throw HttpError{400, "interpolate needs root, t and target"};
        }
        const std::size_t r = root_index(it["root"], "interpolate.root", roots);
        if (!it["t"].is_number()) throw HttpError{400, "interpolate.t must be a number"};
        const double t = std::clamp(it["t"].get<double>(), 0.0, 1.0);
        const std::string& id = string_field(it["target"], "interpolate.target");
        const Tensor& target = bundle(id);
        for (std::size_t k = 0; k < zd; ++k) z(r, k) = (1.0 - t) * z(r, k) + t * target(r, k);
        std::ostringstream a;
        a << src[r] << "->" << id << "@" << t;
        src[r] = a.str();
      }
    }
    return {std::move(z), std::move(src)};
  }

  Generated run(const json& req) const {
    auto [z, src] = latents(req);
    Generated g;
    g.cloud = gen_.generate(LatentBundle{std::move(z), MixStrategy::kIndependent});
    if (!g.cloud.points.all_finite()) throw NumericError("generator produced non-finite points");
    g.sources = std::move(src);
    if (req.contains("drop_root") && !req["drop_root"].is_null()) {
      g.dropped = root_index(req["drop_root"], "drop_root", gen_.config().roots);
    }
    return g;
  }

 private:
  const Generator& gen_;
  const std::map<std::string, Tensor>& bundles_;
};

Tensor visible_points(const Generated& g) {
  if (!g.dropped) return g.cloud.points;
  const std::size_t ppr = g.cloud.points_per_root;
  const std::size_t n = g.cloud.points.rows() - ppr;
  Tensor out({n, 3});
  std::size_t o = 0;
  for (std::size_t p = 0; p < g.cloud.points.rows(); ++p) {
    if (p / ppr == *g.dropped) continue;
    for (int k = 0; k < 3; ++k) out(o, k) = g.cloud.points(p, k);
    ++o;
  }
  return out;
}

}  // namespace

HttpResponse StudioService::generate(const std::string& body) const {
  const json req = parse_body(body);
  std::shared_lock lock(mu_);
  Generated g = RequestResolver(gen_, bundles_).run(req);
  lock.unlock();
  const Tensor pts = visible_points(g);
  json out = {{"R", gen_.config().roots},
              {"points_per_root", g.cloud.points_per_root},
              {"num_points", pts.rows()},
              {"points", flat(pts)},
              {"sources", g.sources},
              {"dropped", g.dropped ? json(*g.dropped) : json(nullptr)}};
  return json_response(out);
}

HttpResponse StudioService::heatmap(const std::string& body) const {
  const json req = parse_body(body);
  if (!req.contains("before") || !req.contains("after")) {
    throw HttpError{400, "heatmap needs \"before\" and \"after\" requests"};
  }
  std::shared_lock lock(mu_);
  RequestResolver resolver(gen_, bundles_);
  Generated a = resolver.run(req["before"]);
  Generated b = resolver.run(req["after"]);
  lock.unlock();
  const Tensor pa = visible_points(a), pb = visible_points(b);
  if (pa.rows() != pb.rows()) {
    throw HttpError{409, "before and after have different point counts"};
  }
  Heatmap h = locality_heatmap(pa, pb);
  return json_response({{"distances", h.distances},
                        {"min", h.min},
                        {"max", h.max},
                        {"points", flat(pb)},
                        {"points_per_root", b.cloud.points_per_root}});
}

HttpResponse StudioService::static_file(const std::string& path) const {
  std::string rel = path.size() > 4 ? path.substr(4) : "";
  if (rel.empty()) rel = "index.html";
  if (rel.find("..") != std::string::npos || rel.front() == '/') {
    return error_response(404, "no such asset");
  }
  if (!ui_dir_.empty()) {
    const fs::path file = ui_dir_ / rel;
    std::ifstream in(file, std::ios::binary);
    if (in && fs::is_regular_file(file)) {
      std::ostringstream ss;
      ss << in.rdbuf();
      return {200, content_type_for(file), ss.str()};
    }
  }
  if (rel == "index.html") return {200, "text/html", kPlaceholderPage};
  return error_response(404, "no such asset " + rel);
}

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw std::invalid_argument("address must be host:port, got '" + addr + "'");
  }
  const std::string port_text = addr.substr(colon + 1);
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw std::invalid_argument("bad port in address '" + addr + "'");
  return {addr.substr(0, colon), port};
}

struct HttpServer::Impl {
  StudioService& service;
  httplib::Server server;

  explicit Impl(StudioService& s) : service(s) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      HttpResponse r = service.handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
      spdlog::debug("{} {} -> {}", req.method, req.path, r.status);
    };
    server.Get(".*", forward);
    server.Post(".*", forward);
    server.Put(".*", forward);
    server.Delete(".*", forward);
  }
};

HttpServer::HttpServer(StudioService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port,
                        const std::function<void(int)>& on_ready) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) return false;
  } else if (!impl_->server.bind_to_port(host, port)) {
    return false;
  }
  if (on_ready) on_ready(bound);
  return impl_->server.listen_after_bind();
}

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace mrgan
