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

#include "mrgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mrgan/pointcloud.hpp"

namespace fs = std::filesystem;

namespace mrgan {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_bytes(const std::string& s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& data, std::string source) : data_(data), source_(std::move(source)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::uint64_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError(source_ + ": truncated checkpoint");
  }

  const std::string& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes("MRGF");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put<std::uint64_t>(d);
    for (double v : t.data()) w.put<double>(v);
  }
  w.put<std::uint64_t>(ckpt.config.size());
  w.put_bytes(ckpt.config);
  w.put<std::uint64_t>(ckpt.rng_state.size());
  w.put_bytes(ckpt.rng_state);
  w.put<std::uint64_t>(ckpt.step);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.get_bytes(4) != "MRGF") throw CheckpointError(source + ": not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(source + ": unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.get_bytes(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CheckpointError(source + ": implausible rank for " + name);
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(r.get<std::uint64_t>());
      numel *= shape.back();
    }
    if (numel > bytes.size() / sizeof(double)) throw CheckpointError(source + ": truncated checkpoint");
    std::vector<double> data(numel);
    for (double& v : data) v = r.get<double>();
    ck.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  ck.config = r.get_bytes(r.get<std::uint64_t>());
  ck.rng_state = r.get_bytes(r.get<std::uint64_t>());
  ck.step = r.get<std::uint64_t>();
  if (!r.done()) throw CheckpointError(source + ": trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str(), path.string());
}

void store_params(Checkpoint& ckpt, const ParamStore& params) {
  for (const auto& p : params.params()) ckpt.tensors[p.name()] = p.value();
}

void restore_params(const Checkpoint& ckpt, ParamStore& params) {
  for (auto& p : params.params()) {
    auto it = ckpt.tensors.find(p.name());
    if (it == ckpt.tensors.end()) throw CheckpointError("checkpoint lacks parameter " + p.name());
    if (it->second.shape() != p.value().shape()) {
      throw CheckpointError("parameter " + p.name() + " has shape " +
                            shape_str(it->second.shape()) + " in the checkpoint, model expects " +
                            shape_str(p.value().shape()));
    }
    p.value() = it->second;
  }
}

void store_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState& state) {
  ckpt.tensors["opt/" + prefix + "/t"] = Tensor::scalar(static_cast<double>(state.t));
  for (const auto& [name, mom] : state.moments) {
    ckpt.tensors["opt/" + prefix + "/m/" + name] = mom.m;
    ckpt.tensors["opt/" + prefix + "/v/" + name] = mom.v;
  }
}

void restore_adam(const Checkpoint& ckpt, const std::string& prefix, AdamState& state) {
  const std::string base = "opt/" + prefix + "/";
  auto t = ckpt.tensors.find(base + "t");
  if (t == ckpt.tensors.end()) throw CheckpointError("checkpoint lacks optimizer state " + prefix);
  state.t = static_cast<std::uint64_t>(t->second.item());
  state.moments.clear();
  const std::string mpre = base + "m/";
  for (auto it = ckpt.tensors.lower_bound(mpre);
       it != ckpt.tensors.end() && it->first.compare(0, mpre.size(), mpre) == 0; ++it) {
    const std::string name = it->first.substr(mpre.size());
    auto v = ckpt.tensors.find(base + "v/" + name);
    if (v == ckpt.tensors.end()) throw CheckpointError("checkpoint lacks second moment of " + name);
    state.moments[name] = {it->second, v->second};
  }
}

}  // namespace mrgan
