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

// Checkpoint container. Layout, little-endian:
//
//   "MRGF"  u32 version
//   u64 count, then per tensor: u32 name length, name bytes, u32 rank,
//     u64 dims[rank], f64 data[prod(dims)]
//   u64 length + config text ("key = value" lines)
//   u64 length + rng state text
//   u64 step

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "mrgan/nn.hpp"

namespace mrgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string config;
  std::map<std::string, Tensor> tensors;
  std::string rng_state;
  std::uint64_t step = 0;
};

// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source = "checkpoint");

void store_params(Checkpoint& ckpt, const ParamStore& params);
// Copies every parameter of params from ckpt; a missing name or a shape
// mismatch is an error.
void restore_params(const Checkpoint& ckpt, ParamStore& params);

void store_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState& state);
void restore_adam(const Checkpoint& ckpt, const std::string& prefix, AdamState& state);

}  // namespace mrgan
