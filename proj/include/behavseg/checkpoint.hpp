/* Copyright 2026 The behavseg Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "behavseg/generative.hpp"
#include "behavseg/model.hpp"

// Binary container layout (all integers and reals little-endian):
//
//   8 bytes   magic "BHVSEGv\0"
//   u32       format version
//   u64       manifest length, then the manifest text (canonical key-value)
//   u64       tensor count, then per tensor:
//               u32 name length, name bytes, u64 rows, u64 cols,
//               rows * cols f64 values in row-major order

namespace behavseg::training {

inline constexpr std::uint32_t kFormatVersion = 1;

struct TensorArchive {
  std::string manifest;
  std::vector<std::pair<std::string, data::Matrix>> tensors;

  void add(std::string name, data::Matrix value);
  bool contains(const std::string& name) const;
  const data::Matrix& at(const std::string& name) const;

  std::string serialize() const;
  static TensorArchive deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);
};

struct EpochRecord {
  int epoch = 0;
  double anneal = 0.0;
  double loss = 0.0;
  double reconstruction = 0.0;
  double kl_z = 0.0;
  double kl_y = 0.0;
  double classification = 0.0;
};
using History = std::vector<EpochRecord>;

// Columns: epoch, anneal, loss, reconstruction, kl_z, kl_y, classification.
std::string history_csv(const History& history);

struct Checkpoint {
  Model model;
  History history;
};

TensorArchive to_archive(const Model& model, const History& history);
Checkpoint from_archive(const TensorArchive& archive);
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const History& history);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Generating parameters written by the simulator.
TensorArchive slds_to_archive(const gen::SLDSParams& params);
gen::SLDSParams slds_from_archive(const TensorArchive& archive);

// Copies every tensor named `prefix + name` into the matching parameter.
// Throws on a missing tensor or a shape mismatch.
void assign_parameters(const ad::ParamList& params, const TensorArchive& archive);

}  // namespace behavseg::training
