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

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "behavseg/config.hpp"
#include "behavseg/data_io.hpp"
#include "behavseg/generative.hpp"
#include "behavseg/inference.hpp"
#include "behavseg/tcn.hpp"

namespace behavseg::training {

enum class ModelVariant { tcn, gmdgm, gmdgm_tcn, s3lds, s3nlds };

std::string to_string(ModelVariant variant);
ModelVariant parse_variant(const std::string& name);

bool uses_slds(ModelVariant variant);
bool uses_gmdgm(ModelVariant variant);

// Recognized keys:
//   model_variant, learning_rate, n_epochs, batch_size, window, alpha,
//   anneal_epochs, seed, latent_dim (integer or auto-pca-<fraction>),
//   features.velocity, labels.videos, labels.fraction,
//   tcn.n_blocks, tcn.n_lags, tcn.n_filters, tcn.dropout_p, tcn.leaky_slope
struct TrainConfig {
  ModelVariant variant = ModelVariant::tcn;
  double learning_rate = 1e-4;
  int n_epochs = 500;
  int batch_size = 8;
  int window = 1000;
  double alpha = 100.0;
  int anneal_epochs = 100;
  std::uint64_t seed = 0;
  int latent_dim = 0;                 // 0 selects by explained variance
  double latent_variance = 0.95;
  bool velocity = false;
  int label_videos = 0;               // 0 keeps labels on every video
  double label_fraction = 1.0;        // per-frame label retention
  tcn::TCNConfig tcn;

  static const std::set<std::string>& keys();
  static TrainConfig from_config(const KeyValueConfig& config);
  KeyValueConfig to_config() const;
  void validate() const;
};

// Everything needed to run a trained network on raw features.
struct Model {
  TrainConfig config;
  int n_classes = 0;
  int raw_dim = 0;      // columns of the raw feature files
  int feature_dim = 0;  // after optional velocity augmentation
  int latent_dim = 0;   // 0 for the supervised TCN
  data::Standardizer standardizer;
  inference::PosteriorNets nets;
  std::optional<gen::SLDSParams> slds;
  std::optional<gen::GMDGMParams> gmdgm;

  // Fresh parameters drawn from config.seed.
  static Model init(const TrainConfig& config, int n_classes, int raw_dim,
                    int latent_dim, data::Standardizer standardizer);

  // Velocity augmentation (if enabled) followed by standardization.
  data::Matrix prepare(const data::Matrix& raw) const;
  ad::ParamList parameters() const;
};

// Raw features with the optional velocity columns appended.
data::Matrix augment(const data::Matrix& raw, bool velocity);

}  // namespace behavseg::training
