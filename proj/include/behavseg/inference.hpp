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
#include <string>
#include <utility>
#include <vector>

#include "behavseg/autodiff.hpp"
#include "behavseg/layers.hpp"
#include "behavseg/tcn.hpp"

// Amortized posteriors q(y_t | x_window) and q(z_t | x_window, y_t).
//
// Both are TCN-backed. The continuous posterior uses one backbone with K
// output heads (mean and log-variance per class) so that every class branch
// comes out of a single forward pass.

namespace behavseg::inference {

using ad::Matrix;
using ad::Var;

struct PosteriorNets {
  int n_classes = 0;
  int latent_dim = 0;  // 0 when only the classifier exists
  tcn::TCNBackbone classifier_backbone;
  nn::Linear classifier_head;  // [F x K]
  tcn::TCNBackbone encoder_backbone;
  nn::Linear mean_head;        // [F x K*L]
  nn::Linear log_var_head;     // [F x K*L]

  // `latent_dim` == 0 builds a classifier only. `pointwise` gives both
  // backbones a one-frame receptive field.
  static PosteriorNets init(const tcn::TCNConfig& config, int input_dim,
                            int n_classes, int latent_dim, Rng& rng,
                            bool pointwise = false);

  bool has_encoder() const { return latent_dim > 0; }
  int input_dim() const { return classifier_backbone.input_dim(); }
  void collect(ad::ParamList& params, const std::string& prefix) const;
};

struct PosteriorOutputs {
  Var log_probs;                // [T x K]
  Var probs;                    // [T x K]
  std::vector<Var> mean;        // K entries [T x L]
  std::vector<Var> log_var;     // K entries [T x L]
};

PosteriorOutputs run_posteriors(const PosteriorNets& nets, const Var& x,
                                bool training, std::uint64_t seed);

// Per-frame class probabilities [T x K].
Matrix classify(const PosteriorNets& nets, const Matrix& x, bool training = false,
                std::uint64_t seed = 0);

// Mean and variance of q(z_t | x, y_t = k), each [T x L].
std::pair<Matrix, Matrix> encode_z(const PosteriorNets& nets, const Matrix& x,
                                   int k, bool training = false,
                                   std::uint64_t seed = 0);

// z = mu + sqrt(var) * eps, eps ~ N(0, I) drawn from `seed`.
Matrix reparam_sample(const Matrix& mean, const Matrix& var, std::uint64_t seed);
// Graph version with explicit standard-normal noise of the same shape.
Var reparam_sample(const Var& mean, const Var& log_var, const Matrix& noise);

}  // namespace behavseg::inference
