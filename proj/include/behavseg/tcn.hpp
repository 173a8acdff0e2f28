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
#include <vector>

#include "behavseg/autodiff.hpp"
#include "behavseg/layers.hpp"
#include "behavseg/random.hpp"

namespace behavseg::tcn {

using ad::Matrix;
using ad::Var;

struct TCNConfig {
  int n_blocks = 2;
  int n_lags = 4;  // taps on each side of the centre frame
  int n_filters = 32;
  double dropout_p = 0.10;
  double leaky_slope = 0.01;

  // `allow_pointwise` admits n_lags == 0, which turns every convolution into a
  // per-frame dense layer (used by the static mixture-model posteriors).
  void validate(bool allow_pointwise = false) const;
  int kernel_size() const { return 2 * n_lags + 1; }
};

// Half-width of the window of input frames that can influence one output
// frame: n_lags * sum over blocks of 2 * 2^b.
int receptive_field_radius(const TCNConfig& config);

// Non-causal dilated TCN. Block b (0-based) runs two sub-blocks
// conv(dilation 2^b) -> leaky ReLU -> dropout and adds a residual path, which
// is a 1x1 projection when the channel count changes.
class TCNBackbone {
 public:
  TCNBackbone() = default;
  TCNBackbone(const TCNConfig& config, int input_dim, Rng& rng,
              bool allow_pointwise = false);

  // x: [T x input_dim] -> [T x n_filters]. Dropout masks are drawn from
  // `seed` and only applied when `training` is true.
  Var forward(const Var& x, bool training, std::uint64_t seed) const;
  Matrix forward(const Matrix& x) const;

  const TCNConfig& config() const { return config_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return config_.n_filters; }
  void collect(ad::ParamList& params, const std::string& prefix) const;

 private:
  struct Block {
    Var conv1_weight, conv1_bias;
    Var conv2_weight, conv2_bias;
    bool has_projection = false;
    nn::Linear projection;
    int dilation = 1;
  };

  TCNConfig config_;
  int input_dim_ = 0;
  std::vector<Block> blocks_;
};

}  // namespace behavseg::tcn
