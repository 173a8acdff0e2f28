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

#include <string>

#include "behavseg/autodiff.hpp"
#include "behavseg/random.hpp"

namespace behavseg::nn {

using ad::Matrix;
using ad::Var;

// Dense affine map on row-major samples: y = x W + b.
struct Linear {
  Var weight;  // [in x out]
  Var bias;    // [1 x out]

  // Uniform(-1/sqrt(in), 1/sqrt(in)) initialization for weights and bias.
  static Linear init(int in, int out, Rng& rng);
  static Linear zeros(int in, int out);

  Var forward(const Var& x) const;
  int in_dim() const { return static_cast<int>(weight.rows()); }
  int out_dim() const { return static_cast<int>(weight.cols()); }
  void collect(ad::ParamList& params, const std::string& prefix) const;
};

// One-hidden-layer network with a leaky-rectifier hidden activation.
struct DenseNet {
  Linear hidden;
  Linear output;
  double slope = 0.01;

  static DenseNet init(int in, int width, int out, Rng& rng, double slope = 0.01);

  Var forward(const Var& x) const;
  Matrix forward(const Matrix& x) const;
  void collect(ad::ParamList& params, const std::string& prefix) const;
};

// Fresh parameter leaves holding copies of the given values.
Linear clone(const Linear& l);
DenseNet clone(const DenseNet& n);

}  // namespace behavseg::nn
