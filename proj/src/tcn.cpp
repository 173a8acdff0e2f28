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

#include "behavseg/tcn.hpp"

#include <cmath>
#include <stdexcept>

namespace behavseg::tcn {

void TCNConfig::validate(bool allow_pointwise) const {
  if (n_blocks < 1) throw std::invalid_argument("tcn: n_blocks must be >= 1");
  if (n_lags < (allow_pointwise ? 0 : 1)) {
    throw std::invalid_argument("tcn: n_lags must be >= 1");
  }
  if (n_filters < 1) throw std::invalid_argument("tcn: n_filters must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("tcn: dropout_p must be in [0, 1)");
  }
  if (!(leaky_slope >= 0.0)) {
    throw std::invalid_argument("tcn: leaky_slope must be >= 0");
  }
}

int receptive_field_radius(const TCNConfig& config) {
  int span = 0;
  for (int b = 0; b < config.n_blocks; ++b) span += 2 * (1 << b);
  return config.n_lags * span;
}

namespace {

Var conv_weight(int taps, int cin, int cout, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(taps * cin));
  return ad::parameter(uniform_matrix(taps * cin, cout, -bound, bound, rng));
}

Var conv_bias(int taps, int cin, int cout, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(taps * cin));
  return ad::parameter(uniform_matrix(1, cout, -bound, bound, rng));
}

Var dropout(const Var& x, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (ad::Index j = 0; j < mask.cols(); ++j)
    for (ad::Index i = 0; i < mask.rows(); ++i)
      mask(i, j) = keep(rng) ? scale : 0.0;
  return ad::mul_const(x, mask);
}

}  // namespace

TCNBackbone::TCNBackbone(const TCNConfig& config, int input_dim, Rng& rng,
                         bool allow_pointwise)
    : config_(config), input_dim_(input_dim) {
  config_.validate(allow_pointwise);
  if (input_dim < 1) throw std::invalid_argument("tcn: input_dim must be >= 1");
  const int taps = config_.kernel_size();
  const int f = config_.n_filters;
  int cin = input_dim;
  for (int b = 0; b < config_.n_blocks; ++b) {
    Block block;
    block.dilation = 1 << b;
    block.conv1_weight = conv_weight(taps, cin, f, rng);
    block.conv1_bias = conv_bias(taps, cin, f, rng);
    block.conv2_weight = conv_weight(taps, f, f, rng);
    block.conv2_bias = conv_bias(taps, f, f, rng);
    if (cin != f) {
      block.has_projection = true;
      block.projection = nn::Linear::init(cin, f, rng);
    }
    blocks_.push_back(std::move(block));
    cin = f;
  }
}

Var TCNBackbone::forward(const Var& x, bool training, std::uint64_t seed) const {
  if (x.cols() != input_dim_) {
    throw std::invalid_argument("tcn: expected " + std::to_string(input_dim_) +
                                " input columns, got " + std::to_string(x.cols()));
  }
  if (x.rows() < 1) throw std::invalid_argument("tcn: empty input");
  if (!x.value().allFinite()) throw std::invalid_argument("tcn: non-finite input");

  const bool drop = training && config_.dropout_p > 0.0;
  Var h = x;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& block = blocks_[b];
    Var a = ad::conv1d(h, block.conv1_weight, block.conv1_bias, config_.n_lags,
                       block.dilation);
    a = ad::leaky_relu(a, config_.leaky_slope);
    if (drop) a = dropout(a, config_.dropout_p, derive_seed(seed, {b, 0}));
    a = ad::conv1d(a, block.conv2_weight, block.conv2_bias, config_.n_lags,
                   block.dilation);
    a = ad::leaky_relu(a, config_.leaky_slope);
    if (drop) a = dropout(a, config_.dropout_p, derive_seed(seed, {b, 1}));
    Var skip = block.has_projection ? block.projection.forward(h) : h;
    h = a + skip;
  }
  return h;
}

Matrix TCNBackbone::forward(const Matrix& x) const {
  return forward(ad::constant(x), false, 0).value();
}

void TCNBackbone::collect(ad::ParamList& params, const std::string& prefix) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& block = blocks_[b];
    const std::string p = prefix + ".block" + std::to_string(b);
    params.add(p + ".conv1.weight", block.conv1_weight);
    params.add(p + ".conv1.bias", block.conv1_bias);
    params.add(p + ".conv2.weight", block.conv2_weight);
    params.add(p + ".conv2.bias", block.conv2_bias);
    if (block.has_projection) block.projection.collect(params, p + ".projection");
  }
}

}  // namespace behavseg::tcn
