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

#include "behavseg/inference.hpp"

#include <stdexcept>

namespace behavseg::inference {

PosteriorNets PosteriorNets::init(const tcn::TCNConfig& config, int input_dim,
                                  int n_classes, int latent_dim, Rng& rng,
                                  bool pointwise) {
  if (n_classes < 1) throw std::invalid_argument("PosteriorNets: n_classes must be >= 1");
  if (latent_dim < 0) throw std::invalid_argument("PosteriorNets: latent_dim must be >= 0");
  tcn::TCNConfig cfg = config;
  if (pointwise) cfg.n_lags = 0;
  PosteriorNets nets;
  nets.n_classes = n_classes;
  nets.latent_dim = latent_dim;
  nets.classifier_backbone = tcn::TCNBackbone(cfg, input_dim, rng, pointwise);
  nets.classifier_head = nn::Linear::init(cfg.n_filters, n_classes, rng);
  if (latent_dim > 0) {
    nets.encoder_backbone = tcn::TCNBackbone(cfg, input_dim, rng, pointwise);
    nets.mean_head = nn::Linear::init(cfg.n_filters, n_classes * latent_dim, rng);
    nets.log_var_head = nn::Linear::init(cfg.n_filters, n_classes * latent_dim, rng);
  }
  return nets;
}

void PosteriorNets::collect(ad::ParamList& params, const std::string& prefix) const {
  classifier_backbone.collect(params, prefix + ".classifier.backbone");
  classifier_head.collect(params, prefix + ".classifier.head");
  if (has_encoder()) {
    encoder_backbone.collect(params, prefix + ".encoder.backbone");
    mean_head.collect(params, prefix + ".encoder.mean_head");
    log_var_head.collect(params, prefix + ".encoder.log_var_head");
  }
}

PosteriorOutputs run_posteriors(const PosteriorNets& nets, const Var& x,
                                bool training, std::uint64_t seed) {
  PosteriorOutputs out;
  Var h = nets.classifier_backbone.forward(x, training, derive_seed(seed, {1}));
  Var logits = nets.classifier_head.forward(h);
  out.log_probs = ad::log_softmax_rows(logits);
  out.probs = ad::exp(out.log_probs);
  if (nets.has_encoder()) {
    Var e = nets.encoder_backbone.forward(x, training, derive_seed(seed, {2}));
    Var mean = nets.mean_head.forward(e);
    Var log_var = nets.log_var_head.forward(e);
    const int L = nets.latent_dim;
    for (int k = 0; k < nets.n_classes; ++k) {
      out.mean.push_back(ad::cols(mean, k * L, L));
      out.log_var.push_back(ad::cols(log_var, k * L, L));
    }
  }
  return out;
}

Matrix classify(const PosteriorNets& nets, const Matrix& x, bool training,
                std::uint64_t seed) {
  Var h = nets.classifier_backbone.forward(ad::constant(x), training,
                                           derive_seed(seed, {1}));
  return ad::softmax_rows(nets.classifier_head.forward(h)).value();
}

std::pair<Matrix, Matrix> encode_z(const PosteriorNets& nets, const Matrix& x,
                                   int k, bool training, std::uint64_t seed) {
  if (!nets.has_encoder()) throw std::logic_error("encode_z: model has no encoder");
  if (k < 0 || k >= nets.n_classes) throw std::out_of_range("encode_z: class out of range");
  Var e = nets.encoder_backbone.forward(ad::constant(x), training,
                                        derive_seed(seed, {2}));
  const int L = nets.latent_dim;
  Matrix mean = nets.mean_head.forward(e).value().middleCols(k * L, L);
  Matrix log_var = nets.log_var_head.forward(e).value().middleCols(k * L, L);
  return {mean, log_var.array().exp().matrix()};
}

Matrix reparam_sample(const Matrix& mean, const Matrix& var, std::uint64_t seed) {
  if (mean.rows() != var.rows() || mean.cols() != var.cols()) {
    throw std::invalid_argument("reparam_sample: shape mismatch");
  }
  if ((var.array() <= 0.0).any()) {
    throw std::invalid_argument("reparam_sample: variance must be positive");
  }
  Rng rng(seed);
  Matrix eps = standard_normal(mean.rows(), mean.cols(), rng);
  return mean + var.array().sqrt().matrix().cwiseProduct(eps);
}

Var reparam_sample(const Var& mean, const Var& log_var, const Matrix& noise) {
  return mean + ad::mul_const(ad::exp(ad::scale(log_var, 0.5)), noise);
}

}  // namespace behavseg::inference
