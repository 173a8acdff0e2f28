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

#include "behavseg/model.hpp"

#include <stdexcept>

#include "behavseg/random.hpp"

namespace behavseg::training {

namespace {

constexpr const char* kAutoPrefix = "auto-pca-";

const std::pair<ModelVariant, const char*> kVariantNames[] = {
    {ModelVariant::tcn, "tcn"},
    {ModelVariant::gmdgm, "gmdgm"},
    {ModelVariant::gmdgm_tcn, "gmdgm_tcn"},
    {ModelVariant::s3lds, "s3lds"},
    {ModelVariant::s3nlds, "s3nlds"},
};

}  // namespace

std::string to_string(ModelVariant variant) {
  for (const auto& [v, name] : kVariantNames)
    if (v == variant) return name;
  throw std::logic_error("unknown model variant");
}

ModelVariant parse_variant(const std::string& name) {
  for (const auto& [v, n] : kVariantNames)
    if (name == n) return v;
  throw std::invalid_argument("unknown model_variant '" + name +
                              "' (expected tcn, gmdgm, gmdgm_tcn, s3lds or s3nlds)");
}

bool uses_slds(ModelVariant v) {
  return v == ModelVariant::s3lds || v == ModelVariant::s3nlds;
}
bool uses_gmdgm(ModelVariant v) {
  return v == ModelVariant::gmdgm || v == ModelVariant::gmdgm_tcn;
}

const std::set<std::string>& TrainConfig::keys() {
  static const std::set<std::string> k = {
      "model_variant",   "learning_rate",   "n_epochs",      "batch_size",
      "window",          "alpha",           "anneal_epochs", "seed",
      "latent_dim",      "features.velocity", "labels.videos", "labels.fraction",
      "tcn.n_blocks",    "tcn.n_lags",      "tcn.n_filters", "tcn.dropout_p",
      "tcn.leaky_slope"};
  return k;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  cfg.reject_unknown(keys());
  TrainConfig c;
  c.variant = parse_variant(cfg.get_or("model_variant", "tcn"));
  c.learning_rate = cfg.get_double_or("learning_rate", c.learning_rate);
  c.n_epochs = static_cast<int>(cfg.get_int_or("n_epochs", c.n_epochs));
  c.batch_size = static_cast<int>(cfg.get_int_or("batch_size", c.batch_size));
  c.window = static_cast<int>(cfg.get_int_or("window", c.window));
  c.alpha = cfg.get_double_or("alpha", c.alpha);
  c.anneal_epochs = static_cast<int>(cfg.get_int_or("anneal_epochs", c.anneal_epochs));
  const long long seed = cfg.get_int_or("seed", 0);
  if (seed < 0) throw std::invalid_argument("seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);

  const std::string latent = cfg.get_or("latent_dim", "auto-pca-0.95");
  if (latent.rfind(kAutoPrefix, 0) == 0) {
    c.latent_dim = 0;
    try {
      c.latent_variance = std::stod(latent.substr(std::string(kAutoPrefix).size()));
    } catch (const std::exception&) {
      throw std::invalid_argument("latent_dim: cannot parse '" + latent + "'");
    }
  } else {
    c.latent_dim = static_cast<int>(cfg.get_int("latent_dim"));
    if (c.latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  }

  c.velocity = cfg.get_bool_or("features.velocity", false);
  c.label_videos = static_cast<int>(cfg.get_int_or("labels.videos", 0));
  c.label_fraction = cfg.get_double_or("labels.fraction", 1.0);
  c.tcn.n_blocks = static_cast<int>(cfg.get_int_or("tcn.n_blocks", c.tcn.n_blocks));
  c.tcn.n_lags = static_cast<int>(cfg.get_int_or("tcn.n_lags", c.tcn.n_lags));
  c.tcn.n_filters = static_cast<int>(cfg.get_int_or("tcn.n_filters", c.tcn.n_filters));
  c.tcn.dropout_p = cfg.get_double_or("tcn.dropout_p", c.tcn.dropout_p);
  c.tcn.leaky_slope = cfg.get_double_or("tcn.leaky_slope", c.tcn.leaky_slope);
  c.validate();
  return c;
}

KeyValueConfig TrainConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("model_variant", to_string(variant));
  cfg.set("learning_rate", learning_rate);
  cfg.set("n_epochs", n_epochs);
  cfg.set("batch_size", batch_size);
  cfg.set("window", window);
  cfg.set("alpha", alpha);
  cfg.set("anneal_epochs", anneal_epochs);
  cfg.set("seed", std::to_string(seed));
  if (latent_dim > 0) {
    cfg.set("latent_dim", latent_dim);
  } else {
    cfg.set("latent_dim", kAutoPrefix + format_double(latent_variance));
  }
  cfg.set("features.velocity", velocity);
  cfg.set("labels.videos", label_videos);
  cfg.set("labels.fraction", label_fraction);
  cfg.set("tcn.n_blocks", tcn.n_blocks);
  cfg.set("tcn.n_lags", tcn.n_lags);
  cfg.set("tcn.n_filters", tcn.n_filters);
  cfg.set("tcn.dropout_p", tcn.dropout_p);
  cfg.set("tcn.leaky_slope", tcn.leaky_slope);
  return cfg;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (n_epochs < 0) throw std::invalid_argument("n_epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (anneal_epochs < 0) throw std::invalid_argument("anneal_epochs must be >= 0");
  if (!(latent_variance > 0.0 && latent_variance <= 1.0)) {
    throw std::invalid_argument("latent_dim: explained-variance target must be in (0, 1]");
  }
  if (label_videos < 0) throw std::invalid_argument("labels.videos must be >= 0");
  if (!(label_fraction >= 0.0 && label_fraction <= 1.0)) {
    throw std::invalid_argument("labels.fraction must be in [0, 1]");
  }
  tcn.validate();
}

data::Matrix augment(const data::Matrix& raw, bool velocity) {
  return velocity ? data::position_velocity(raw) : raw;
}

Model Model::init(const TrainConfig& config, int n_classes, int raw_dim,
                  int latent_dim, data::Standardizer standardizer) {
  config.validate();
  if (n_classes < 1) throw std::invalid_argument("model: n_classes must be >= 1");
  if (raw_dim < 1) throw std::invalid_argument("model: feature dimension must be >= 1");
  Model m;
  m.config = config;
  m.n_classes = n_classes;
  m.raw_dim = raw_dim;
  m.feature_dim = config.velocity ? 2 * raw_dim : raw_dim;
  m.latent_dim = config.variant == ModelVariant::tcn ? 0 : latent_dim;
  if (config.variant != ModelVariant::tcn && latent_dim < 1) {
    throw std::invalid_argument("model: latent_dim must be >= 1");
  }
  if (standardizer.mean.size() != m.feature_dim || standardizer.std.size() != m.feature_dim) {
    throw std::invalid_argument("model: standardizer width differs from feature width");
  }
  m.standardizer = std::move(standardizer);

  Rng rng(derive_seed(config.seed, {0x1417}));
  const bool pointwise = config.variant == ModelVariant::gmdgm;
  m.nets = inference::PosteriorNets::init(config.tcn, m.feature_dim, n_classes,
                                          m.latent_dim, rng, pointwise);
  if (uses_slds(config.variant)) {
    const auto kind = config.variant == ModelVariant::s3nlds ? gen::DynamicsKind::nonlinear
                                                             : gen::DynamicsKind::linear;
    m.slds = gen::SLDSParams::init(n_classes, m.latent_dim, m.feature_dim, kind, rng);
  } else if (uses_gmdgm(config.variant)) {
    m.gmdgm = gen::GMDGMParams::init(n_classes, m.latent_dim, m.feature_dim, rng);
  }
  return m;
}

data::Matrix Model::prepare(const data::Matrix& raw) const {
  if (raw.cols() != raw_dim) {
    throw std::invalid_argument("feature dimension mismatch: model expects " +
                                std::to_string(raw_dim) + " columns, got " +
                                std::to_string(raw.cols()));
  }
  return standardizer.apply(augment(raw, config.velocity));
}

ad::ParamList Model::parameters() const {
  ad::ParamList params;
  nets.collect(params, "posterior");
  if (slds) slds->collect(params, "slds");
  if (gmdgm) gmdgm->collect(params, "gmdgm");
  return params;
}

}  // namespace behavseg::training
