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

#include "behavseg/training.hpp"

#include <cmath>
#include <numeric>

#include "behavseg/losses.hpp"
#include "behavseg/random.hpp"

namespace behavseg::training {

namespace {

using data::Index;
using data::Matrix;

// Seeds written back into a config must fit a signed 64-bit integer.
std::uint64_t config_seed(std::uint64_t base, std::uint64_t stream) {
  return derive_seed(base, {stream}) >> 2;
}

struct WindowStats {
  double loss = 0.0;  // unnormalized objective to minimize
  double reconstruction = 0.0;
  double kl_z = 0.0;
  double kl_y = 0.0;
  double class_nll = 0.0;  // sum of -w log q over labeled frames
};

void require_finite(double value, const char* term, int epoch) {
  if (!std::isfinite(value)) throw NonFiniteLoss(term, epoch);
}

std::vector<data::FeatureSequence> prepare_all(const Model& model,
                                               const std::vector<data::FeatureSequence>& seqs) {
  std::vector<data::FeatureSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    data::FeatureSequence p = s;
    p.features = model.prepare(s.features);
    out.push_back(std::move(p));
  }
  return out;
}

Eigen::VectorXd training_class_weights(const std::vector<data::FeatureSequence>& train,
                                       int n_classes) {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(n_classes);
  for (const auto& s : train)
    for (Index t = 0; t < s.labels.size(); ++t)
      if (s.labels[t] >= 0) ++counts[s.labels[t]];
  return losses::class_weights_from_counts(counts);
}

// Builds the objective for one window, back-propagates `scale` times it, and
// returns the unscaled components.
WindowStats window_step(const Model& model, const Matrix& x, const data::Labels& labels,
                        const Eigen::VectorXd& weights, double anneal, double scale,
                        std::uint64_t seed, int epoch) {
  const TrainConfig& cfg = model.config;
  WindowStats st;
  auto post = inference::run_posteriors(model.nets, ad::constant(x), true,
                                        derive_seed(seed, {0xd7}));
  ad::Var ll = losses::weighted_log_likelihood(post.log_probs, labels, weights);
  st.class_nll = -ll.scalar();
  require_finite(st.class_nll, "classification", epoch);

  if (cfg.variant == ModelVariant::tcn) {
    st.loss = st.class_nll;
    ad::backward(ad::scale(ll, -scale));
    return st;
  }

  const int K = model.n_classes;
  const auto noise = losses::NoiseDraws::draw(x.rows(), K, model.latent_dim,
                                              derive_seed(seed, {0x0e}));
  losses::RDistribution r = losses::build_r_distribution(post.probs, labels);
  losses::ElboTerms terms = model.slds
                                ? losses::slds_elbo_marginal(x, r.probs, post, *model.slds, noise)
                                : losses::gmdgm_elbo_marginal(x, r.probs, post, *model.gmdgm, noise);
  terms.classification = ll;

  st.reconstruction = terms.reconstruction.scalar();
  require_finite(st.reconstruction, "reconstruction", epoch);
  require_finite(terms.kl_z_initial.scalar(), "kl_z_initial", epoch);
  require_finite(terms.kl_dynamics.scalar(), "kl_dynamics", epoch);
  require_finite(terms.kl_y_initial.scalar(), "kl_y_initial", epoch);
  require_finite(terms.kl_transition.scalar(), "kl_transition", epoch);
  st.kl_z = terms.kl_z_initial.scalar() + terms.kl_dynamics.scalar();
  st.kl_y = terms.kl_y_initial.scalar() + terms.kl_transition.scalar();

  ad::Var elbo = terms.elbo(anneal, cfg.alpha);
  st.loss = -elbo.scalar();
  require_finite(st.loss, "loss", epoch);
  ad::backward(ad::scale(elbo, -scale));
  return st;
}

}  // namespace

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("Adam: learning rate must be >= 0");
}

void Adam::step(const ad::ParamList& params) {
  if (m_.empty()) {
    for (const auto& [name, v] : params) {
      m_.push_back(Matrix::Zero(v.rows(), v.cols()));
      v_.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Var p = params[i].second;
    if (p.grad().size() == 0) {
      m_[i] *= beta1_;
      v_[i] *= beta2_;
    } else {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad();
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad().cwiseAbs2();
    }
    p.mutable_value().array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

NonFiniteLoss::NonFiniteLoss(const std::string& term, int epoch)
    : std::runtime_error("non-finite loss term '" + term + "' at epoch " +
                         std::to_string(epoch)),
      term_(term) {}

std::vector<data::FeatureSequence> subsample_labels(const TrainConfig& config,
                                                    std::vector<data::FeatureSequence> train,
                                                    std::uint64_t seed) {
  if (config.label_videos > 0) {
    train = data::subsample_labeled_videos(std::move(train), config.label_videos,
                                           derive_seed(seed, {0x71d}));
  }
  if (config.label_fraction < 1.0) {
    train = data::subsample_labeled_frames(std::move(train), config.label_fraction,
                                           derive_seed(seed, {0xf7a}));
  }
  return train;
}

TrainResult train(const TrainConfig& config, const data::DatasetSplit& dataset,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.train.empty()) throw std::invalid_argument("train: training split is empty");
  dataset.validate();
  const int K = dataset.n_classes;
  const int raw_dim = static_cast<int>(dataset.train.front().dim());

  Index labeled = 0;
  for (const auto& s : dataset.train) labeled += s.labeled_count();
  if (config.variant == ModelVariant::tcn && labeled == 0) {
    throw std::invalid_argument("train: variant tcn needs at least one labeled frame");
  }

  // Standardizer and latent size come from the augmented training features.
  std::vector<data::FeatureSequence> augmented = dataset.train;
  for (auto& s : augmented) s.features = augment(s.features, config.velocity);
  data::Standardizer standardizer = data::fit_standardizer(augmented);
  int latent_dim = config.latent_dim;
  if (config.variant != ModelVariant::tcn && latent_dim == 0) {
    Matrix all = standardizer.apply(data::concat_features(augmented));
    latent_dim = data::select_latent_dim(all, config.latent_variance);
  }

  TrainResult result;
  result.model = Model::init(config, K, raw_dim, latent_dim, standardizer);
  Model& model = result.model;
  const auto prepared = prepare_all(model, dataset.train);
  const Eigen::VectorXd weights = training_class_weights(dataset.train, K);
  const ad::ParamList params = model.parameters();
  Adam adam(config.learning_rate);

  for (int epoch = 0; epoch < config.n_epochs; ++epoch) {
    const double anneal = losses::anneal_weight(epoch, config.anneal_epochs);
    const auto batches =
        data::make_batches(prepared, config.batch_size, config.window,
                           derive_seed(config.seed, {0xe90c, static_cast<std::uint64_t>(epoch)}));
    WindowStats total;
    double frames = 0.0, class_weight = 0.0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const data::Batch& batch = batches[bi];
      std::vector<data::Labels> window_labels;
      double batch_frames = 0.0, batch_weight = 0.0;
      for (Index b = 0; b < batch.size(); ++b) {
        const Index valid = batch.windows[static_cast<std::size_t>(b)].valid;
        window_labels.push_back(batch.labels.row(b).head(valid).transpose());
        batch_frames += static_cast<double>(valid);
        batch_weight += losses::labeled_weight(window_labels.back(), weights);
      }
      const double norm = config.variant == ModelVariant::tcn ? batch_weight : batch_frames;
      frames += batch_frames;
      class_weight += batch_weight;
      if (norm <= 0.0) continue;

      params.zero_grad();
      for (Index b = 0; b < batch.size(); ++b) {
        const Index valid = window_labels[static_cast<std::size_t>(b)].size();
        const std::uint64_t seed =
            derive_seed(config.seed, {0x5eed, static_cast<std::uint64_t>(epoch),
                                      static_cast<std::uint64_t>(bi),
                                      static_cast<std::uint64_t>(b)});
        const WindowStats st = window_step(
            model, batch.features[static_cast<std::size_t>(b)].topRows(valid),
            window_labels[static_cast<std::size_t>(b)], weights, anneal, 1.0 / norm, seed,
            epoch);
        total.loss += st.loss;
        total.reconstruction += st.reconstruction;
        total.kl_z += st.kl_z;
        total.kl_y += st.kl_y;
        total.class_nll += st.class_nll;
      }
      adam.step(params);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.anneal = anneal;
    rec.classification = class_weight > 0.0 ? total.class_nll / class_weight : 0.0;
    if (config.variant == ModelVariant::tcn) {
      rec.loss = rec.classification;
    } else {
      rec.loss = total.loss / frames;
      rec.reconstruction = total.reconstruction / frames;
      rec.kl_z = total.kl_z / frames;
      rec.kl_y = total.kl_y / frames;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

Prediction predict(const Model& model, const Matrix& raw) {
  const Matrix x = model.prepare(raw);
  Prediction out;
  out.probs = inference::classify(model.nets, x);
  out.labels.resize(out.probs.rows());
  for (Index t = 0; t < out.probs.rows(); ++t) {
    Index k = 0;
    out.probs.row(t).maxCoeff(&k);
    out.labels[t] = static_cast<int>(k);
  }
  return out;
}

Matrix extract_latents(const Model& model, const Matrix& raw) {
  if (model.n_classes < 1) throw std::logic_error("extract_latents: uninitialized model");
  const Matrix x = model.prepare(raw);
  if (model.config.variant == ModelVariant::tcn) {
    return model.nets.classifier_backbone.forward(x);
  }
  const auto post = inference::run_posteriors(model.nets, ad::constant(x), false, 0);
  Matrix z(x.rows(), model.latent_dim);
  for (Index t = 0; t < x.rows(); ++t) {
    Index k = 0;
    post.probs.value().row(t).maxCoeff(&k);
    z.row(t) = post.mean[static_cast<std::size_t>(k)].value().row(t);
  }
  return z;
}

metrics::EvalReport evaluate_model(const Model& model,
                                   const std::vector<data::FeatureSequence>& sequences) {
  if (sequences.empty()) throw std::invalid_argument("evaluate: no sequences in the split");
  Index total = 0;
  for (const auto& s : sequences) total += s.length();
  Matrix probs(total, model.n_classes);
  data::Labels pred(total), truth(total);
  Index offset = 0;
  for (const auto& s : sequences) {
    if (s.labels.size() > 0 && s.labels.maxCoeff() >= model.n_classes) {
      throw std::invalid_argument("evaluate: sequence " + s.id + " has labels beyond the " +
                                  std::to_string(model.n_classes) +
                                  " classes of the model");
    }
    const Prediction p = predict(model, s.features);
    probs.middleRows(offset, s.length()) = p.probs;
    pred.segment(offset, s.length()) = p.labels;
    truth.segment(offset, s.length()) =
        s.labels.size() ? s.labels : data::Labels::Constant(s.length(), data::kUnlabeled);
    offset += s.length();
  }
  return metrics::evaluate(probs, pred, truth, model.n_classes);
}

ScoreSummary summarize_scores(std::vector<double> scores) {
  if (scores.empty()) throw std::invalid_argument("summarize_scores: no scores");
  ScoreSummary s;
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double var = 0.0;
  for (double v : scores) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / scores.size());
  s.scores = std::move(scores);
  return s;
}

ScoreSummary run_experiment(const TrainConfig& config, const data::DatasetSplit& dataset,
                            int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("run_experiment: n_seeds must be >= 1");
  std::vector<double> scores;
  for (int i = 0; i < n_seeds; ++i) {
    TrainConfig cfg = config;
    cfg.seed = config_seed(config.seed, static_cast<std::uint64_t>(i));
    data::DatasetSplit split = dataset;
    split.train = subsample_labels(cfg, split.train, cfg.seed);
    const TrainResult r = train(cfg, split);
    scores.push_back(evaluate_model(r.model, split.test).macro_f1);
  }
  return summarize_scores(std::move(scores));
}

}  // namespace behavseg::training
