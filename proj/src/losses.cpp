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

#include "behavseg/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "behavseg/data_io.hpp"

namespace behavseg::losses {

namespace {

using ad::Index;

Var zero() { return ad::constant_scalar(0.0); }

double weight_of(const Eigen::VectorXd& w, int k) {
  return w.size() == 0 ? 1.0 : w[k];
}

void check_labels(const Labels& labels, Index T, int K) {
  if (labels.size() != T) {
    throw std::invalid_argument("labels length " + std::to_string(labels.size()) +
                                " does not match " + std::to_string(T) + " frames");
  }
  for (Index t = 0; t < T; ++t) {
    if (labels[t] < data::kUnlabeled || labels[t] >= K) {
      throw std::invalid_argument("label " + std::to_string(labels[t]) +
                                  " out of range at frame " + std::to_string(t));
    }
  }
}

std::vector<Var> sample_latents(const inference::PosteriorOutputs& post,
                                const NoiseDraws& noise) {
  std::vector<Var> z;
  for (std::size_t k = 0; k < post.mean.size(); ++k) {
    z.push_back(inference::reparam_sample(post.mean[k], post.log_var[k], noise.eps.at(k)));
  }
  return z;
}

// log p(x_t | z~_t^k) for every class, as a [T x K] matrix.
Var emission_table(const Matrix& x, const std::vector<Var>& z, const nn::DenseNet& decoder,
                   const Var& emission_log_var) {
  const Index T = x.rows();
  const auto K = static_cast<Index>(z.size());
  Var stacked = ad::vcat(z);
  Matrix tiled = x.replicate(K, 1);
  Var logp = gen::diag_gaussian_logpdf(tiled, decoder.forward(stacked), emission_log_var);
  std::vector<Var> columns;
  for (Index k = 0; k < K; ++k) columns.push_back(ad::rows(logp, k * T, T));
  return ad::hcat(columns);
}

Matrix one_hot(const Labels& labels, Index begin, Index count, int K) {
  Matrix m = Matrix::Zero(count, K);
  for (Index t = 0; t < count; ++t) {
    const int y = labels[begin + t];
    if (y >= 0) m(t, y) = 1.0;
  }
  return m;
}

void require_all_labeled(const Labels& labels) {
  for (Index t = 0; t < labels.size(); ++t) {
    if (labels[t] == data::kUnlabeled) {
      throw std::invalid_argument("labeled ELBO: frame " + std::to_string(t) +
                                  " is unlabeled");
    }
  }
}

Matrix log_prior_row(const Eigen::VectorXd& probs) {
  return probs.array().log().matrix().transpose();
}

}  // namespace

Var ElboTerms::elbo(double kl_anneal, double alpha) const {
  Var kl = kl_z_initial + kl_y_initial + kl_dynamics + kl_transition;
  return reconstruction - ad::scale(kl, kl_anneal) + ad::scale(classification, alpha);
}

NoiseDraws NoiseDraws::draw(ad::Index length, int n_classes, int latent_dim,
                            std::uint64_t seed) {
  NoiseDraws n;
  for (int k = 0; k < n_classes; ++k) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    n.eps.push_back(standard_normal(length, latent_dim, rng));
  }
  return n;
}

RDistribution build_r_distribution(const Var& classifier_probs, const Labels& labels) {
  const Index T = classifier_probs.rows();
  const int K = static_cast<int>(classifier_probs.cols());
  check_labels(labels, T, K);
  Matrix keep = Matrix::Ones(T, K);
  Matrix hot = Matrix::Zero(T, K);
  RDistribution r;
  r.labeled.assign(T, false);
  for (Index t = 0; t < T; ++t) {
    if (labels[t] != data::kUnlabeled) {
      keep.row(t).setZero();
      hot(t, labels[t]) = 1.0;
      r.labeled[t] = true;
    }
  }
  r.probs = ad::add_const(ad::mul_const(classifier_probs, keep), hot);
  return r;
}

Matrix build_r_distribution(const Matrix& classifier_probs, const Labels& labels) {
  return build_r_distribution(ad::constant(classifier_probs), labels).probs.value();
}

ElboTerms slds_elbo_marginal(const Matrix& x, const Var& r,
                             const inference::PosteriorOutputs& post,
                             const gen::SLDSParams& gen, const NoiseDraws& noise) {
  const Index T = x.rows();
  const int K = gen.n_states, L = gen.latent_dim;
  if (r.rows() != T || r.cols() != K || static_cast<int>(post.mean.size()) != K) {
    throw std::invalid_argument("slds_elbo_marginal: inconsistent shapes");
  }
  const std::vector<Var> z = sample_latents(post, noise);
  ElboTerms terms;

  terms.reconstruction =
      ad::sum(ad::mul(r, emission_table(x, z, gen.decoder, gen.emission_log_var)));

  // Initial state.
  Var r0 = ad::rows(r, 0, 1);
  const Var zero_mean = ad::constant(Matrix::Zero(1, L));
  const Var zero_log_var = ad::constant(Matrix::Zero(1, L));
  std::vector<Var> kl0;
  for (int k = 0; k < K; ++k) {
    kl0.push_back(gen::diag_gaussian_kl(ad::rows(post.mean[k], 0, 1),
                                        ad::rows(post.log_var[k], 0, 1), zero_mean,
                                        zero_log_var));
  }
  terms.kl_z_initial = ad::sum(ad::mul(r0, ad::hcat(kl0)));
  terms.kl_y_initial = ad::sum(ad::xlogx(r0)) -
                       ad::sum(ad::mul_const(r0, log_prior_row(gen.initial_probs)));

  terms.kl_dynamics = zero();
  terms.kl_transition = zero();
  terms.classification = zero();
  if (T < 2) return terms;

  const Index n = T - 1;
  Var r_prev = ad::rows(r, 0, n);
  Var r_next = ad::rows(r, 1, n);
  Var next_neg_entropy = ad::row_sum(ad::xlogx(r_next));

  std::vector<Var> z_prev;
  for (int k = 0; k < K; ++k) z_prev.push_back(ad::rows(z[k], 0, n));

  std::vector<Var> dyn;
  for (int k = 0; k < K; ++k) {
    Var q_mean = ad::rows(post.mean[k], 1, n);
    Var q_log_var = ad::rows(post.log_var[k], 1, n);
    Var w_next = ad::cols(r_next, k, 1);
    for (int kp = 0; kp < K; ++kp) {
      Var kl = gen::diag_gaussian_kl(q_mean, q_log_var, gen.dynamics_mean(k, z_prev[kp]),
                                     gen.dynamics_log_var[k]);
      Var w = ad::mul(w_next, ad::cols(r_prev, kp, 1));
      dyn.push_back(ad::sum(ad::mul(kl, w)));
    }
  }
  terms.kl_dynamics = ad::sum(ad::vcat(dyn));

  std::vector<Var> trans;
  for (int k = 0; k < K; ++k) {
    Var log_p = ad::log_softmax_rows(gen.transition_logits(k, z_prev[k]));
    Var kl = next_neg_entropy - ad::row_sum(ad::mul(r_next, log_p));
    trans.push_back(ad::sum(ad::mul(kl, ad::cols(r_prev, k, 1))));
  }
  terms.kl_transition = ad::sum(ad::vcat(trans));
  return terms;
}

ElboTerms slds_elbo_labeled(const Matrix& x, const Labels& labels,
                            const inference::PosteriorOutputs& post,
                            const gen::SLDSParams& gen, const NoiseDraws& noise) {
  const Index T = x.rows();
  const int K = gen.n_states, L = gen.latent_dim;
  check_labels(labels, T, K);
  require_all_labeled(labels);
  std::vector<int> y(labels.data(), labels.data() + T);

  std::vector<Var> eps;
  for (int k = 0; k < K; ++k) eps.push_back(ad::constant(noise.eps.at(k)));
  Var mean = ad::select_rows(post.mean, y);
  Var log_var = ad::select_rows(post.log_var, y);
  Var z = inference::reparam_sample(mean, log_var, ad::select_rows(eps, y).value());

  ElboTerms terms;
  terms.reconstruction = ad::sum(
      gen::diag_gaussian_logpdf(x, gen.decode(z), gen.emission_log_var));
  terms.kl_z_initial = ad::sum(gen::diag_gaussian_kl(
      ad::rows(mean, 0, 1), ad::rows(log_var, 0, 1), ad::constant(Matrix::Zero(1, L)),
      ad::constant(Matrix::Zero(1, L))));
  terms.kl_y_initial = ad::constant_scalar(-std::log(gen.initial_probs[y[0]]));
  terms.kl_dynamics = zero();
  terms.kl_transition = zero();
  terms.classification = zero();
  if (T < 2) return terms;

  const Index n = T - 1;
  Var z_prev = ad::rows(z, 0, n);
  Var q_mean = ad::rows(mean, 1, n);
  Var q_log_var = ad::rows(log_var, 1, n);
  std::vector<int> y_next(y.begin() + 1, y.end());
  std::vector<int> y_prev(y.begin(), y.end() - 1);

  std::vector<Var> kl_by_state, log_p_by_prev;
  for (int k = 0; k < K; ++k) {
    kl_by_state.push_back(gen::diag_gaussian_kl(
        q_mean, q_log_var, gen.dynamics_mean(k, z_prev), gen.dynamics_log_var[k]));
    log_p_by_prev.push_back(ad::log_softmax_rows(gen.transition_logits(k, z_prev)));
  }
  terms.kl_dynamics = ad::sum(ad::select_rows(kl_by_state, y_next));
  Var log_p = ad::select_rows(log_p_by_prev, y_prev);
  terms.kl_transition =
      ad::neg(ad::sum(ad::mul_const(log_p, one_hot(labels, 1, n, K))));
  return terms;
}

Var elbo_labeled(const Matrix& x, const Labels& labels,
                 const inference::PosteriorNets& nets, const gen::SLDSParams& gen,
                 std::uint64_t seed, bool training) {
  auto post = inference::run_posteriors(nets, ad::constant(x), training,
                                        derive_seed(seed, {0xd7}));
  auto noise = NoiseDraws::draw(x.rows(), gen.n_states, gen.latent_dim,
                                derive_seed(seed, {0x0e}));
  return slds_elbo_labeled(x, labels, post, gen, noise).elbo();
}

Var elbo_unlabeled(const Matrix& x, const inference::PosteriorNets& nets,
                   const gen::SLDSParams& gen, std::uint64_t seed, bool training) {
  auto post = inference::run_posteriors(nets, ad::constant(x), training,
                                        derive_seed(seed, {0xd7}));
  auto noise = NoiseDraws::draw(x.rows(), gen.n_states, gen.latent_dim,
                                derive_seed(seed, {0x0e}));
  return slds_elbo_marginal(x, post.probs, post, gen, noise).elbo();
}

ElboTerms semisupervised_terms(const Matrix& x, const Labels& labels,
                               const inference::PosteriorOutputs& post,
                               const gen::SLDSParams& gen,
                               const Eigen::VectorXd& class_weights,
                               const NoiseDraws& noise) {
  RDistribution r = build_r_distribution(post.probs, labels);
  ElboTerms terms = slds_elbo_marginal(x, r.probs, post, gen, noise);
  terms.classification = weighted_log_likelihood(post.log_probs, labels, class_weights);
  return terms;
}

Var elbo_semisupervised(const Matrix& x, const Labels& labels,
                        const inference::PosteriorNets& nets,
                        const gen::SLDSParams& gen, const LossWeights& weights,
                        std::uint64_t seed, bool training) {
  auto post = inference::run_posteriors(nets, ad::constant(x), training,
                                        derive_seed(seed, {0xd7}));
  auto noise = NoiseDraws::draw(x.rows(), gen.n_states, gen.latent_dim,
                                derive_seed(seed, {0x0e}));
  return semisupervised_terms(x, labels, post, gen, weights.class_weights, noise)
      .elbo(weights.kl_anneal, weights.alpha);
}

ElboTerms gmdgm_elbo_marginal(const Matrix& x, const Var& r,
                              const inference::PosteriorOutputs& post,
                              const gen::GMDGMParams& gen, const NoiseDraws& noise) {
  const Index T = x.rows();
  const int K = gen.n_classes;
  if (r.rows() != T || r.cols() != K || static_cast<int>(post.mean.size()) != K) {
    throw std::invalid_argument("gmdgm_elbo_marginal: inconsistent shapes");
  }
  const std::vector<Var> z = sample_latents(post, noise);
  ElboTerms terms;
  terms.reconstruction =
      ad::sum(ad::mul(r, emission_table(x, z, gen.decoder, gen.emission_log_var)));
  std::vector<Var> kl;
  for (int k = 0; k < K; ++k) {
    Var prior_mean = ad::rows(gen.class_mean, k, 1);
    Var prior_log_var = ad::rows(gen.class_log_var, k, 1);
    Var mean_rows = ad::matmul(ad::constant(Matrix::Ones(T, 1)), prior_mean);
    kl.push_back(gen::diag_gaussian_kl(post.mean[k], post.log_var[k], mean_rows,
                                       prior_log_var));
  }
  terms.kl_z_initial = ad::sum(ad::mul(r, ad::hcat(kl)));
  Matrix log_prior = log_prior_row(gen.class_probs).replicate(T, 1);
  terms.kl_y_initial = ad::sum(ad::xlogx(r)) - ad::sum(ad::mul_const(r, log_prior));
  terms.kl_dynamics = zero();
  terms.kl_transition = zero();
  terms.classification = zero();
  return terms;
}

ElboTerms gmdgm_elbo_labeled_terms(const Matrix& x, const Labels& labels,
                                   const inference::PosteriorOutputs& post,
                                   const gen::GMDGMParams& gen,
                                   const NoiseDraws& noise) {
  const Index T = x.rows();
  const int K = gen.n_classes;
  check_labels(labels, T, K);
  require_all_labeled(labels);
  std::vector<int> y(labels.data(), labels.data() + T);
  std::vector<Var> eps;
  for (int k = 0; k < K; ++k) eps.push_back(ad::constant(noise.eps.at(k)));
  Var mean = ad::select_rows(post.mean, y);
  Var log_var = ad::select_rows(post.log_var, y);
  Var z = inference::reparam_sample(mean, log_var, ad::select_rows(eps, y).value());

  // Gather the class prior rows with a one-hot matrix product.
  Var hot = ad::constant(one_hot(labels, 0, T, K));
  Var prior_mean = ad::matmul(hot, gen.class_mean);
  Var prior_log_var = ad::matmul(hot, gen.class_log_var);
  Var kl = ad::scale(
      ad::row_sum(prior_log_var - log_var +
                  ad::mul(ad::exp(log_var) + ad::square(mean - prior_mean),
                          ad::exp(ad::neg(prior_log_var)))) ,
      0.5);
  ElboTerms terms;
  terms.reconstruction =
      ad::sum(gen::diag_gaussian_logpdf(x, gen.decoder.forward(z), gen.emission_log_var));
  terms.kl_z_initial = ad::add_scalar(ad::sum(kl), -0.5 * static_cast<double>(T * gen.latent_dim));
  double neg_log_prior = 0.0;
  for (int yt : y) neg_log_prior -= std::log(gen.class_probs[yt]);
  terms.kl_y_initial = ad::constant_scalar(neg_log_prior);
  terms.kl_dynamics = zero();
  terms.kl_transition = zero();
  terms.classification = zero();
  return terms;
}

Var gmdgm_elbo_labeled(const Matrix& x, const Labels& labels,
                       const inference::PosteriorNets& nets,
                       const gen::GMDGMParams& gen, std::uint64_t seed, bool training) {
  auto post = inference::run_posteriors(nets, ad::constant(x), training,
                                        derive_seed(seed, {0xd7}));
  auto noise = NoiseDraws::draw(x.rows(), gen.n_classes, gen.latent_dim,
                                derive_seed(seed, {0x0e}));
  return gmdgm_elbo_labeled_terms(x, labels, post, gen, noise).elbo();
}

Var gmdgm_elbo_unlabeled(const Matrix& x, const inference::PosteriorNets& nets,
                         const gen::GMDGMParams& gen, std::uint64_t seed,
                         bool training) {
  auto post = inference::run_posteriors(nets, ad::constant(x), training,
                                        derive_seed(seed, {0xd7}));
  auto noise = NoiseDraws::draw(x.rows(), gen.n_classes, gen.latent_dim,
                                derive_seed(seed, {0x0e}));
  return gmdgm_elbo_marginal(x, post.probs, post, gen, noise).elbo();
}

ElboTerms gmdgm_semisupervised_terms(const Matrix& x, const Labels& labels,
                                     const inference::PosteriorOutputs& post,
                                     const gen::GMDGMParams& gen,
                                     const Eigen::VectorXd& class_weights,
                                     const NoiseDraws& noise) {
  RDistribution r = build_r_distribution(post.probs, labels);
  ElboTerms terms = gmdgm_elbo_marginal(x, r.probs, post, gen, noise);
  terms.classification = weighted_log_likelihood(post.log_probs, labels, class_weights);
  return terms;
}

Var weighted_log_likelihood(const Var& log_probs, const Labels& labels,
                            const Eigen::VectorXd& class_weights) {
  const Index T = log_probs.rows();
  const int K = static_cast<int>(log_probs.cols());
  check_labels(labels, T, K);
  Matrix w = Matrix::Zero(T, K);
  for (Index t = 0; t < T; ++t) {
    if (labels[t] != data::kUnlabeled) w(t, labels[t]) = weight_of(class_weights, labels[t]);
  }
  return ad::sum(ad::mul_const(log_probs, w));
}

double labeled_weight(const Labels& labels, const Eigen::VectorXd& class_weights) {
  double total = 0.0;
  for (Index t = 0; t < labels.size(); ++t) {
    if (labels[t] != data::kUnlabeled) total += weight_of(class_weights, labels[t]);
  }
  return total;
}

ClassificationLoss classification_loss(const Matrix& probs, const Labels& labels,
                                       const Eigen::VectorXd& class_weights) {
  check_labels(labels, probs.rows(), static_cast<int>(probs.cols()));
  double num = 0.0, den = 0.0;
  for (Index t = 0; t < labels.size(); ++t) {
    const int y = labels[t];
    if (y == data::kUnlabeled) continue;
    const double w = weight_of(class_weights, y);
    num -= w * std::log(probs(t, y));
    den += w;
  }
  if (den == 0.0) return {0.0, false};
  return {num / den, true};
}

Eigen::VectorXd class_weights_from_counts(const Eigen::VectorXi& counts) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(counts.size());
  double sum = 0.0;
  int present = 0;
  for (Index k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0) {
      w[k] = 1.0 / counts[k];
      sum += w[k];
      ++present;
    }
  }
  if (present == 0) return w;
  const double mean = sum / present;
  for (Index k = 0; k < counts.size(); ++k)
    if (counts[k] > 0) w[k] /= mean;
  return w;
}

double anneal_weight(int epoch, int anneal_epochs) {
  if (epoch < 0) throw std::invalid_argument("anneal_weight: epoch must be >= 0");
  if (anneal_epochs <= 0) return 1.0;
  return std::min(static_cast<double>(epoch) / anneal_epochs, 1.0);
}

}  // namespace behavseg::losses
