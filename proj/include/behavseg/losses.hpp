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
#include <vector>

#include "behavseg/autodiff.hpp"
#include "behavseg/generative.hpp"
#include "behavseg/inference.hpp"

// Training objectives.
//
// Every ELBO is assembled from the same named pieces so that training logs and
// the NaN guard can report them individually:
//
//   elbo = reconstruction
//          - anneal * (kl_z_initial + kl_y_initial + kl_dynamics + kl_transition)
//          + alpha * classification
//
// For a labeled frame the categorical "KL" pieces reduce to negative
// log-probabilities of the observed state (KL[e_y || p] = -log p_y).

namespace behavseg::losses {

using ad::Matrix;
using ad::Var;
using Labels = Eigen::VectorXi;

struct LossWeights {
  double alpha = 100.0;
  double kl_anneal = 1.0;
  Eigen::VectorXd class_weights;  // empty means all ones
};

// Per-frame mixture of one-hot rows (labeled frames) and classifier rows
// (unlabeled frames).
struct RDistribution {
  Var probs;                  // [T x K]
  std::vector<bool> labeled;  // [T]
};

struct ElboTerms {
  Var reconstruction;
  Var kl_z_initial;
  Var kl_y_initial;
  Var kl_dynamics;
  Var kl_transition;
  Var classification;  // sum over labeled frames of w_y log q(y | x)

  Var elbo(double kl_anneal = 1.0, double alpha = 0.0) const;
};

// One standard-normal [T x L] draw per class, shared by every term that uses
// the corresponding sample z~_t^k.
struct NoiseDraws {
  std::vector<Matrix> eps;
  static NoiseDraws draw(ad::Index length, int n_classes, int latent_dim,
                         std::uint64_t seed);
};

RDistribution build_r_distribution(const Var& classifier_probs, const Labels& labels);
Matrix build_r_distribution(const Matrix& classifier_probs, const Labels& labels);

// --- switching dynamical system -----------------------------------------

// Marginalized bound evaluated with an arbitrary per-frame class distribution
// `r` (the classifier output, or the one-hot mixture). Leaves
// `classification` at zero.
ElboTerms slds_elbo_marginal(const Matrix& x, const Var& r,
                             const inference::PosteriorOutputs& posterior,
                             const gen::SLDSParams& gen, const NoiseDraws& noise);

// Bound for a fully labeled sequence, evaluated by gathering the observed
// branch per frame.
ElboTerms slds_elbo_labeled(const Matrix& x, const Labels& labels,
                            const inference::PosteriorOutputs& posterior,
                            const gen::SLDSParams& gen, const NoiseDraws& noise);

// Convenience entry points: run the posterior networks and draw noise from
// `seed`, then evaluate. `training` enables dropout.
Var elbo_labeled(const Matrix& x, const Labels& labels,
                 const inference::PosteriorNets& nets, const gen::SLDSParams& gen,
                 std::uint64_t seed, bool training = false);
Var elbo_unlabeled(const Matrix& x, const inference::PosteriorNets& nets,
                   const gen::SLDSParams& gen, std::uint64_t seed,
                   bool training = false);
Var elbo_semisupervised(const Matrix& x, const Labels& labels,
                        const inference::PosteriorNets& nets,
                        const gen::SLDSParams& gen, const LossWeights& weights,
                        std::uint64_t seed, bool training = false);
ElboTerms semisupervised_terms(const Matrix& x, const Labels& labels,
                               const inference::PosteriorOutputs& posterior,
                               const gen::SLDSParams& gen,
                               const Eigen::VectorXd& class_weights,
                               const NoiseDraws& noise);

// --- Gaussian mixture deep generative model ------------------------------

ElboTerms gmdgm_elbo_marginal(const Matrix& x, const Var& r,
                              const inference::PosteriorOutputs& posterior,
                              const gen::GMDGMParams& gen, const NoiseDraws& noise);
ElboTerms gmdgm_elbo_labeled_terms(const Matrix& x, const Labels& labels,
                                   const inference::PosteriorOutputs& posterior,
                                   const gen::GMDGMParams& gen,
                                   const NoiseDraws& noise);

Var gmdgm_elbo_labeled(const Matrix& x, const Labels& labels,
                       const inference::PosteriorNets& nets,
                       const gen::GMDGMParams& gen, std::uint64_t seed,
                       bool training = false);
Var gmdgm_elbo_unlabeled(const Matrix& x, const inference::PosteriorNets& nets,
                         const gen::GMDGMParams& gen, std::uint64_t seed,
                         bool training = false);
ElboTerms gmdgm_semisupervised_terms(const Matrix& x, const Labels& labels,
                                     const inference::PosteriorOutputs& posterior,
                                     const gen::GMDGMParams& gen,
                                     const Eigen::VectorXd& class_weights,
                                     const NoiseDraws& noise);

// --- classification ------------------------------------------------------

// Sum over labeled frames of w_{y_t} log q(y_t | x) on the graph.
Var weighted_log_likelihood(const Var& log_probs, const Labels& labels,
                            const Eigen::VectorXd& class_weights);
// Sum over labeled frames of w_{y_t}.
double labeled_weight(const Labels& labels, const Eigen::VectorXd& class_weights);

struct ClassificationLoss {
  double value = 0.0;
  bool has_labels = false;
};

// Weighted mean negative log-likelihood over labeled frames.
ClassificationLoss classification_loss(const Matrix& probs, const Labels& labels,
                                       const Eigen::VectorXd& class_weights);

// w_k proportional to 1 / count_k over classes that occur, normalized to mean 1
// across those classes; absent classes get weight 1.
Eigen::VectorXd class_weights_from_counts(const Eigen::VectorXi& counts);

// min(epoch / anneal_epochs, 1).
double anneal_weight(int epoch, int anneal_epochs = 100);

}  // namespace behavseg::losses
