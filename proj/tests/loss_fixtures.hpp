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

#include <cmath>
#include <vector>

#include "behavseg/generative.hpp"
#include "behavseg/inference.hpp"
#include "behavseg/losses.hpp"
#include "test_util.hpp"

// Small frozen instances shared by the loss unit tests and the acceptance
// binary. Posterior outputs are plain constants so the oracles can read them.
namespace fixtures {

using namespace behavseg;
using ad::Matrix;
using ad::Var;
using Eigen::VectorXd;
using testutil::random_matrix;

struct Frozen {
  Matrix x;                             // [T x D]
  Matrix q;                             // [T x K] posterior class probabilities
  std::vector<Matrix> mean, var;        // K entries [T x L]
  inference::PosteriorOutputs post;
  losses::NoiseDraws noise;
  gen::SLDSParams slds;
};

inline Matrix random_simplex(Eigen::Index T, int K, std::uint64_t seed) {
  Matrix logits = random_matrix(T, K, seed);
  Matrix p = logits.array().exp();
  for (Eigen::Index t = 0; t < T; ++t) p.row(t) /= p.row(t).sum();
  return p;
}

inline inference::PosteriorOutputs constant_posterior(const Matrix& q,
                                                      const std::vector<Matrix>& mean,
                                                      const std::vector<Matrix>& var) {
  inference::PosteriorOutputs post;
  post.probs = ad::constant(q);
  post.log_probs = ad::constant(q.array().log().matrix());
  for (std::size_t k = 0; k < mean.size(); ++k) {
    post.mean.push_back(ad::constant(mean[k]));
    post.log_var.push_back(ad::constant(var[k].array().log().matrix()));
  }
  return post;
}

inline Frozen make_frozen(int T, int K, int L, int D, std::uint64_t seed,
                          gen::DynamicsKind kind = gen::DynamicsKind::linear) {
  Frozen f;
  Rng rng(seed);
  f.slds = gen::SLDSParams::init(K, L, D, kind, rng);
  f.slds.emission_log_var.mutable_value() = random_matrix(1, D, seed + 1, 0.3);
  for (int k = 0; k < K; ++k) {
    f.slds.dynamics_log_var[k].mutable_value() = random_matrix(1, L, seed + 2 + k, 0.3);
  }
  f.slds.initial_probs = random_simplex(1, K, seed + 50).row(0).transpose();
  f.x = random_matrix(T, D, seed + 100);
  f.q = random_simplex(T, K, seed + 101);
  for (int k = 0; k < K; ++k) {
    f.mean.push_back(random_matrix(T, L, seed + 200 + k));
    f.var.push_back(random_matrix(T, L, seed + 300 + k).array().abs() + 0.2);
  }
  f.post = constant_posterior(f.q, f.mean, f.var);
  f.noise = losses::NoiseDraws::draw(T, K, L, seed + 400);
  return f;
}

inline VectorXd row(const Matrix& m, Eigen::Index t) { return m.row(t).transpose(); }

inline VectorXd sample_z(const Frozen& f, Eigen::Index t, int k) {
  return row(f.mean[k], t) +
         row(f.var[k], t).array().sqrt().matrix().cwiseProduct(row(f.noise.eps[k], t));
}

// Direct evaluation of every term of the marginalized bound by enumeration
// over states, using only value-level densities.
inline double brute_force_marginal(const Frozen& f, const Matrix& q) {
  const auto& p = f.slds;
  const Eigen::Index T = f.x.rows();
  const int K = p.n_states, L = p.latent_dim;
  double elbo = 0.0;
  for (Eigen::Index t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k)
      elbo += q(t, k) * gen::emission_logpdf(p, row(f.x, t), sample_z(f, t, k));
  for (int k = 0; k < K; ++k)
    elbo -= q(0, k) * gen::diag_gaussian_kl(row(f.mean[k], 0), row(f.var[k], 0),
                                            VectorXd::Zero(L), VectorXd::Ones(L));
  elbo -= gen::categorical_kl(row(q, 0), p.initial_probs);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (int k = 0; k < K; ++k)
      for (int kp = 0; kp < K; ++kp)
        elbo -= q(t, k) * q(t - 1, kp) *
                gen::dynamics_kl(row(f.mean[k], t), row(f.var[k], t), p,
                                 sample_z(f, t - 1, kp), k);
    for (int k = 0; k < K; ++k)
      elbo -= q(t - 1, k) *
              gen::categorical_kl(row(q, t), gen::transition_probs(p, k, sample_z(f, t - 1, k)));
  }
  return elbo;
}

// Direct evaluation of the fully labeled bound.
inline double brute_force_labeled(const Frozen& f, const Eigen::VectorXi& y) {
  const auto& p = f.slds;
  const Eigen::Index T = f.x.rows();
  const int L = p.latent_dim;
  double elbo = 0.0;
  for (Eigen::Index t = 0; t < T; ++t)
    elbo += gen::emission_logpdf(p, row(f.x, t), sample_z(f, t, y[t]));
  elbo -= gen::diag_gaussian_kl(row(f.mean[y[0]], 0), row(f.var[y[0]], 0), VectorXd::Zero(L),
                                VectorXd::Ones(L));
  elbo += std::log(p.initial_probs[y[0]]);
  for (Eigen::Index t = 1; t < T; ++t) {
    const VectorXd zp = sample_z(f, t - 1, y[t - 1]);
    elbo -= gen::dynamics_kl(row(f.mean[y[t]], t), row(f.var[y[t]], t), p, zp, y[t]);
    elbo += std::log(gen::transition_probs(p, y[t - 1], zp)[y[t]]);
  }
  return elbo;
}

inline Matrix one_hot(const Eigen::VectorXi& y, int K) {
  Matrix h = Matrix::Zero(y.size(), K);
  for (Eigen::Index t = 0; t < y.size(); ++t) h(t, y[t]) = 1.0;
  return h;
}

}  // namespace fixtures
