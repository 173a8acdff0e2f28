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

// Generative side of the switching dynamical system and of the static
// Gaussian-mixture baseline.
//
//   y_1 ~ Cat(pi),           z_1 ~ N(0, I)
//   y_t ~ Cat(softmax(R_{y_{t-1}} z_{t-1} + r_{y_{t-1}}))
//   z_t ~ N(A_{y_t} z_{t-1} + b_{y_t}, diag(Q_{y_t}))
//   x_t ~ N(g(z_t), diag(S))
//
// g is a one-hidden-layer leaky-ReLU network shared by all states. The
// nonlinear variant swaps both affine maps for per-state one-hidden-layer
// networks of hidden width L. Variances are stored as log-variances.

namespace behavseg::gen {

using ad::Matrix;
using ad::Var;
using Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;

enum class DynamicsKind { linear, nonlinear };

struct SLDSParams {
  int n_states = 0;    // K
  int latent_dim = 0;  // L
  int obs_dim = 0;     // D
  DynamicsKind kind = DynamicsKind::linear;

  // Linear variant, one entry per state.
  std::vector<Var> dynamics_matrix;    // A_k [L x L]
  std::vector<Var> dynamics_offset;    // b_k [1 x L]
  std::vector<Var> transition_matrix;  // R_k [K x L]
  std::vector<Var> transition_offset;  // r_k [1 x K]
  // Nonlinear variant, one entry per state.
  std::vector<nn::DenseNet> dynamics_net;    // L -> L -> L
  std::vector<nn::DenseNet> transition_net;  // L -> L -> K

  std::vector<Var> dynamics_log_var;  // log Q_k [1 x L]
  nn::DenseNet decoder;               // L -> L -> D
  Var emission_log_var;               // log S [1 x D]
  VectorXd initial_probs;             // pi, fixed (not trained)

  // Randomly initialized parameters for fitting.
  static SLDSParams init(int n_states, int latent_dim, int obs_dim,
                         DynamicsKind kind, Rng& rng);

  // Batched over rows: z_prev [N x L].
  Var dynamics_mean(int k, const Var& z_prev) const;        // [N x L]
  Var transition_logits(int k_prev, const Var& z_prev) const;  // [N x K]
  Var decode(const Var& z) const;                           // [N x D]

  void validate() const;
  void collect(ad::ParamList& params, const std::string& prefix) const;
};

// Nonlinear parameters whose networks reproduce the affine maps of `linear`
// exactly for latents with every coordinate above -offset.
SLDSParams nonlinear_from_linear(const SLDSParams& linear, double offset);

// --- closed-form densities and divergences --------------------------------

double diag_gaussian_logpdf(const VectorXd& x, const VectorXd& mean,
                            const VectorXd& var);
double diag_gaussian_kl(const VectorXd& q_mean, const VectorXd& q_var,
                        const VectorXd& p_mean, const VectorXd& p_var);
double categorical_kl(const VectorXd& q, const VectorXd& p);

// Row-wise versions on the autodiff graph. Means are [N x d]; log-variances
// are [N x d] for q and a [1 x d] row for p. Results are [N x 1].
Var diag_gaussian_logpdf(const Matrix& x, const Var& mean, const Var& log_var_row);
Var diag_gaussian_kl(const Var& q_mean, const Var& q_log_var, const Var& p_mean,
                     const Var& p_log_var_row);

VectorXd transition_probs(const SLDSParams& params, int y_prev,
                          const VectorXd& z_prev);
double dynamics_logpdf(const SLDSParams& params, const VectorXd& z_t,
                       const VectorXd& z_prev, int k);
double dynamics_kl(const VectorXd& q_mean, const VectorXd& q_var,
                   const SLDSParams& params, const VectorXd& z_prev, int k);
double emission_logpdf(const SLDSParams& params, const VectorXd& x_t,
                       const VectorXd& z_t);

struct LatentTrajectory {
  Eigen::VectorXi y;  // [T]
  Matrix z;           // [T x L]
  Matrix x;           // [T x D]
};

// Ancestral sampling in the order y_1, z_1, x_1, then y_t, z_t, x_t.
LatentTrajectory sample_sequence(const SLDSParams& params, int length,
                                 std::uint64_t seed);

// --- static Gaussian mixture deep generative model ------------------------

struct GMDGMParams {
  int n_classes = 0;
  int latent_dim = 0;
  int obs_dim = 0;
  Var class_mean;           // f_k, [K x L]
  Var class_log_var;        // log s_k, [K x L]
  nn::DenseNet decoder;     // L -> L -> D
  Var emission_log_var;     // [1 x D]
  VectorXd class_probs;     // pi, fixed

  static GMDGMParams init(int n_classes, int latent_dim, int obs_dim, Rng& rng);
  void validate() const;
  void collect(ad::ParamList& params, const std::string& prefix) const;
};

double gmdgm_prior_logpdf(const GMDGMParams& params, const VectorXd& z, int k);

struct StaticSample {
  Eigen::VectorXi y;
  Matrix z;
  Matrix x;
};
StaticSample gmdgm_sample(const GMDGMParams& params, int n, std::uint64_t seed);

// --- synthetic parameter presets -----------------------------------------

enum class SyntheticKind {
  separated,      // states have distinct fixed points and rotation speeds
  dynamics_only,  // states share one stationary Gaussian around the origin
                  // and differ only in persistence (step size)
};

struct SyntheticOptions {
  int n_states = 3;
  int latent_dim = 2;
  int obs_dim = 4;
  SyntheticKind kind = SyntheticKind::separated;
  double self_transition = 0.97;
  double dynamics_noise_std = 0.05;
  double emission_noise_std = 0.1;
  double fixed_point_radius = 3.0;
  double rotation = 0.25;
  double stationary_std = 1.0;  // dynamics_only
};

SLDSParams make_synthetic_slds(const SyntheticOptions& options, std::uint64_t seed);

// Logit for the self-transition that yields probability `p` when all other
// logits are zero.
double self_transition_logit(double p, int n_states);

}  // namespace behavseg::gen
