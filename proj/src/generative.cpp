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

#include "behavseg/generative.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace behavseg::gen {

namespace {

Matrix row_of(const VectorXd& v) { return v.transpose(); }

VectorXd var_row(const Var& log_var) {
  return log_var.value().row(0).transpose().array().exp();
}

int sample_categorical(const VectorXd& p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cum = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    cum += p[k];
    if (u < cum) return static_cast<int>(k);
  }
  return static_cast<int>(p.size() - 1);
}

VectorXd softmax(const VectorXd& logits) {
  VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

void check_positive_simplex(const VectorXd& p, int n, const char* what) {
  if (p.size() != n) {
    throw std::invalid_argument(std::string(what) + ": wrong length");
  }
  if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(what) + ": not a probability simplex");
  }
}

}  // namespace

SLDSParams SLDSParams::init(int n_states, int latent_dim, int obs_dim,
                            DynamicsKind kind, Rng& rng) {
  if (n_states < 1 || latent_dim < 1 || obs_dim < 1) {
    throw std::invalid_argument("SLDSParams::init: dimensions must be >= 1");
  }
  SLDSParams p;
  p.n_states = n_states;
  p.latent_dim = latent_dim;
  p.obs_dim = obs_dim;
  p.kind = kind;
  const int L = latent_dim, K = n_states;
  for (int k = 0; k < K; ++k) {
    if (kind == DynamicsKind::linear) {
      Matrix a = 0.9 * Matrix::Identity(L, L) + 0.05 * standard_normal(L, L, rng);
      p.dynamics_matrix.push_back(ad::parameter(a));
      p.dynamics_offset.push_back(ad::parameter(0.1 * standard_normal(1, L, rng)));
      p.transition_matrix.push_back(ad::parameter(0.1 * standard_normal(K, L, rng)));
      Matrix r = Matrix::Zero(1, K);
      r(0, k) = 2.0;
      p.transition_offset.push_back(ad::parameter(r));
    } else {
      p.dynamics_net.push_back(nn::DenseNet::init(L, L, L, rng));
      p.transition_net.push_back(nn::DenseNet::init(L, L, K, rng));
    }
    p.dynamics_log_var.push_back(
        ad::parameter(Matrix::Constant(1, L, std::log(0.1))));
  }
  p.decoder = nn::DenseNet::init(L, L, obs_dim, rng);
  p.emission_log_var = ad::parameter(Matrix::Zero(1, obs_dim));
  p.initial_probs = VectorXd::Constant(K, 1.0 / K);
  return p;
}

Var SLDSParams::dynamics_mean(int k, const Var& z_prev) const {
  if (kind == DynamicsKind::linear) {
    return ad::add_row(ad::matmul(z_prev, ad::transpose(dynamics_matrix.at(k))),
                       dynamics_offset.at(k));
  }
  return dynamics_net.at(k).forward(z_prev);
}

Var SLDSParams::transition_logits(int k_prev, const Var& z_prev) const {
  if (kind == DynamicsKind::linear) {
    return ad::add_row(
        ad::matmul(z_prev, ad::transpose(transition_matrix.at(k_prev))),
        transition_offset.at(k_prev));
  }
  return transition_net.at(k_prev).forward(z_prev);
}

Var SLDSParams::decode(const Var& z) const { return decoder.forward(z); }

void SLDSParams::validate() const {
  if (n_states < 1 || latent_dim < 1 || obs_dim < 1) {
    throw std::invalid_argument("SLDS params: dimensions must be >= 1");
  }
  const auto K = static_cast<std::size_t>(n_states);
  if (dynamics_log_var.size() != K) {
    throw std::invalid_argument("SLDS params: need one dynamics variance per state");
  }
  if (kind == DynamicsKind::linear) {
    if (dynamics_matrix.size() != K || dynamics_offset.size() != K ||
        transition_matrix.size() != K || transition_offset.size() != K) {
      throw std::invalid_argument("SLDS params: per-state linear maps missing");
    }
  } else if (dynamics_net.size() != K || transition_net.size() != K) {
    throw std::invalid_argument("SLDS params: per-state networks missing");
  }
  for (const auto& lv : dynamics_log_var) {
    if (!lv.value().allFinite()) {
      throw std::invalid_argument("SLDS params: non-positive dynamics variance");
    }
  }
  if (!emission_log_var.value().allFinite()) {
    throw std::invalid_argument("SLDS params: non-positive emission variance");
  }
  check_positive_simplex(initial_probs, n_states, "SLDS initial_probs");
}

void SLDSParams::collect(ad::ParamList& params, const std::string& prefix) const {
  for (int k = 0; k < n_states; ++k) {
    const std::string p = prefix + ".state" + std::to_string(k);
    if (kind == DynamicsKind::linear) {
      params.add(p + ".dynamics_matrix", dynamics_matrix[k]);
      params.add(p + ".dynamics_offset", dynamics_offset[k]);
      params.add(p + ".transition_matrix", transition_matrix[k]);
      params.add(p + ".transition_offset", transition_offset[k]);
    } else {
      dynamics_net[k].collect(params, p + ".dynamics_net");
      transition_net[k].collect(params, p + ".transition_net");
    }
    params.add(p + ".dynamics_log_var", dynamics_log_var[k]);
  }
  decoder.collect(params, prefix + ".decoder");
  params.add(prefix + ".emission_log_var", emission_log_var);
}

SLDSParams nonlinear_from_linear(const SLDSParams& linear, double offset) {
  if (linear.kind != DynamicsKind::linear) {
    throw std::invalid_argument("nonlinear_from_linear: input is not linear");
  }
  SLDSParams out;
  out.n_states = linear.n_states;
  out.latent_dim = linear.latent_dim;
  out.obs_dim = linear.obs_dim;
  out.kind = DynamicsKind::nonlinear;
  const int L = linear.latent_dim;
  const Matrix shift = Matrix::Constant(1, L, offset);
  auto lift = [&](const Matrix& map, const Matrix& bias) {
    // h = z + c (positive, so the leaky unit is the identity); out = h M^T + b - c M^T
    nn::DenseNet net;
    net.hidden = {ad::parameter(Matrix::Identity(L, L)), ad::parameter(shift)};
    net.output = {ad::parameter(map.transpose()),
                  ad::parameter(bias - shift * map.transpose())};
    net.slope = linear.decoder.slope;
    return net;
  };
  for (int k = 0; k < linear.n_states; ++k) {
    out.dynamics_net.push_back(lift(linear.dynamics_matrix[k].value(),
                                    linear.dynamics_offset[k].value()));
    out.transition_net.push_back(lift(linear.transition_matrix[k].value(),
                                      linear.transition_offset[k].value()));
    out.dynamics_log_var.push_back(ad::parameter(linear.dynamics_log_var[k].value()));
  }
  out.decoder = nn::clone(linear.decoder);
  out.emission_log_var = ad::parameter(linear.emission_log_var.value());
  out.initial_probs = linear.initial_probs;
  return out;
}

double diag_gaussian_logpdf(const VectorXd& x, const VectorXd& mean,
                            const VectorXd& var) {
  if ((var.array() <= 0.0).any()) {
    throw std::invalid_argument("diag_gaussian_logpdf: non-positive variance");
  }
  return -0.5 * ((x - mean).array().square() / var.array() + var.array().log() +
                 kLog2Pi)
                    .sum();
}

double diag_gaussian_kl(const VectorXd& q_mean, const VectorXd& q_var,
                        const VectorXd& p_mean, const VectorXd& p_var) {
  if ((q_var.array() <= 0.0).any() || (p_var.array() <= 0.0).any()) {
    throw std::invalid_argument("diag_gaussian_kl: non-positive variance");
  }
  return 0.5 * ((p_var.array() / q_var.array()).log() +
                (q_var.array() + (q_mean - p_mean).array().square()) /
                    p_var.array() -
                1.0)
                   .sum();
}

double categorical_kl(const VectorXd& q, const VectorXd& p) {
  double kl = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (q[k] > 0.0) kl += q[k] * (std::log(q[k]) - std::log(p[k]));
  }
  return kl;
}

Var diag_gaussian_logpdf(const Matrix& x, const Var& mean, const Var& log_var_row) {
  const double d = static_cast<double>(x.cols());
  Var resid = ad::square(ad::add_const(ad::neg(mean), x));
  Var scaled = ad::mul_row(resid, ad::exp(ad::neg(log_var_row)));
  Var per_row = ad::row_sum(scaled);
  Var log_det = ad::sum(log_var_row);  // 1x1
  // -0.5 * (sum_d resid/var + sum_d log var + d log 2pi)
  Var total = ad::add_scalar(per_row, d * kLog2Pi);
  total = ad::add_row(total, log_det);
  return ad::scale(total, -0.5);
}

Var diag_gaussian_kl(const Var& q_mean, const Var& q_log_var, const Var& p_mean,
                     const Var& p_log_var_row) {
  const double d = static_cast<double>(q_mean.cols());
  Var num = ad::exp(q_log_var) + ad::square(q_mean - p_mean);
  Var scaled = ad::mul_row(num, ad::exp(ad::neg(p_log_var_row)));
  Var terms = ad::add_row(scaled - q_log_var, p_log_var_row);
  return ad::scale(ad::add_scalar(ad::row_sum(terms), -d), 0.5);
}

VectorXd transition_probs(const SLDSParams& params, int y_prev,
                          const VectorXd& z_prev) {
  if (y_prev < 0 || y_prev >= params.n_states) {
    throw std::out_of_range("transition_probs: state index out of range");
  }
  Var logits = params.transition_logits(y_prev, ad::constant(row_of(z_prev)));
  return softmax(logits.value().row(0).transpose());
}

double dynamics_logpdf(const SLDSParams& params, const VectorXd& z_t,
                       const VectorXd& z_prev, int k) {
  VectorXd mean =
      params.dynamics_mean(k, ad::constant(row_of(z_prev))).value().row(0).transpose();
  return diag_gaussian_logpdf(z_t, mean, var_row(params.dynamics_log_var.at(k)));
}

double dynamics_kl(const VectorXd& q_mean, const VectorXd& q_var,
                   const SLDSParams& params, const VectorXd& z_prev, int k) {
  VectorXd mean =
      params.dynamics_mean(k, ad::constant(row_of(z_prev))).value().row(0).transpose();
  return diag_gaussian_kl(q_mean, q_var, mean, var_row(params.dynamics_log_var.at(k)));
}

double emission_logpdf(const SLDSParams& params, const VectorXd& x_t,
                       const VectorXd& z_t) {
  VectorXd mean = params.decoder.forward(Matrix(row_of(z_t))).row(0).transpose();
  return diag_gaussian_logpdf(x_t, mean, var_row(params.emission_log_var));
}

LatentTrajectory sample_sequence(const SLDSParams& params, int length,
                                 std::uint64_t seed) {
  if (length < 1) throw std::invalid_argument("sample_sequence: length must be >= 1");
  params.validate();
  const int L = params.latent_dim, D = params.obs_dim;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index n) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };
  const VectorXd emission_std = var_row(params.emission_log_var).array().sqrt();
  std::vector<VectorXd> dynamics_std;
  for (const auto& lv : params.dynamics_log_var)
    dynamics_std.push_back(var_row(lv).array().sqrt());

  LatentTrajectory out;
  out.y.resize(length);
  out.z.resize(length, L);
  out.x.resize(length, D);
  VectorXd z(L);
  for (int t = 0; t < length; ++t) {
    int y = 0;
    if (t == 0) {
      y = sample_categorical(params.initial_probs, rng);
      z = draw(L);
    } else {
      y = sample_categorical(transition_probs(params, out.y[t - 1], z), rng);
      VectorXd mean =
          params.dynamics_mean(y, ad::constant(row_of(z))).value().row(0).transpose();
      z = mean + dynamics_std[y].cwiseProduct(draw(L));
    }
    VectorXd mean = params.decoder.forward(Matrix(row_of(z))).row(0).transpose();
    out.y[t] = y;
    out.z.row(t) = z.transpose();
    out.x.row(t) = (mean + emission_std.cwiseProduct(draw(D))).transpose();
  }
  return out;
}

GMDGMParams GMDGMParams::init(int n_classes, int latent_dim, int obs_dim, Rng& rng) {
  if (n_classes < 1 || latent_dim < 1 || obs_dim < 1) {
    throw std::invalid_argument("GMDGMParams::init: dimensions must be >= 1");
  }
  GMDGMParams p;
  p.n_classes = n_classes;
  p.latent_dim = latent_dim;
  p.obs_dim = obs_dim;
  p.class_mean = ad::parameter(standard_normal(n_classes, latent_dim, rng));
  p.class_log_var = ad::parameter(Matrix::Zero(n_classes, latent_dim));
  p.decoder = nn::DenseNet::init(latent_dim, latent_dim, obs_dim, rng);
  p.emission_log_var = ad::parameter(Matrix::Zero(1, obs_dim));
  p.class_probs = VectorXd::Constant(n_classes, 1.0 / n_classes);
  return p;
}

void GMDGMParams::validate() const {
  if (class_mean.rows() != n_classes || class_mean.cols() != latent_dim ||
      class_log_var.rows() != n_classes || class_log_var.cols() != latent_dim) {
    throw std::invalid_argument("GMDGM params: class prior shape mismatch");
  }
  if (!class_log_var.value().allFinite() || !emission_log_var.value().allFinite()) {
    throw std::invalid_argument("GMDGM params: non-positive variance");
  }
  check_positive_simplex(class_probs, n_classes, "GMDGM class_probs");
}

void GMDGMParams::collect(ad::ParamList& params, const std::string& prefix) const {
  params.add(prefix + ".class_mean", class_mean);
  params.add(prefix + ".class_log_var", class_log_var);
  decoder.collect(params, prefix + ".decoder");
  params.add(prefix + ".emission_log_var", emission_log_var);
}

double gmdgm_prior_logpdf(const GMDGMParams& params, const VectorXd& z, int k) {
  if (k < 0 || k >= params.n_classes) {
    throw std::out_of_range("gmdgm_prior_logpdf: class index out of range");
  }
  VectorXd mean = params.class_mean.value().row(k).transpose();
  VectorXd var = params.class_log_var.value().row(k).transpose().array().exp();
  return diag_gaussian_logpdf(z, mean, var);
}

StaticSample gmdgm_sample(const GMDGMParams& params, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gmdgm_sample: n must be >= 1");
  params.validate();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int L = params.latent_dim, D = params.obs_dim;
  const VectorXd emission_std = var_row(params.emission_log_var).array().sqrt();
  StaticSample out;
  out.y.resize(n);
  out.z.resize(n, L);
  out.x.resize(n, D);
  for (int i = 0; i < n; ++i) {
    const int y = sample_categorical(params.class_probs, rng);
    VectorXd z(L);
    for (int l = 0; l < L; ++l) {
      z[l] = params.class_mean.value()(y, l) +
             std::exp(0.5 * params.class_log_var.value()(y, l)) * normal(rng);
    }
    VectorXd mean = params.decoder.forward(Matrix(row_of(z))).row(0).transpose();
    for (int d = 0; d < D; ++d) out.x(i, d) = mean[d] + emission_std[d] * normal(rng);
    out.y[i] = y;
    out.z.row(i) = z.transpose();
  }
  return out;
}

double self_transition_logit(double p, int n_states) {
  if (n_states < 2) return 0.0;
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("self_transition_logit: p must be in (0, 1)");
  }
  return std::log(p * (n_states - 1) / (1.0 - p));
}

SLDSParams make_synthetic_slds(const SyntheticOptions& o, std::uint64_t seed) {
  if (o.n_states < 1 || o.latent_dim < 1 || o.obs_dim < 1) {
    throw std::invalid_argument("make_synthetic_slds: dimensions must be >= 1");
  }
  Rng rng(seed);
  const int K = o.n_states, L = o.latent_dim, D = o.obs_dim;
  SLDSParams p;
  p.n_states = K;
  p.latent_dim = L;
  p.obs_dim = D;
  p.kind = DynamicsKind::linear;
  const double self_logit = self_transition_logit(o.self_transition, K);

  for (int k = 0; k < K; ++k) {
    double rho = 0.0, theta = 0.0;
    VectorXd centre = VectorXd::Zero(L);
    if (o.kind == SyntheticKind::separated) {
      rho = 0.8;
      theta = o.rotation * (k + 1) / K;
      const double angle = 2.0 * std::numbers::pi * k / K;
      if (L >= 2) {
        centre[0] = o.fixed_point_radius * std::cos(angle);
        centre[1] = o.fixed_point_radius * std::sin(angle);
      } else {
        centre[0] = o.fixed_point_radius * (k - 0.5 * (K - 1));
      }
    } else {
      // Persistence falls from 0.99 towards 0.5 across states; the noise below
      // is scaled so that every state has the same stationary distribution.
      rho = K > 1 ? 0.99 - 0.49 * k / (K - 1) : 0.99;
    }
    Matrix a = rho * Matrix::Identity(L, L);
    if (L >= 2) {
      a(0, 0) = rho * std::cos(theta);
      a(0, 1) = -rho * std::sin(theta);
      a(1, 0) = rho * std::sin(theta);
      a(1, 1) = rho * std::cos(theta);
    }
    VectorXd b = (Matrix::Identity(L, L) - a) * centre;
    p.dynamics_matrix.push_back(ad::parameter(a));
    p.dynamics_offset.push_back(ad::parameter(b.transpose()));
    const double noise_std = o.kind == SyntheticKind::separated
                                 ? o.dynamics_noise_std
                                 : o.stationary_std * std::sqrt(1.0 - rho * rho);
    p.dynamics_log_var.push_back(
        ad::parameter(Matrix::Constant(1, L, 2.0 * std::log(noise_std))));
    p.transition_matrix.push_back(ad::parameter(Matrix::Zero(K, L)));
    Matrix r = Matrix::Zero(1, K);
    r(0, k) = self_logit;
    p.transition_offset.push_back(ad::parameter(r));
  }

  // Decoder: hidden units shifted to stay in the linear regime of the leaky
  // unit over the region the latents visit, then a random full-rank readout.
  const double shift = 4.0 * o.fixed_point_radius + 10.0;
  Matrix readout = standard_normal(L, D, rng);
  for (int l = 0; l < L; ++l) readout.row(l).normalize();
  p.decoder.hidden = {ad::parameter(Matrix::Identity(L, L)),
                      ad::parameter(Matrix::Constant(1, L, shift))};
  p.decoder.output = {ad::parameter(readout),
                      ad::parameter(-Matrix::Constant(1, L, shift) * readout)};
  p.decoder.slope = 0.01;
  p.emission_log_var = ad::parameter(
      Matrix::Constant(1, D, 2.0 * std::log(o.emission_noise_std)));
  p.initial_probs = VectorXd::Constant(K, 1.0 / K);
  return p;
}

}  // namespace behavseg::gen
