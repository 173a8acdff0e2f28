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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "behavseg/autodiff.hpp"
#include "behavseg/random.hpp"

namespace testutil {

using behavseg::ad::Matrix;
using behavseg::ad::ParamList;
using behavseg::ad::Var;

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

// Compares reverse-mode gradients of `f` against central differences.
// The error for each tensor is |a - n| / max(|a| + |n|, floor) in the
// Euclidean norm, so tensors with near-zero gradients do not dominate.
inline GradCheck check_gradients(const ParamList& params, const std::function<Var()>& f,
                                 double h = 1e-6, double floor = 1e-6) {
  params.zero_grad();
  behavseg::ad::backward(f());
  GradCheck out;
  for (const auto& [name, v] : params) {
    Matrix analytic = v.grad().size() ? v.grad() : Matrix::Zero(v.rows(), v.cols());
    Matrix numeric(v.rows(), v.cols());
    Var p = v;
    for (Eigen::Index i = 0; i < p.value().size(); ++i) {
      const double orig = p.value().data()[i];
      p.mutable_value().data()[i] = orig + h;
      const double up = f().scalar();
      p.mutable_value().data()[i] = orig - h;
      const double down = f().scalar();
      p.mutable_value().data()[i] = orig;
      numeric.data()[i] = (up - down) / (2.0 * h);
      ++out.checked;
    }
    const double denom = std::max(analytic.norm() + numeric.norm(), floor);
    const double rel = (analytic - numeric).norm() / denom;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = name;
    }
  }
  return out;
}

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed,
                            double scale = 1.0) {
  behavseg::Rng rng(seed);
  return scale * behavseg::standard_normal(r, c, rng);
}

}  // namespace testutil
