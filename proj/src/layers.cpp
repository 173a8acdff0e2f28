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

#include "behavseg/layers.hpp"

#include <cmath>

namespace behavseg::nn {

Linear Linear::init(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = ad::parameter(uniform_matrix(in, out, -bound, bound, rng));
  l.bias = ad::parameter(uniform_matrix(1, out, -bound, bound, rng));
  return l;
}

Linear Linear::zeros(int in, int out) {
  return {ad::parameter(Matrix::Zero(in, out)), ad::parameter(Matrix::Zero(1, out))};
}

Var Linear::forward(const Var& x) const {
  return ad::add_row(ad::matmul(x, weight), bias);
}

void Linear::collect(ad::ParamList& params, const std::string& prefix) const {
  params.add(prefix + ".weight", weight);
  params.add(prefix + ".bias", bias);
}

DenseNet DenseNet::init(int in, int width, int out, Rng& rng, double slope) {
  DenseNet n;
  n.hidden = Linear::init(in, width, rng);
  n.output = Linear::init(width, out, rng);
  n.slope = slope;
  return n;
}

Var DenseNet::forward(const Var& x) const {
  return output.forward(ad::leaky_relu(hidden.forward(x), slope));
}

Matrix DenseNet::forward(const Matrix& x) const {
  Matrix h = (x * hidden.weight.value()).rowwise() + hidden.bias.value().row(0);
  h = h.unaryExpr([s = slope](double v) { return v > 0.0 ? v : s * v; });
  return (h * output.weight.value()).rowwise() + output.bias.value().row(0);
}

void DenseNet::collect(ad::ParamList& params, const std::string& prefix) const {
  hidden.collect(params, prefix + ".hidden");
  output.collect(params, prefix + ".output");
}

Linear clone(const Linear& l) {
  return {ad::parameter(l.weight.value()), ad::parameter(l.bias.value())};
}

DenseNet clone(const DenseNet& n) {
  return {clone(n.hidden), clone(n.output), n.slope};
}

}  // namespace behavseg::nn
