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

#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "behavseg/autodiff.hpp"
#include "test_util.hpp"

using namespace behavseg;
using ad::Matrix;
using ad::Var;
using testutil::check_gradients;
using testutil::random_matrix;

namespace {

// Reduces an op output to a scalar through fixed random weights so every
// output entry contributes a distinct gradient.
Var probe(const Var& out, std::uint64_t seed) {
  return ad::sum(ad::mul_const(out, random_matrix(out.rows(), out.cols(), seed)));
}

void expect_grad_ok(const ad::ParamList& params, const std::function<Var()>& f) {
  const auto r = check_gradients(params, f);
  INFO("worst tensor: " << r.worst << " rel " << r.max_rel_error);
  CHECK(r.max_rel_error < 1e-6);
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  Var a = ad::parameter(random_matrix(4, 3, 1));
  Var b = ad::parameter(random_matrix(4, 3, 2));
  Var pos = ad::parameter(random_matrix(4, 3, 3).array().abs() + 0.5);
  ad::ParamList params;
  params.add("a", a);
  params.add("b", b);
  params.add("pos", pos);

  expect_grad_ok(params, [&] { return probe(a + b, 10); });
  expect_grad_ok(params, [&] { return probe(a - b, 11); });
  expect_grad_ok(params, [&] { return probe(ad::mul(a, b), 12); });
  expect_grad_ok(params, [&] { return probe(-a, 13); });
  expect_grad_ok(params, [&] { return probe(2.5 * a, 14); });
  expect_grad_ok(params, [&] { return probe(ad::add_scalar(a, 3.0), 15); });
  expect_grad_ok(params, [&] { return probe(ad::exp(a), 16); });
  expect_grad_ok(params, [&] { return probe(ad::log(pos), 17); });
  expect_grad_ok(params, [&] { return probe(ad::square(a), 18); });
  expect_grad_ok(params, [&] { return probe(ad::leaky_relu(a, 0.01), 19); });
  expect_grad_ok(params, [&] { return probe(ad::xlogx(pos), 20); });
}

TEST_CASE("broadcast and reduction ops match finite differences") {
  Var a = ad::parameter(random_matrix(5, 3, 1));
  Var row = ad::parameter(random_matrix(1, 3, 2));
  Var col = ad::parameter(random_matrix(5, 1, 3));
  ad::ParamList params;
  params.add("a", a);
  params.add("row", row);
  params.add("col", col);

  expect_grad_ok(params, [&] { return probe(ad::add_row(a, row), 1); });
  expect_grad_ok(params, [&] { return probe(ad::sub_row(a, row), 2); });
  expect_grad_ok(params, [&] { return probe(ad::mul_row(a, row), 3); });
  expect_grad_ok(params, [&] { return probe(ad::mul_col(a, col), 4); });
  expect_grad_ok(params, [&] { return probe(ad::row_sum(a), 5); });
  expect_grad_ok(params, [&] { return probe(ad::col_sum(a), 6); });
  expect_grad_ok(params, [&] { return ad::sum(ad::square(a)); });
}

TEST_CASE("structural ops match finite differences") {
  Var a = ad::parameter(random_matrix(4, 3, 1));
  Var b = ad::parameter(random_matrix(3, 2, 2));
  Var c = ad::parameter(random_matrix(4, 3, 3));
  ad::ParamList params;
  params.add("a", a);
  params.add("b", b);
  params.add("c", c);

  expect_grad_ok(params, [&] { return probe(ad::matmul(a, b), 1); });
  expect_grad_ok(params, [&] { return probe(ad::transpose(a), 2); });
  expect_grad_ok(params, [&] { return probe(ad::rows(a, 1, 2), 3); });
  expect_grad_ok(params, [&] { return probe(ad::cols(a, 1, 2), 4); });
  expect_grad_ok(params, [&] {
    std::array<Var, 2> parts{a, c};
    return probe(ad::vcat(parts), 5);
  });
  expect_grad_ok(params, [&] {
    std::array<Var, 2> parts{a, c};
    return probe(ad::hcat(parts), 6);
  });
  expect_grad_ok(params, [&] {
    std::array<Var, 2> sources{a, c};
    std::vector<int> which{1, 0, 0, 1};
    return probe(ad::select_rows(sources, which), 7);
  });
  expect_grad_ok(params, [&] { return probe(ad::softmax_rows(a), 8); });
  expect_grad_ok(params, [&] { return probe(ad::log_softmax_rows(a), 9); });
}

TEST_CASE("dilated convolution gradients and values") {
  const int radius = 2, dilation = 3, cin = 2, cout = 3;
  Var x = ad::parameter(random_matrix(11, cin, 1));
  Var w = ad::parameter(random_matrix((2 * radius + 1) * cin, cout, 2));
  Var b = ad::parameter(random_matrix(1, cout, 3));
  ad::ParamList params;
  params.add("x", x);
  params.add("w", w);
  params.add("b", b);
  expect_grad_ok(params, [&] { return probe(ad::conv1d(x, w, b, radius, dilation), 4); });

  // Direct evaluation with zero padding.
  const Matrix y = ad::conv1d(x, w, b, radius, dilation).value();
  for (int t = 0; t < 11; ++t) {
    Eigen::RowVectorXd expect = b.value();
    for (int j = 0; j <= 2 * radius; ++j) {
      const int s = t + (j - radius) * dilation;
      if (s < 0 || s >= 11) continue;
      expect += x.value().row(s) * w.value().middleRows(j * cin, cin);
    }
    CHECK((y.row(t) - expect).norm() < 1e-12);
  }
}

TEST_CASE("xlogx treats zero as contributing nothing") {
  Var p = ad::parameter((Matrix(1, 3) << 0.0, 0.5, 1.0).finished());
  Var s = ad::sum(ad::xlogx(p));
  CHECK(s.scalar() == doctest::Approx(0.5 * std::log(0.5)).epsilon(1e-15));
  ad::backward(s);
  CHECK(p.grad()(0, 0) == 0.0);
  CHECK(p.grad()(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("softmax rows are simplexes even for large logits") {
  Matrix logits(2, 3);
  logits << 1000.0, 0.0, -1000.0, 5.0, 5.0, 5.0;
  const Matrix p = ad::softmax_rows(ad::constant(logits)).value();
  CHECK(std::abs(p.row(0).sum() - 1.0) < 1e-12);
  CHECK(std::abs(p(1, 0) - 1.0 / 3.0) < 1e-15);
  CHECK(ad::log_softmax_rows(ad::constant(logits)).value().allFinite());
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  Var a = ad::parameter(Matrix::Constant(1, 1, 2.0));
  ad::backward(ad::square(a));
  ad::backward(ad::square(a));
  CHECK(a.grad()(0, 0) == doctest::Approx(8.0));
  a.zero_grad();
  CHECK(a.grad()(0, 0) == 0.0);
}

TEST_CASE("constants receive no gradient and shapes are checked") {
  Var c = ad::constant(Matrix::Ones(2, 2));
  Var a = ad::parameter(Matrix::Ones(2, 2));
  ad::backward(ad::sum(ad::mul(a, c)));
  CHECK(c.grad().size() == 0);
  CHECK_THROWS(ad::add(a, ad::constant(Matrix::Ones(3, 2))));
  CHECK_THROWS(ad::matmul(a, ad::constant(Matrix::Ones(3, 2))));
  CHECK_THROWS(ad::backward(a));
}

TEST_CASE("parameter lists reject duplicate names") {
  ad::ParamList params;
  params.add("w", ad::parameter(Matrix::Zero(2, 3)));
  CHECK_THROWS(params.add("w", ad::parameter(Matrix::Zero(1, 1))));
  CHECK(params.total_size() == 6);
  CHECK(params.find("w") != nullptr);
  CHECK(params.find("v") == nullptr);
}
