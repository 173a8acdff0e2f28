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

#include <limits>

#include "behavseg/tcn.hpp"
#include "test_util.hpp"

using namespace behavseg;
using ad::Matrix;
using tcn::TCNBackbone;
using tcn::TCNConfig;
using testutil::random_matrix;

namespace {

// Largest offset whose perturbation changes the output at `t`, probed up to
// `max_offset` frames on both sides.
int empirical_radius(const TCNBackbone& net, int T, int t, int max_offset) {
  const Matrix x = random_matrix(T, net.input_dim(), 99);
  const Matrix base = net.forward(x);
  int radius = -1;
  for (int off = 0; off <= max_offset; ++off) {
    for (int s : {t - off, t + off}) {
      if (s < 0 || s >= T) continue;
      Matrix y = x;
      y.row(s).array() += 1.0;
      if ((net.forward(y).row(t) - base.row(t)).cwiseAbs().maxCoeff() > 0.0) radius = off;
    }
  }
  return radius;
}

}  // namespace

TEST_CASE("receptive field radius formula") {
  CHECK(tcn::receptive_field_radius(TCNConfig{}) == 24);
  TCNConfig one;
  one.n_blocks = 1;
  CHECK(tcn::receptive_field_radius(one) == 8);
  TCNConfig three;
  three.n_blocks = 3;
  three.n_lags = 2;
  CHECK(tcn::receptive_field_radius(three) == 28);
  CHECK(TCNConfig{}.kernel_size() == 9);
}

TEST_CASE("default network is exactly 24-frame local") {
  Rng rng(3);
  TCNBackbone net(TCNConfig{}, 3, rng);
  const Matrix x = random_matrix(121, 3, 4);
  const Matrix base = net.forward(x);
  const int t = 60;
  for (int off : {-25, 25, -40, 40}) {
    Matrix y = x;
    y.row(t + off).array() += 10.0;
    CHECK(net.forward(y).row(t) == base.row(t));
  }
  for (int off : {-24, 24}) {
    Matrix y = x;
    y.row(t + off).array() += 10.0;
    CHECK((net.forward(y).row(t) - base.row(t)).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("empirical receptive field matches the formula for other configs") {
  TCNConfig three;
  three.n_blocks = 3;
  three.n_lags = 2;
  three.n_filters = 8;
  Rng rng(5);
  CHECK(empirical_radius(TCNBackbone(three, 2, rng), 121, 60, 40) == 28);

  TCNConfig one;
  one.n_blocks = 1;
  one.n_filters = 6;
  CHECK(empirical_radius(TCNBackbone(one, 2, rng), 61, 30, 20) == 8);
}

TEST_CASE("zero weights give zero output") {
  TCNConfig cfg;
  cfg.dropout_p = 0.0;
  Rng rng(1);
  TCNBackbone net(cfg, 4, rng);
  ad::ParamList params;
  net.collect(params, "net");
  for (const auto& [name, v] : params) {
    ad::Var p = v;
    p.mutable_value().setZero();
  }
  CHECK(net.forward(random_matrix(30, 4, 2)).isZero());
}

TEST_CASE("shapes, determinism and dropout seeding") {
  Rng rng(2);
  TCNBackbone net(TCNConfig{}, 3, rng);
  for (int T : {1, 2, 17, 50}) {
    const Matrix y = net.forward(random_matrix(T, 3, T));
    CHECK(y.rows() == T);
    CHECK(y.cols() == 32);
  }
  const Matrix x = random_matrix(40, 3, 8);
  CHECK(net.forward(x) == net.forward(x));

  const auto xv = ad::constant(x);
  const Matrix a = net.forward(xv, true, 11).value();
  const Matrix b = net.forward(xv, true, 11).value();
  const Matrix c = net.forward(xv, true, 12).value();
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != net.forward(x));
  CHECK(net.forward(xv, false, 11).value() == net.forward(x));
}

TEST_CASE("non-finite input and invalid configs are rejected") {
  Rng rng(2);
  TCNBackbone net(TCNConfig{}, 2, rng);
  Matrix x = Matrix::Zero(5, 2);
  x(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(net.forward(x));

  TCNConfig bad;
  bad.n_lags = 0;
  CHECK_THROWS(bad.validate());
  CHECK_NOTHROW(bad.validate(true));
  bad = TCNConfig{};
  bad.dropout_p = 1.0;
  CHECK_THROWS(bad.validate());
  bad = TCNConfig{};
  bad.n_blocks = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("input gradients match finite differences") {
  TCNConfig cfg;
  cfg.n_filters = 8;
  Rng rng(6);
  TCNBackbone net(cfg, 3, rng);
  ad::Var x = ad::parameter(random_matrix(16, 3, 7));
  const Matrix w = random_matrix(16, 8, 8);
  ad::ParamList params;
  params.add("x", x);
  net.collect(params, "net");
  const auto r = testutil::check_gradients(params, [&] {
    return ad::sum(ad::mul_const(net.forward(x, false, 0), w));
  });
  INFO("worst " << r.worst << " rel " << r.max_rel_error);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("parameter names are stable") {
  Rng rng(1);
  TCNBackbone net(TCNConfig{}, 3, rng);
  ad::ParamList params;
  net.collect(params, "clf");
  CHECK(params.find("clf.block0.conv1.weight") != nullptr);
  CHECK(params.find("clf.block1.conv2.bias") != nullptr);
  CHECK(params.find("clf.block0.conv1.weight")->rows() == 9 * 3);
}
