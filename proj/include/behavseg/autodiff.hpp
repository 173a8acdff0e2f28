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

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a handle to a node of a dynamically built expression graph. Leaf
// parameters live across graph constructions and accumulate gradients until
// zeroed; intermediate nodes are released when the last handle goes away.
// Rows index time (or samples), columns index features throughout the library.

namespace behavseg::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Adds `g` into the gradient buffer, allocating it on first use.
  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Direct mutable access, meant for optimizers and initialization only.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double scalar() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Leaf that receives gradients.
Var parameter(Matrix value);
// Leaf that never receives gradients.
Var constant(Matrix value);
Var constant_scalar(double value);

// Runs back-propagation from a 1x1 root. Gradients accumulate into every
// reachable node that requires them.
void backward(const Var& root);

// --- elementwise and structural ops ---------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var mul_const(const Var& a, const Matrix& c);  // elementwise by a constant
Var add_const(const Var& a, const Matrix& c);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var leaky_relu(const Var& a, double slope);
// x log x with the 0 log 0 = 0 convention (zero gradient at exact zeros).
Var xlogx(const Var& a);

// Broadcasting: a [N x C] with a row vector [1 x C] or a column vector [N x 1].
Var add_row(const Var& a, const Var& row);
Var sub_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);
Var mul_col(const Var& a, const Var& col);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var sum(const Var& a);      // -> 1x1
Var row_sum(const Var& a);  // -> N x 1
Var col_sum(const Var& a);  // -> 1 x C

Var rows(const Var& a, Index start, Index count);
Var cols(const Var& a, Index start, Index count);
Var vcat(std::span<const Var> parts);
Var hcat(std::span<const Var> parts);
// Row t of the result is row t of sources[which[t]]; all sources share a shape.
Var select_rows(std::span<const Var> sources, std::span<const int> which);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

// Same-length dilated 1-D convolution over rows with zero padding.
// x: [T x C_in]; weight: [(2*radius+1)*C_in x C_out], tap j covering offset
// (j - radius) * dilation; bias: [1 x C_out].
Var conv1d(const Var& x, const Var& weight, const Var& bias, int radius,
           int dilation);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// A named collection of trainable leaves, ordered for deterministic
// serialization and optimizer state layout.
class ParamList {
 public:
  void add(std::string name, Var v);
  std::size_t size() const { return entries_.size(); }
  const std::pair<std::string, Var>& operator[](std::size_t i) const {
    return entries_[i];
  }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  const Var* find(const std::string& name) const;
  void zero_grad() const;
  Index total_size() const;

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

}  // namespace behavseg::ad
