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

#include "behavseg/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace behavseg::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

Var make(Matrix value, std::vector<NodePtr> inputs,
         std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& in : inputs) {
    if (in->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) {
    throw std::logic_error("Var::scalar on a non-scalar value");
  }
  return node_->value(0, 0);
}

void Var::zero_grad() {
  if (node_->grad.size() != 0) node_->grad.setZero();
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var constant_scalar(double value) {
  return constant(Matrix::Constant(1, 1, value));
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::logic_error("backward: root must be a scalar");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  auto na = a.node(), nb = b.node();
  return make(a.value() + b.value(), {na, nb}, [na, nb](Node& self) {
    if (na->requires_grad) na->accumulate(self.grad);
    if (nb->requires_grad) nb->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  auto na = a.node(), nb = b.node();
  return make(a.value() - b.value(), {na, nb}, [na, nb](Node& self) {
    if (na->requires_grad) na->accumulate(self.grad);
    if (nb->requires_grad) nb->accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  auto na = a.node(), nb = b.node();
  return make(a.value().cwiseProduct(b.value()), {na, nb},
              [na, nb](Node& self) {
                if (na->requires_grad)
                  na->accumulate(self.grad.cwiseProduct(nb->value));
                if (nb->requires_grad)
                  nb->accumulate(self.grad.cwiseProduct(na->value));
              });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  auto na = a.node();
  return make(a.value() * s, {na},
              [na, s](Node& self) { na->accumulate(self.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  auto na = a.node();
  return make(a.value().array() + s, {na},
              [na](Node& self) { na->accumulate(self.grad); });
}

Var mul_const(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw std::invalid_argument("mul_const: shape mismatch");
  }
  auto na = a.node();
  return make(a.value().cwiseProduct(c), {na}, [na, c](Node& self) {
    na->accumulate(self.grad.cwiseProduct(c));
  });
}

Var add_const(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw std::invalid_argument("add_const: shape mismatch");
  }
  auto na = a.node();
  return make(a.value() + c, {na},
              [na](Node& self) { na->accumulate(self.grad); });
}

Var exp(const Var& a) {
  auto na = a.node();
  Matrix out = a.value().array().exp().matrix();
  return make(out, {na}, [na](Node& self) {
    na->accumulate(self.grad.cwiseProduct(self.value));
  });
}

Var log(const Var& a) {
  auto na = a.node();
  return make(a.value().array().log().matrix(), {na}, [na](Node& self) {
    na->accumulate(self.grad.cwiseQuotient(na->value));
  });
}

Var square(const Var& a) {
  auto na = a.node();
  return make(a.value().array().square().matrix(), {na}, [na](Node& self) {
    na->accumulate(2.0 * self.grad.cwiseProduct(na->value));
  });
}

Var leaky_relu(const Var& a, double slope) {
  auto na = a.node();
  Matrix out = a.value().unaryExpr(
      [slope](double v) { return v > 0.0 ? v : slope * v; });
  return make(std::move(out), {na}, [na, slope](Node& self) {
    Matrix g = self.grad;
    const Matrix& x = na->value;
    for (Index j = 0; j < g.cols(); ++j)
      for (Index i = 0; i < g.rows(); ++i)
        if (!(x(i, j) > 0.0)) g(i, j) *= slope;
    na->accumulate(g);
  });
}

Var xlogx(const Var& a) {
  auto na = a.node();
  Matrix out = a.value().unaryExpr(
      [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; });
  return make(std::move(out), {na}, [na](Node& self) {
    Matrix g = na->value.unaryExpr(
        [](double v) { return v > 0.0 ? std::log(v) + 1.0 : 0.0; });
    na->accumulate(self.grad.cwiseProduct(g));
  });
}

namespace {
void check_row_vector(const Var& a, const Var& row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument(std::string(op) + ": expected a 1x" +
                                std::to_string(a.cols()) + " row vector");
  }
}
}  // namespace

Var add_row(const Var& a, const Var& row) {
  check_row_vector(a, row, "add_row");
  auto na = a.node(), nr = row.node();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {na, nr}, [na, nr](Node& self) {
    if (na->requires_grad) na->accumulate(self.grad);
    if (nr->requires_grad) nr->accumulate(self.grad.colwise().sum());
  });
}

Var sub_row(const Var& a, const Var& row) {
  check_row_vector(a, row, "sub_row");
  auto na = a.node(), nr = row.node();
  Matrix out = a.value().rowwise() - row.value().row(0);
  return make(std::move(out), {na, nr}, [na, nr](Node& self) {
    if (na->requires_grad) na->accumulate(self.grad);
    if (nr->requires_grad) nr->accumulate(-self.grad.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& row) {
  check_row_vector(a, row, "mul_row");
  auto na = a.node(), nr = row.node();
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make(std::move(out), {na, nr}, [na, nr](Node& self) {
    if (na->requires_grad) {
      na->accumulate(
          (self.grad.array().rowwise() * nr->value.row(0).array()).matrix());
    }
    if (nr->requires_grad) {
      nr->accumulate(self.grad.cwiseProduct(na->value).colwise().sum());
    }
  });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw std::invalid_argument("mul_col: expected an Nx1 column vector");
  }
  auto na = a.node(), nc = col.node();
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make(std::move(out), {na, nc}, [na, nc](Node& self) {
    if (na->requires_grad) {
      na->accumulate(
          (self.grad.array().colwise() * nc->value.col(0).array()).matrix());
    }
    if (nc->requires_grad) {
      nc->accumulate(self.grad.cwiseProduct(na->value).rowwise().sum());
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ (" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + ")");
  }
  auto na = a.node(), nb = b.node();
  Matrix out = a.value() * b.value();
  return make(std::move(out), {na, nb}, [na, nb](Node& self) {
    if (na->requires_grad) {
      na->grad_buffer().noalias() += self.grad * nb->value.transpose();
    }
    if (nb->requires_grad) {
      nb->grad_buffer().noalias() += na->value.transpose() * self.grad;
    }
  });
}

Var transpose(const Var& a) {
  auto na = a.node();
  return make(a.value().transpose(), {na}, [na](Node& self) {
    na->accumulate(self.grad.transpose());
  });
}

Var sum(const Var& a) {
  auto na = a.node();
  return make(Matrix::Constant(1, 1, a.value().sum()), {na},
              [na](Node& self) {
                na->accumulate(Matrix::Constant(na->value.rows(),
                                                na->value.cols(),
                                                self.grad(0, 0)));
              });
}

Var row_sum(const Var& a) {
  auto na = a.node();
  return make(a.value().rowwise().sum(), {na}, [na](Node& self) {
    na->accumulate(self.grad.col(0).replicate(1, na->value.cols()));
  });
}

Var col_sum(const Var& a) {
  auto na = a.node();
  return make(a.value().colwise().sum(), {na}, [na](Node& self) {
    na->accumulate(self.grad.row(0).replicate(na->value.rows(), 1));
  });
}

Var rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::out_of_range("rows: slice out of range");
  }
  auto na = a.node();
  return make(a.value().middleRows(start, count), {na},
              [na, start, count](Node& self) {
                na->grad_buffer().middleRows(start, count) += self.grad;
              });
}

Var cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::out_of_range("cols: slice out of range");
  }
  auto na = a.node();
  return make(a.value().middleCols(start, count), {na},
              [na, start, count](Node& self) {
                na->grad_buffer().middleCols(start, count) += self.grad;
              });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no inputs");
  Index total = 0;
  const Index c = parts.front().cols();
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    if (p.cols() != c) throw std::invalid_argument("vcat: column mismatch");
    total += p.rows();
    inputs.push_back(p.node());
  }
  Matrix out(total, c);
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return make(std::move(out), inputs, [inputs](Node& self) {
    Index off = 0;
    for (const auto& in : inputs) {
      if (in->requires_grad)
        in->accumulate(self.grad.middleRows(off, in->value.rows()));
      off += in->value.rows();
    }
  });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no inputs");
  Index total = 0;
  const Index r = parts.front().rows();
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    if (p.rows() != r) throw std::invalid_argument("hcat: row mismatch");
    total += p.cols();
    inputs.push_back(p.node());
  }
  Matrix out(r, total);
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return make(std::move(out), inputs, [inputs](Node& self) {
    Index off = 0;
    for (const auto& in : inputs) {
      if (in->requires_grad)
        in->accumulate(self.grad.middleCols(off, in->value.cols()));
      off += in->value.cols();
    }
  });
}

Var select_rows(std::span<const Var> sources, std::span<const int> which) {
  if (sources.empty()) throw std::invalid_argument("select_rows: no sources");
  const Index n = sources.front().rows();
  const Index c = sources.front().cols();
  if (static_cast<Index>(which.size()) != n) {
    throw std::invalid_argument("select_rows: index length mismatch");
  }
  std::vector<NodePtr> inputs;
  for (const auto& s : sources) {
    if (s.rows() != n || s.cols() != c) {
      throw std::invalid_argument("select_rows: source shape mismatch");
    }
    inputs.push_back(s.node());
  }
  Matrix out(n, c);
  for (Index t = 0; t < n; ++t) {
    const int k = which[t];
    if (k < 0 || k >= static_cast<int>(sources.size())) {
      throw std::out_of_range("select_rows: source index out of range");
    }
    out.row(t) = sources[k].value().row(t);
  }
  std::vector<int> idx(which.begin(), which.end());
  return make(std::move(out), inputs, [inputs, idx](Node& self) {
    for (std::size_t t = 0; t < idx.size(); ++t) {
      auto& in = inputs[idx[t]];
      if (in->requires_grad) {
        in->grad_buffer().row(static_cast<Index>(t)) +=
            self.grad.row(static_cast<Index>(t));
      }
    }
  });
}

Var softmax_rows(const Var& a) {
  auto na = a.node();
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return make(std::move(out), {na}, [na](Node& self) {
    const Matrix& p = self.value;
    Eigen::VectorXd dot = self.grad.cwiseProduct(p).rowwise().sum();
    Matrix g = p.cwiseProduct(self.grad.colwise() - dot);
    na->accumulate(g);
  });
}

Var log_softmax_rows(const Var& a) {
  auto na = a.node();
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    const double lse = m + std::log((out.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return make(std::move(out), {na}, [na](Node& self) {
    Matrix p = self.value.array().exp().matrix();
    Eigen::VectorXd gsum = self.grad.rowwise().sum();
    Matrix g = self.grad - (p.array().colwise() * gsum.array()).matrix();
    na->accumulate(g);
  });
}

Var conv1d(const Var& x, const Var& weight, const Var& bias, int radius,
           int dilation) {
  const Index T = x.rows();
  const Index cin = x.cols();
  const Index taps = 2 * radius + 1;
  if (radius < 0 || dilation < 1) {
    throw std::invalid_argument("conv1d: invalid radius or dilation");
  }
  if (weight.rows() != taps * cin) {
    throw std::invalid_argument("conv1d: weight rows must equal taps*C_in");
  }
  const Index cout = weight.cols();
  if (bias.rows() != 1 || bias.cols() != cout) {
    throw std::invalid_argument("conv1d: bias must be 1 x C_out");
  }
  auto nx = x.node(), nw = weight.node(), nb = bias.node();

  Matrix out(T, cout);
  out.rowwise() = bias.value().row(0);
  for (Index j = 0; j < taps; ++j) {
    const Index off = (j - radius) * dilation;
    const Index t0 = std::max<Index>(0, -off);
    const Index t1 = std::min<Index>(T, T - off);
    if (t1 <= t0) continue;
    out.middleRows(t0, t1 - t0).noalias() +=
        x.value().middleRows(t0 + off, t1 - t0) *
        weight.value().middleRows(j * cin, cin);
  }

  return make(std::move(out), {nx, nw, nb},
              [nx, nw, nb, radius, dilation, taps, cin, T](Node& self) {
                const Matrix& g = self.grad;
                if (nb->requires_grad) nb->accumulate(g.colwise().sum());
                Matrix* gx = nx->requires_grad ? &nx->grad_buffer() : nullptr;
                Matrix* gw = nw->requires_grad ? &nw->grad_buffer() : nullptr;
                for (Index j = 0; j < taps; ++j) {
                  const Index off = (j - radius) * dilation;
                  const Index t0 = std::max<Index>(0, -off);
                  const Index t1 = std::min<Index>(T, T - off);
                  if (t1 <= t0) continue;
                  const Index n = t1 - t0;
                  if (gx) {
                    gx->middleRows(t0 + off, n).noalias() +=
                        g.middleRows(t0, n) *
                        nw->value.middleRows(j * cin, cin).transpose();
                  }
                  if (gw) {
                    gw->middleRows(j * cin, cin).noalias() +=
                        nx->value.middleRows(t0 + off, n).transpose() *
                        g.middleRows(t0, n);
                  }
                }
              });
}

void ParamList::add(std::string name, Var v) {
  if (find(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.emplace_back(std::move(name), std::move(v));
}

const Var* ParamList::find(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return &v;
  return nullptr;
}

void ParamList::zero_grad() const {
  for (const auto& entry : entries_) {
    Var v = entry.second;
    v.zero_grad();
  }
}

Index ParamList::total_size() const {
  Index n = 0;
  for (const auto& [name, v] : entries_) n += v.value().size();
  return n;
}

}  // namespace behavseg::ad
