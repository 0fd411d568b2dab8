// Copyright 2026 The sspd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sspd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace sspd::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw ShapeMismatch(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

Tensor::Tensor(std::vector<Index> shape, Matrix data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  const Index count = std::accumulate(shape_.begin(), shape_.end(), Index{1}, std::multiplies<>());
  if (shape_.empty() || shape_.size() > 2 || count != data_.size())
    throw ShapeMismatch("Tensor: shape does not match data " + shape_str(data_));
  zero_grad();
}

const Matrix& Var::value() const { return graph_->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw NonScalarLoss("value is " + shape_str(v));
  return v(0, 0);
}

Var Graph::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Graph::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(Tensor& t) {
  nodes_.push_back(Node{t.data(), {}, t.requires_grad(), {}, &t});
  return {this, nodes_.size() - 1};
}

Var Graph::push(Matrix value, std::span<const Var> parents, BackwardFn backward) {
  const bool needs = std::any_of(parents.begin(), parents.end(), [this](Var p) { return requires_grad(p); });
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}, nullptr});
  return {this, nodes_.size() - 1};
}

void Graph::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

Matrix Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var loss, double seed) {
  Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) throw NonScalarLoss("loss node is " + shape_str(root.value));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!root.requires_grad) return;
  root.grad = Matrix::Constant(1, 1, seed);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.bound) {
      Matrix& tg = n.bound->grad();
      if (tg.rows() != n.value.rows() || tg.cols() != n.value.cols()) tg.setZero(n.value.rows(), n.value.cols());
      tg += n.grad;
    }
  }
}

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul", a.value(), b.value());
  return a.graph().push(a.value() * b.value(), {a, b}, [a, b](Graph& g, const Matrix&, const Matrix& go) {
    if (g.requires_grad(a)) g.accumulate(a, go * b.value().transpose());
    if (g.requires_grad(b)) g.accumulate(b, a.value().transpose() * go);
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(), b.value());
  return a.graph().push(a.value() + b.value(), {a, b}, [a, b](Graph& g, const Matrix&, const Matrix& go) {
    g.accumulate(a, go);
    g.accumulate(b, go);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.value(), b.value());
  return a.graph().push(a.value() - b.value(), {a, b}, [a, b](Graph& g, const Matrix&, const Matrix& go) {
    g.accumulate(a, go);
    if (g.requires_grad(b)) g.accumulate(b, -go);
  });
}

Var hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard", a.value(), b.value());
  return a.graph().push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Graph& g, const Matrix&, const Matrix& go) {
    if (g.requires_grad(a)) g.accumulate(a, go.cwiseProduct(b.value()));
    if (g.requires_grad(b)) g.accumulate(b, go.cwiseProduct(a.value()));
  });
}

Var add_bias(Var x, Var b) {
  require(b.rows() == 1 && b.cols() == x.cols(), "add_bias", x.value(), b.value());
  Matrix out = x.value().rowwise() + b.value().row(0);
  return x.graph().push(std::move(out), {x, b}, [x, b](Graph& g, const Matrix&, const Matrix& go) {
    g.accumulate(x, go);
    if (g.requires_grad(b)) g.accumulate(b, go.colwise().sum());
  });
}

Var relu(Var x) {
  Matrix out = x.value().cwiseMax(0.0);
  return x.graph().push(std::move(out), {x}, [x](Graph& g, const Matrix&, const Matrix& go) {
    g.accumulate(x, (x.value().array() > 0.0).select(go, 0.0));
  });
}

Var max_over_rows(Var x, Index group) {
  const Matrix& v = x.value();
  if (group < 1 || v.rows() % group != 0)
    throw ShapeMismatch("max_over_rows: " + std::to_string(v.rows()) + " rows, group " + std::to_string(group));
  const Index blocks = v.rows() / group, cols = v.cols();
  Matrix out(blocks, cols);
  std::vector<Index> argmax(static_cast<std::size_t>(blocks * cols));
  for (Index b = 0; b < blocks; ++b) {
    out.row(b) = v.row(b * group);
    for (Index j = 0; j < cols; ++j) argmax[static_cast<std::size_t>(b * cols + j)] = b * group;
    for (Index r = b * group + 1; r < (b + 1) * group; ++r)
      for (Index j = 0; j < cols; ++j)
        if (v(r, j) > out(b, j)) {
          out(b, j) = v(r, j);
          argmax[static_cast<std::size_t>(b * cols + j)] = r;
        }
  }
  return x.graph().push(std::move(out), {x}, [x, argmax = std::move(argmax), cols](Graph& g, const Matrix&, const Matrix& go) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    for (Index b = 0; b < go.rows(); ++b)
      for (Index j = 0; j < cols; ++j) gx(argmax[static_cast<std::size_t>(b * cols + j)], j) += go(b, j);
    g.accumulate(x, gx);
  });
}

Var l2_normalize_rows(Var x) {
  const Matrix& v = x.value();
  VectorXd norms = v.rowwise().norm();
  Matrix out = v;
  for (Index i = 0; i < v.rows(); ++i)
    if (norms(i) > 0.0) out.row(i) /= norms(i);
  return x.graph().push(std::move(out), {x}, [x, norms = std::move(norms)](Graph& g, const Matrix& y, const Matrix& go) {
    Matrix gx = Matrix::Zero(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      if (norms(i) <= 0.0) continue;
      gx.row(i) = (go.row(i) - y.row(i) * go.row(i).dot(y.row(i))) / norms(i);
    }
    g.accumulate(x, gx);
  });
}

Var exp(Var x, double floor) {
  const Matrix& v = x.value();
  Matrix out = (v.array() < floor).select(0.0, v.array().exp()).matrix();
  return x.graph().push(std::move(out), {x}, [x](Graph& g, const Matrix& y, const Matrix& go) {
    g.accumulate(x, y.cwiseProduct(go));
  });
}

Var neg(Var x) { return scale(x, -1.0); }

Var scale(Var x, double s) {
  return x.graph().push(x.value() * s, {x}, [x, s](Graph& g, const Matrix&, const Matrix& go) { g.accumulate(x, go * s); });
}

Var reduce_sum(Var x) {
  return x.graph().push(Matrix::Constant(1, 1, x.value().sum()), {x}, [x](Graph& g, const Matrix&, const Matrix& go) {
    g.accumulate(x, Matrix::Constant(x.rows(), x.cols(), go(0, 0)));
  });
}

Var frobenius_norm(Var x) {
  const double n = x.value().norm();
  return x.graph().push(Matrix::Constant(1, 1, n), {x}, [x, n](Graph& g, const Matrix&, const Matrix& go) {
    if (n > 0.0) g.accumulate(x, x.value() * (go(0, 0) / n));
  });
}

Var concat(Var a, Var b, int axis) {
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  Matrix out;
  if (axis == 0) {
    require(va.cols() == vb.cols(), "concat(axis 0)", va, vb);
    out.resize(va.rows() + vb.rows(), va.cols());
    out << va, vb;
  } else if (axis == 1) {
    require(va.rows() == vb.rows(), "concat(axis 1)", va, vb);
    out.resize(va.rows(), va.cols() + vb.cols());
    out << va, vb;
  } else {
    throw ShapeMismatch("concat: axis must be 0 or 1");
  }
  return a.graph().push(std::move(out), {a, b}, [a, b, axis](Graph& g, const Matrix&, const Matrix& go) {
    if (axis == 0) {
      g.accumulate(a, go.topRows(a.rows()));
      g.accumulate(b, go.bottomRows(b.rows()));
    } else {
      g.accumulate(a, go.leftCols(a.cols()));
      g.accumulate(b, go.rightCols(b.cols()));
    }
  });
}

Var gather_rows(Var x, std::span<const Index> rows) {
  const Matrix& v = x.value();
  Matrix out(static_cast<Index>(rows.size()), v.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= v.rows()) throw ShapeMismatch("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = v.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return x.graph().push(std::move(out), {x}, [x, idx = std::move(idx)](Graph& g, const Matrix&, const Matrix& go) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += go.row(static_cast<Index>(i));
    g.accumulate(x, gx);
  });
}

Var slice_cols(Var x, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > x.cols()) throw ShapeMismatch("slice_cols: range out of bounds");
  return x.graph().push(x.value().middleCols(begin, count), {x}, [x, begin, count](Graph& g, const Matrix&, const Matrix& go) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    gx.middleCols(begin, count) = go;
    g.accumulate(x, gx);
  });
}

Var transpose(Var x) {
  return x.graph().push(x.value().transpose(), {x},
                        [x](Graph& g, const Matrix&, const Matrix& go) { g.accumulate(x, go.transpose()); });
}

Var pairwise_sq_dist(Var a, Var b) {
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  require(va.cols() == vb.cols(), "pairwise_sq_dist", va, vb);
  // Direct differences: equal rows give exactly 0, unlike the |a|^2 + |b|^2 - 2ab form.
  Matrix out(va.rows(), vb.rows());
  for (Index i = 0; i < va.rows(); ++i)
    for (Index j = 0; j < vb.rows(); ++j) out(i, j) = (va.row(i) - vb.row(j)).squaredNorm();
  return a.graph().push(std::move(out), {a, b}, [a, b](Graph& g, const Matrix&, const Matrix& go) {
    const Matrix& va = a.value();
    const Matrix& vb = b.value();
    if (g.requires_grad(a))
      g.accumulate(a, 2.0 * (go.rowwise().sum().asDiagonal() * va - go * vb));
    if (g.requires_grad(b))
      g.accumulate(b, 2.0 * (go.colwise().sum().transpose().asDiagonal() * vb - go.transpose() * va));
  });
}

Var svd3(Var m) {
  const Matrix& v = m.value();
  if (v.rows() != 3 || v.cols() != 3) throw ShapeMismatch("svd3: input is " + shape_str(v));
  const Eigen::JacobiSVD<Matrix3d> svd(Matrix3d(v), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix packed(3, 7);
  packed << svd.matrixU(), svd.singularValues(), svd.matrixV();
  return m.graph().push(std::move(packed), {m}, [m](Graph& g, const Matrix& out, const Matrix& go) {
    const Matrix3d u = out.leftCols(3);
    const Vector3d s = out.col(3);
    const Matrix3d vv = out.rightCols(3);
    const Matrix3d gu = go.leftCols(3);
    const Vector3d gs = go.col(3);
    const Matrix3d gv = go.rightCols(3);

    const double tol = 1e-8 * std::max(1.0, s(0) * s(0));
    Matrix3d f = Matrix3d::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        double gap = s(j) * s(j) - s(i) * s(i);
        if (std::abs(gap) < tol) {
          g.flag_svd_degenerate();
          gap = gap < 0.0 ? -tol : tol;
        }
        f(i, j) = 1.0 / gap;
      }
    const Matrix3d ut_gu = u.transpose() * gu;
    const Matrix3d vt_gv = vv.transpose() * gv;
    const Matrix3d j_term = f.cwiseProduct(ut_gu - ut_gu.transpose());
    const Matrix3d k_term = f.cwiseProduct(vt_gv - vt_gv.transpose());
    const Matrix3d inner = j_term * s.asDiagonal() + Matrix3d(gs.asDiagonal()) + s.asDiagonal() * k_term;
    g.accumulate(m, Matrix(u * inner * vv.transpose()));
  });
}

Svd3Parts svd3_parts(Var packed) {
  if (packed.rows() != 3 || packed.cols() != 7) throw ShapeMismatch("svd3_parts: expected packed 3x7");
  return {slice_cols(packed, 0, 3), slice_cols(packed, 3, 1), slice_cols(packed, 4, 3)};
}

Var svd_rotation(Var m) {
  const auto [u, sigma, v] = svd3_parts(svd3(m));
  const double det = (u.value() * v.value().transpose()).determinant();
  Matrix correction = Matrix::Identity(3, 3);
  correction(2, 2) = det < 0.0 ? -1.0 : 1.0;
  Graph& g = m.graph();
  return matmul(matmul(u, g.constant(std::move(correction))), transpose(v));
}

GradCheckReport grad_check(const ScalarProgram& fn, const std::vector<Matrix>& inputs, double eps) {
  auto evaluate = [&fn](const std::vector<Matrix>& at, std::vector<Matrix>* grads) {
    Graph g;
    std::vector<Var> vars;
    vars.reserve(at.size());
    for (const auto& m : at) vars.push_back(g.variable(m));
    const Var loss = fn(g, vars);
    const double value = loss.scalar();
    if (grads) {
      g.backward(loss);
      grads->clear();
      for (const auto& v : vars) grads->push_back(g.grad(v));
    }
    return value;
  };

  std::vector<Matrix> analytic;
  evaluate(inputs, &analytic);
  GradCheckReport report;
  std::vector<Matrix> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Index c = 0; c < inputs[i].size(); ++c) {
      double& x = probe[i].data()[c];
      const double x0 = x;
      x = x0 + eps;
      const double up = evaluate(probe, nullptr);
      x = x0 - eps;
      const double down = evaluate(probe, nullptr);
      x = x0;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i].data()[c];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        report.worst_input = i;
        report.worst_coord = c;
      }
    }
  }
  return report;
}

double grad_check(const std::function<Var(Graph&, Var)>& fn, const Matrix& point, double eps) {
  return grad_check([&fn](Graph& g, std::span<const Var> v) { return fn(g, v[0]); }, std::vector<Matrix>{point},
                    eps)
      .max_rel_error;
}

void adam_step(std::span<Tensor> params, std::span<const Matrix> grads, AdamState& state, double lr) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam_step: parameter/gradient count differs");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.data().rows(), p.data().cols()));
      state.second_moment.push_back(Matrix::Zero(p.data().rows(), p.data().cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeMismatch("adam_step: state does not match parameters");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params[i].data();
    const Matrix& gr = grads[i];
    if (gr.rows() != p.rows() || gr.cols() != p.cols()) throw ShapeMismatch("adam_step: gradient shape");
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * gr;
    v = state.beta2 * v + (1.0 - state.beta2) * gr.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr) {
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(p.grad());
  adam_step(params, grads, state, lr);
}

}  // namespace sspd::ad
