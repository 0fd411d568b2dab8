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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sspd/errors.hpp"
#include "sspd/types.hpp"

// Minimal reverse-mode differentiation over dense row-major double matrices.
// A Graph is a tape: nodes are appended in topological order and backward()
// walks them in reverse. Every tensor is at most rank 2.

namespace sspd::ad {

using Matrix = MatrixXd;

/// Persistent differentiable value (network weights). Rank-1 tensors are
/// stored as a single row.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<Index> shape, Matrix data, bool requires_grad = true);

  const std::vector<Index>& shape() const { return shape_; }
  Index size() const { return data_.size(); }

  Matrix& data() { return data_; }
  const Matrix& data() const { return data_; }
  Matrix& grad() { return grad_; }
  const Matrix& grad() const { return grad_; }
  bool requires_grad() const { return requires_grad_; }

  void zero_grad() { grad_.setZero(data_.rows(), data_.cols()); }

 private:
  std::vector<Index> shape_;
  Matrix data_;
  Matrix grad_;
  bool requires_grad_ = true;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  /// Receives the node's output value and its gradient, and accumulates
  /// into the parents.
  using BackwardFn = std::function<void(Graph&, const Matrix& out, const Matrix& grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Leaf bound to t; backward() adds d(loss)/d(t) into t.grad().
  Var parameter(Tensor& t);

  /// Appends an operation node. The node requires grad iff any parent does.
  Var push(Matrix value, std::span<const Var> parents, BackwardFn backward);
  Var push(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
    return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }

  /// Reverse pass from a 1x1 node. Throws NonScalarLoss otherwise.
  void backward(Var loss, double seed = 1.0);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  /// Gradient after backward(); zero-filled if nothing reached the node.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Adds g into the pending gradient of v (no-op for constants).
  void accumulate(Var v, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

  /// Set by svd3 backward when a singular-value gap fell below tolerance and
  /// the gradient was clamped.
  bool svd_degenerate() const { return svd_degenerate_; }
  void flag_svd_degenerate() { svd_degenerate_ = true; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    Tensor* bound = nullptr;
  };
  std::vector<Node> nodes_;
  bool svd_degenerate_ = false;
};

// Primitive operations. Shapes are checked and ShapeMismatch is thrown on
// disagreement.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
/// x (n x m) plus row vector b (1 x m) broadcast over rows.
Var add_bias(Var x, Var b);
Var relu(Var x);
/// Max over each block of `group` consecutive rows: (n x m) -> (n/group x m).
/// The gradient goes to the first maximal row of each block.
Var max_over_rows(Var x, Index group);
/// Rows scaled to unit L2 norm; all-zero rows stay zero.
Var l2_normalize_rows(Var x);
/// Elementwise exp; entries below `floor` map to exactly 0 with zero gradient.
Var exp(Var x, double floor = -700.0);
Var neg(Var x);
Var scale(Var x, double s);
Var reduce_sum(Var x);
/// ||x||_F as a 1x1 node; gradient taken as zero at x = 0.
Var frobenius_norm(Var x);
/// axis 0 stacks rows, axis 1 stacks columns.
Var concat(Var a, Var b, int axis);
Var gather_rows(Var x, std::span<const Index> rows);
Var slice_cols(Var x, Index begin, Index count);
Var transpose(Var x);
/// D(i, j) = ||a_i - b_j||^2 for row sets a (n x d), b (m x d).
Var pairwise_sq_dist(Var a, Var b);

/// 3x3 SVD, M = U diag(sigma) V^T with sigma descending. Output is the packed
/// 3x7 block [U | sigma | V]. The backward uses the analytic formula with
/// F(i, j) = 1 / (sigma_j^2 - sigma_i^2); gaps below 1e-8 * max(1, sigma_1^2)
/// are clamped and flag the graph as SVD-degenerate.
Var svd3(Var m);

struct Svd3Parts {
  Var u, sigma, v;
};
Svd3Parts svd3_parts(Var packed);

/// Nearest rotation to m: U diag(1, 1, det(U V^T)) V^T, differentiable
/// through svd3.
Var svd_rotation(Var m);

/// Gradient check result for a scalar program.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  Index worst_coord = 0;
};

using ScalarProgram = std::function<Var(Graph&, std::span<const Var>)>;

/// Compares backward() against central differences at each coordinate of
/// each input; relative error is |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const ScalarProgram& fn, const std::vector<Matrix>& inputs, double eps);
double grad_check(const std::function<Var(Graph&, Var)>& fn, const Matrix& point, double eps);

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of params using grads (same order/shapes).
void adam_step(std::span<Tensor> params, std::span<const Matrix> grads, AdamState& state, double lr);
/// Same, reading each tensor's own grad().
void adam_step(std::span<Tensor> params, AdamState& state, double lr);

}  // namespace sspd::ad
