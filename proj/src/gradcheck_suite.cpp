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

#include "sspd/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "sspd/autodiff.hpp"
#include "sspd/cf_solver.hpp"
#include "sspd/descriptor_net.hpp"

namespace sspd {

bool GradCheckSuiteResult::passed() const {
  return !cases.empty() && std::all_of(cases.begin(), cases.end(), [](const GradCheckCase& c) { return c.passed; });
}

namespace {

using ad::Graph;
using ad::Matrix;
using ad::Var;

constexpr double kEps = 1e-6;

Matrix random_matrix(Index r, Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// Values bounded away from zero so ReLU kinks stay out of the stencil.
Matrix away_from_zero(Index r, Index c, Rng& rng) {
  Matrix m = random_matrix(r, c, rng, 0.1, 1.0);
  for (Index i = 0; i < m.size(); ++i)
    if (rng.uniform() < 0.5) m.data()[i] = -m.data()[i];
  return m;
}

// Contracts a non-scalar output with fixed random weights.
Var contract(Graph& g, Var x, Rng& rng_copy) {
  return ad::reduce_sum(ad::hadamard(x, g.constant(random_matrix(x.rows(), x.cols(), rng_copy))));
}

Points3d make_cloud(Index n, Rng& rng, double spread) {
  Points3d p(n, 3);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(-spread, spread);
  return p;
}

ClusterSet make_clusters(const Points3d& centers, Index c, Rng& rng) {
  ClusterSet set;
  set.centers = centers;
  set.cluster_size = c;
  set.points.resize(centers.rows() * c, 3);
  for (Index i = 0; i < set.points.size(); ++i) set.points.data()[i] = rng.uniform(-1.0, 1.0);
  for (Index i = 0; i < centers.rows(); ++i) set.source_indices.push_back(i);
  return set;
}

struct Suite {
  double tolerance;
  Rng rng;
  GradCheckSuiteResult result;

  void record(const std::string& name, double err) {
    result.cases.push_back({name, err, std::isfinite(err) && err < tolerance});
  }

  // Op applied to inputs, contracted with seeded weights.
  void check(const std::string& name, const std::vector<Matrix>& inputs,
             const std::function<Var(Graph&, std::span<const Var>)>& op) {
    const std::uint64_t weight_seed = rng.next_u64();
    auto program = [&op, weight_seed](Graph& g, std::span<const Var> v) {
      Rng w(weight_seed);
      const Var out = op(g, v);
      return out.rows() == 1 && out.cols() == 1 ? out : contract(g, out, w);
    };
    record(name, ad::grad_check(program, inputs, kEps).max_rel_error);
  }

  // Directional derivative along random unit directions, for programs too
  // large to probe coordinate by coordinate.
  void check_directional(const std::string& name, const std::vector<Matrix>& inputs, const ad::ScalarProgram& fn,
                         int directions) {
    auto evaluate = [&fn](const std::vector<Matrix>& at, std::vector<Matrix>* grads) {
      Graph g;
      std::vector<Var> vars;
      for (const auto& m : at) vars.push_back(g.variable(m));
      const Var loss = fn(g, vars);
      if (grads) {
        g.backward(loss);
        for (const auto& v : vars) grads->push_back(g.grad(v));
      }
      return loss.scalar();
    };
    std::vector<Matrix> grads;
    evaluate(inputs, &grads);
    double worst = 0.0;
    for (int d = 0; d < directions; ++d) {
      std::vector<Matrix> dir;
      double norm2 = 0.0;
      for (const auto& m : inputs) {
        dir.push_back(random_matrix(m.rows(), m.cols(), rng));
        norm2 += dir.back().squaredNorm();
      }
      double analytic = 0.0;
      for (std::size_t i = 0; i < dir.size(); ++i) {
        dir[i] /= std::sqrt(norm2);
        analytic += (grads[i].array() * dir[i].array()).sum();
      }
      std::vector<Matrix> up = inputs, down = inputs;
      for (std::size_t i = 0; i < dir.size(); ++i) {
        up[i] += kEps * dir[i];
        down[i] -= kEps * dir[i];
      }
      const double numeric = (evaluate(up, nullptr) - evaluate(down, nullptr)) / (2 * kEps);
      const double rel = std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
      worst = std::isfinite(rel) ? std::max(worst, rel) : std::numeric_limits<double>::infinity();
    }
    record(name, worst);
  }

  void primitives() {
    const Matrix a = random_matrix(3, 4, rng), b = random_matrix(4, 2, rng), c = random_matrix(3, 4, rng);
    check("matmul", {a, b}, [](Graph&, auto v) { return ad::matmul(v[0], v[1]); });
    check("add", {a, c}, [](Graph&, auto v) { return ad::add(v[0], v[1]); });
    check("sub", {a, c}, [](Graph&, auto v) { return ad::sub(v[0], v[1]); });
    check("hadamard", {a, c}, [](Graph&, auto v) { return ad::hadamard(v[0], v[1]); });
    check("add_bias", {a, random_matrix(1, 4, rng)}, [](Graph&, auto v) { return ad::add_bias(v[0], v[1]); });
    check("relu", {away_from_zero(4, 3, rng)}, [](Graph&, auto v) { return ad::relu(v[0]); });
    check("max_over_rows", {random_matrix(6, 3, rng)}, [](Graph&, auto v) { return ad::max_over_rows(v[0], 3); });
    check("l2_normalize_rows", {random_matrix(4, 3, rng)}, [](Graph&, auto v) { return ad::l2_normalize_rows(v[0]); });
    check("exp", {random_matrix(3, 3, rng)}, [](Graph&, auto v) { return ad::exp(v[0]); });
    check("neg", {a}, [](Graph&, auto v) { return ad::neg(v[0]); });
    check("scale", {a}, [](Graph&, auto v) { return ad::scale(v[0], -2.5); });
    check("reduce_sum", {a}, [](Graph&, auto v) { return ad::reduce_sum(v[0]); });
    check("frobenius_norm", {a}, [](Graph&, auto v) { return ad::frobenius_norm(v[0]); });
    check("concat_rows", {a, c}, [](Graph&, auto v) { return ad::concat(v[0], v[1], 0); });
    check("concat_cols", {a, c}, [](Graph&, auto v) { return ad::concat(v[0], v[1], 1); });
    const std::vector<Index> rows{2, 0, 2, 1};
    check("gather_rows", {a}, [rows](Graph&, auto v) { return ad::gather_rows(v[0], rows); });
    check("slice_cols", {a}, [](Graph&, auto v) { return ad::slice_cols(v[0], 1, 2); });
    check("transpose", {a}, [](Graph&, auto v) { return ad::transpose(v[0]); });
    check("pairwise_sq_dist", {random_matrix(3, 4, rng), random_matrix(5, 4, rng)},
          [](Graph&, auto v) { return ad::pairwise_sq_dist(v[0], v[1]); });

    // Well separated singular values keep the SVD differentiable.
    Matrix m = Matrix(Vector3d(3.0, 2.0, 1.0).asDiagonal()) + 0.3 * random_matrix(3, 3, rng);
    // U and V columns are sign-ambiguous; U diag(s) V^T and sigma are not.
    check("svd3", {m}, [](Graph& g, auto v) {
      const auto parts = ad::svd3_parts(ad::svd3(v[0]));
      const Var weighted = ad::matmul(ad::matmul(parts.u, g.constant(Matrix(Vector3d(0.7, -1.3, 2.1).asDiagonal()))),
                                      ad::transpose(parts.v));
      return ad::add(ad::reduce_sum(ad::hadamard(parts.sigma, parts.sigma)), ad::reduce_sum(weighted));
    });
    check("svd_rotation", {m}, [](Graph&, auto v) { return ad::svd_rotation(v[0]); });
    Matrix reflect = m;
    reflect.row(2) *= -1.0;
    check("svd_rotation_reflection", {reflect}, [](Graph&, auto v) { return ad::svd_rotation(v[0]); });
  }

  void registration_layer() {
    const Points3d p = make_cloud(5, rng, 3.0), q = make_cloud(6, rng, 3.0);
    check("pair_grid_covariance", {random_matrix(5, 6, rng, 0.1, 1.0)},
          [&](Graph&, auto v) { return pair_grid_covariance(v[0], p, q); });

    const Points3d qr = (p * rotation_z(0.4).transpose()).rowwise() + Vector3d(0.5, -1.0, 0.2).transpose();
    auto unit_rows = [this](Index n) {
      Matrix d = random_matrix(n, 4, rng);
      d.rowwise().normalize();
      return d;
    };
    check("cf_register_rotation", {unit_rows(5), unit_rows(5)}, [&](Graph&, auto v) {
      return cf_register(v[0], p, v[1], qr, 1.0).rotation;
    });
    const Matrix r_gt_t = rotation_z(0.4).transpose();
    check("cf_register_loss", {unit_rows(5), unit_rows(5)}, [&](Graph& g, auto v) {
      const auto cf = cf_register(v[0], p, v[1], qr, 1.0);
      return ad::frobenius_norm(
          ad::sub(g.constant(Matrix::Identity(3, 3)), ad::matmul(cf.rotation, g.constant(r_gt_t))));
    });
  }

  void network(const NetworkShape& shape, const std::string& tag, bool directional) {
    constexpr Index k = 5, c = 4;
    const double angle = 0.35;
    const Points3d centers1 = make_cloud(k, rng, 5.0);
    const Points3d centers2 = centers1 * rotation_z(angle).transpose();
    const ClusterSet clusters1 = make_clusters(centers1, c, rng);
    ClusterSet clusters2 = make_clusters(centers2, c, rng);
    clusters2.points = clusters1.points * rotation_z(angle).transpose() + 0.05 * make_cloud(k * c, rng, 1.0);

    Rng init = rng.split();
    const DescriptorParams params(shape, init);
    std::vector<Matrix> inputs;
    for (const auto& t : params.tensors()) {
      Matrix m = t.data();
      // Non-zero biases so every bias gradient is exercised off the origin.
      if (m.rows() == 1) m = random_matrix(1, m.cols(), rng, -0.1, 0.1);
      inputs.push_back(m);
    }
    const Matrix r_gt_t = rotation_z(angle).transpose();

    auto program = [&](Graph& g, std::span<const Var> v) {
      const BoundParams bound{std::vector<Var>(v.begin(), v.end())};
      const Var d1 = descriptor_forward(g, clusters1, params, bound).descriptors;
      const Var d2 = descriptor_forward(g, clusters2, params, bound).descriptors;
      const auto cf = cf_register(d1, clusters1.centers, d2, clusters2.centers, 1.0);
      return ad::frobenius_norm(
          ad::sub(g.constant(Matrix::Identity(3, 3)), ad::matmul(cf.rotation, g.constant(r_gt_t))));
    };
    if (directional)
      check_directional("composite_loss_" + tag, inputs, program, 8);
    else
      record("composite_loss_" + tag, ad::grad_check(program, inputs, kEps).max_rel_error);

    // Orientation rotation applied to clusters, differentiable in both inputs.
    const Matrix pts = clusters1.points;
    Matrix sincos = random_matrix(k, 2, rng);
    sincos.rowwise().normalize();
    check("rotate_clusters_z_" + tag, {pts, sincos},
          [](Graph&, auto v) { return rotate_clusters_z(v[0], v[1], 4); });
  }
};

}  // namespace

GradCheckSuiteResult run_gradcheck_suite(double tolerance, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Suite suite{tolerance, Rng(seed), {}};
  suite.primitives();
  suite.registration_layer();

  NetworkShape small;
  small.orientation_point = {3, 6, 8};
  small.orientation_head = {8, 6, 2};
  small.feature_point = {3, 8, 10};
  small.feature_head = {10, 8, 6};
  suite.network(small, "small", false);
  suite.network(NetworkShape{}, "full", true);

  suite.result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return suite.result;
}

}  // namespace sspd
