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

#include "sspd/descriptor_net.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sspd {

namespace {

struct LayerGroup {
  const char* prefix;
  std::vector<Index> NetworkShape::*widths;
};

constexpr LayerGroup kGroups[] = {
    {"orientation.point", &NetworkShape::orientation_point},
    {"orientation.head", &NetworkShape::orientation_head},
    {"feature.point", &NetworkShape::feature_point},
    {"feature.head", &NetworkShape::feature_head},
};

std::vector<std::string> canonical_names(const NetworkShape& shape) {
  std::vector<std::string> names;
  for (const auto& group : kGroups) {
    const auto& widths = shape.*(group.widths);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::string base = std::string(group.prefix) + std::to_string(l);
      names.push_back(base + ".W");
      names.push_back(base + ".b");
    }
  }
  return names;
}

void validate_shape(const NetworkShape& s) {
  auto chain_ok = [](const std::vector<Index>& w) {
    return w.size() >= 2 && std::all_of(w.begin(), w.end(), [](Index x) { return x > 0; });
  };
  if (!chain_ok(s.orientation_point) || !chain_ok(s.orientation_head) || !chain_ok(s.feature_point) ||
      !chain_ok(s.feature_head))
    throw ShapeError("every sub-network needs at least one layer with positive widths");
  if (s.orientation_point.front() != 3 || s.feature_point.front() != 3)
    throw ShapeError("per-point layers must take xyz input");
  if (s.orientation_point.back() != s.orientation_head.front() || s.feature_point.back() != s.feature_head.front())
    throw ShapeError("pooled width does not match head input");
  if (s.orientation_head.back() != 2) throw ShapeError("orientation head must output (sin, cos)");
}

// Walks the bound parameter list in canonical order.
class Cursor {
 public:
  explicit Cursor(const BoundParams& bound) : vars_(bound.vars) {}
  std::pair<ad::Var, ad::Var> next_layer() {
    const ad::Var w = vars_.at(pos_++);
    const ad::Var b = vars_.at(pos_++);
    return {w, b};
  }
  void skip_layers(std::size_t n) { pos_ += 2 * n; }

 private:
  const std::vector<ad::Var>& vars_;
  std::size_t pos_ = 0;
};

ad::Var run_point_mlp(ad::Var x, std::size_t layers, Cursor& cursor) {
  for (std::size_t l = 0; l < layers; ++l) {
    const auto [w, b] = cursor.next_layer();
    x = ad::relu(ad::add_bias(ad::matmul(x, w), b));
  }
  return x;
}

ad::Var run_head(ad::Var x, std::size_t layers, Cursor& cursor) {
  for (std::size_t l = 0; l < layers; ++l) {
    const auto [w, b] = cursor.next_layer();
    x = ad::add_bias(ad::matmul(x, w), b);
    if (l + 1 < layers) x = ad::relu(x);
  }
  return x;
}

constexpr double kDegenerateHeadNorm = 1e-12;

// Rows projected onto the unit circle; near-zero rows become (0, 1).
ad::Var unit_circle_rows(ad::Var head, std::vector<bool>& degenerate) {
  const ad::Matrix& v = head.value();
  ad::Matrix out(v.rows(), 2);
  VectorXd norms = v.rowwise().norm();
  degenerate.assign(static_cast<std::size_t>(v.rows()), false);
  for (Index i = 0; i < v.rows(); ++i) {
    if (norms(i) < kDegenerateHeadNorm) {
      degenerate[static_cast<std::size_t>(i)] = true;
      out.row(i) << 0.0, 1.0;
    } else {
      out.row(i) = v.row(i) / norms(i);
    }
  }
  return head.graph().push(std::move(out), {head},
                           [head, norms = std::move(norms)](ad::Graph& g, const ad::Matrix& y, const ad::Matrix& go) {
                             ad::Matrix gx = ad::Matrix::Zero(y.rows(), 2);
                             for (Index i = 0; i < y.rows(); ++i) {
                               if (norms(i) < kDegenerateHeadNorm) continue;
                               gx.row(i) = (go.row(i) - y.row(i) * go.row(i).dot(y.row(i))) / norms(i);
                             }
                             g.accumulate(head, gx);
                           });
}

}  // namespace

DescriptorParams::DescriptorParams(const NetworkShape& shape, Rng& rng) : shape_(shape) {
  validate_shape(shape_);
  names_ = canonical_names(shape_);
  for (const auto& group : kGroups) {
    const auto& widths = shape_.*(group.widths);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const Index fan_in = widths[l], fan_out = widths[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      ad::Matrix w(fan_in, fan_out);
      for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
      tensors_.emplace_back(std::vector<Index>{fan_in, fan_out}, std::move(w));
      tensors_.emplace_back(std::vector<Index>{fan_out}, ad::Matrix::Zero(1, fan_out));
    }
  }
}

std::size_t DescriptorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

void DescriptorParams::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

DescriptorParams DescriptorParams::from_tensors(std::vector<std::string> names, std::vector<ad::Tensor> tensors) {
  if (names.size() != tensors.size()) throw ShapeError("name and tensor counts differ");
  std::map<std::string, const ad::Tensor*> by_name;
  for (std::size_t i = 0; i < names.size(); ++i) by_name[names[i]] = &tensors[i];

  NetworkShape shape;
  for (const auto& group : kGroups) {
    auto& widths = shape.*(group.widths);
    widths.clear();
    for (std::size_t l = 0;; ++l) {
      const std::string base = std::string(group.prefix) + std::to_string(l);
      const auto w = by_name.find(base + ".W");
      const auto b = by_name.find(base + ".b");
      if (w == by_name.end()) break;
      if (b == by_name.end()) throw ShapeError("missing bias " + base + ".b");
      const auto& ws = w->second->shape();
      const auto& bs = b->second->shape();
      if (ws.size() != 2 || bs.size() != 1 || bs[0] != ws[1]) throw ShapeError("bad layer shape for " + base);
      if (widths.empty())
        widths.push_back(ws[0]);
      else if (widths.back() != ws[0])
        throw ShapeError("layer " + base + " does not chain");
      widths.push_back(ws[1]);
    }
  }
  validate_shape(shape);
  if (canonical_names(shape) != names) throw ShapeError("unexpected tensor names or order");

  DescriptorParams out;
  out.shape_ = shape;
  out.names_ = std::move(names);
  out.tensors_ = std::move(tensors);
  for (auto& t : out.tensors_) {
    if (!t.data().allFinite()) throw ShapeError("non-finite weight");
    t.zero_grad();
  }
  return out;
}

bool operator==(const DescriptorParams& a, const DescriptorParams& b) {
  if (a.names_ != b.names_ || a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    if (a.tensors_[i].shape() != b.tensors_[i].shape()) return false;
    if (a.tensors_[i].data() != b.tensors_[i].data()) return false;
  }
  return true;
}

BoundParams bind(ad::Graph& graph, DescriptorParams& params) {
  BoundParams out;
  for (auto& t : params.tensors()) out.vars.push_back(graph.parameter(t));
  return out;
}

BoundParams bind_detached(ad::Graph& graph, const DescriptorParams& params) {
  BoundParams out;
  for (const auto& t : params.tensors()) out.vars.push_back(graph.constant(t.data()));
  return out;
}

BoundParams bind_variables(ad::Graph& graph, const DescriptorParams& params) {
  BoundParams out;
  for (const auto& t : params.tensors()) out.vars.push_back(graph.variable(t.data()));
  return out;
}

OrientationOutput orientation_forward(ad::Graph& graph, ad::Var cluster_points, Index cluster_size,
                                      const DescriptorParams& params, const BoundParams& bound) {
  (void)graph;
  const NetworkShape& s = params.shape();
  Cursor cursor(bound);
  ad::Var x = run_point_mlp(cluster_points, s.orientation_point.size() - 1, cursor);
  x = ad::max_over_rows(x, cluster_size);
  x = run_head(x, s.orientation_head.size() - 1, cursor);
  OrientationOutput out;
  out.unit_sincos = unit_circle_rows(x, out.degenerate_head);
  return out;
}

ad::Var rotate_clusters_z(ad::Var cluster_points, ad::Var unit_sincos, Index cluster_size) {
  const ad::Matrix& p = cluster_points.value();
  const ad::Matrix& sc = unit_sincos.value();
  if (p.cols() != 3 || sc.cols() != 2 || cluster_size < 1 || p.rows() != sc.rows() * cluster_size)
    throw ShapeMismatch("rotate_clusters_z: points/angles do not match");
  ad::Matrix out = p;
  for (Index r = 0; r < p.rows(); ++r) {
    const double s = sc(r / cluster_size, 0), c = sc(r / cluster_size, 1);
    out(r, 0) = c * p(r, 0) + s * p(r, 1);
    out(r, 1) = -s * p(r, 0) + c * p(r, 1);
  }
  return cluster_points.graph().push(
      std::move(out), {cluster_points, unit_sincos},
      [cluster_points, unit_sincos, cluster_size](ad::Graph& g, const ad::Matrix&, const ad::Matrix& go) {
        const ad::Matrix& p = cluster_points.value();
        const ad::Matrix& sc = unit_sincos.value();
        if (g.requires_grad(cluster_points)) {
          ad::Matrix gp = go;
          for (Index r = 0; r < p.rows(); ++r) {
            const double s = sc(r / cluster_size, 0), c = sc(r / cluster_size, 1);
            gp(r, 0) = c * go(r, 0) - s * go(r, 1);
            gp(r, 1) = s * go(r, 0) + c * go(r, 1);
          }
          g.accumulate(cluster_points, gp);
        }
        if (g.requires_grad(unit_sincos)) {
          ad::Matrix gsc = ad::Matrix::Zero(sc.rows(), 2);
          for (Index r = 0; r < p.rows(); ++r) {
            const Index k = r / cluster_size;
            gsc(k, 0) += p(r, 1) * go(r, 0) - p(r, 0) * go(r, 1);
            gsc(k, 1) += p(r, 0) * go(r, 0) + p(r, 1) * go(r, 1);
          }
          g.accumulate(unit_sincos, gsc);
        }
      });
}

DescriptorForward descriptor_forward(ad::Graph& graph, const ClusterSet& clusters, const DescriptorParams& params,
                                     const BoundParams& bound, const ForwardOptions& options) {
  if (clusters.count() < 1 || clusters.points.rows() != clusters.count() * clusters.cluster_size)
    throw ShapeMismatch("descriptor_forward: malformed ClusterSet");
  const NetworkShape& s = params.shape();
  const ad::Var points = graph.constant(clusters.points);

  DescriptorForward out;
  out.orientation = orientation_forward(graph, points, clusters.cluster_size, params, bound);
  const ad::Var sincos =
      options.detach_orientation ? graph.constant(out.orientation.unit_sincos.value()) : out.orientation.unit_sincos;
  const ad::Var aligned = rotate_clusters_z(points, sincos, clusters.cluster_size);

  Cursor cursor(bound);
  cursor.skip_layers(s.orientation_point.size() + s.orientation_head.size() - 2);
  ad::Var x = run_point_mlp(aligned, s.feature_point.size() - 1, cursor);
  x = ad::max_over_rows(x, clusters.cluster_size);
  x = run_head(x, s.feature_head.size() - 1, cursor);
  out.descriptors = ad::l2_normalize_rows(x);
  return out;
}

VectorXd orientation_angles(const ClusterSet& clusters, const DescriptorParams& params) {
  ad::Graph g;
  const BoundParams bound = bind_detached(g, params);
  const auto out = orientation_forward(g, g.constant(clusters.points), clusters.cluster_size, params, bound);
  const ad::Matrix& sc = out.unit_sincos.value();
  VectorXd angles(sc.rows());
  for (Index i = 0; i < sc.rows(); ++i) angles(i) = std::atan2(sc(i, 0), sc(i, 1));
  return angles;
}

ClusterSet rotate_clusters_z(const ClusterSet& clusters, const VectorXd& angles) {
  if (angles.size() != clusters.count()) throw ShapeMismatch("rotate_clusters_z: one angle per cluster required");
  ad::Graph g;
  ad::Matrix sc(angles.size(), 2);
  sc.col(0) = angles.array().sin().matrix();
  sc.col(1) = angles.array().cos().matrix();
  ClusterSet out = clusters;
  out.points = rotate_clusters_z(g.constant(clusters.points), g.constant(sc), clusters.cluster_size).value();
  return out;
}

DescriptorSet describe(const ClusterSet& clusters, const DescriptorParams& params) {
  ad::Graph g;
  const BoundParams bound = bind_detached(g, params);
  DescriptorSet out;
  out.vectors = descriptor_forward(g, clusters, params, bound).descriptors.value();
  out.keypoints = clusters.centers;
  return out;
}

}  // namespace sspd
