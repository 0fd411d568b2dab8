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

#include "sspd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "sspd/cf_solver.hpp"
#include "sspd/io.hpp"

namespace sspd {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (!(sigma_r >= 0.0)) fail("sigma_r must be >= 0");
  if (!(sigma_p >= 0.0)) fail("sigma_p must be >= 0");
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (iterations < 0) fail("iterations must be >= 0");
  if (k < 3) fail("k must be >= 3");
  if (c < 1) fail("c must be >= 1");
  if (!(r_cluster > 0.0)) fail("r_cluster must be positive");
  if (subsample < 3) fail("subsample must be >= 3");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (descriptor_dim < 1) fail("descriptor_dim must be >= 1");
  if (!(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0)) fail("max_skip_fraction must be in [0, 1]");
}

NetworkShape TrainConfig::network_shape() const {
  NetworkShape shape;
  shape.feature_head.back() = descriptor_dim;
  return shape;
}

TrainingPair make_training_pair(const PointCloud& cloud, const TrainConfig& cfg, Rng& rng) {
  if (cloud.empty()) throw EmptyCloud("make_training_pair");
  const Index n = cloud.size();
  const Index m = std::min(n, cfg.subsample);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (m < n) {
    for (Index i = 0; i < m; ++i) {
      const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));
    std::sort(idx.begin(), idx.end());
  }
  PointCloud sub;
  sub.points.resize(m, 3);
  for (Index i = 0; i < m; ++i) sub.points.row(i) = cloud.points.row(idx[static_cast<std::size_t>(i)]);
  if (cloud.intensity) {
    sub.intensity = VectorXd(m);
    for (Index i = 0; i < m; ++i) (*sub.intensity)(i) = (*cloud.intensity)(idx[static_cast<std::size_t>(i)]);
  }

  TrainingPair pair;
  pair.r_gt = cfg.sigma_r > 0.0 ? random_z_rotation(cfg.sigma_r, rng) : RigidTransformd::identity();
  pair.pc1 = jitter(sub, cfg.sigma_p, rng);
  pair.pc2 = jitter(apply_transform(sub, pair.r_gt), cfg.sigma_p, rng);
  return pair;
}

PairForward pair_forward(ad::Graph& graph, const TrainingPair& pair, const DescriptorParams& params,
                         const BoundParams& bound, const TrainConfig& cfg, Rng& rng) {
  PairForward out;
  const auto centers1 = farthest_point_sample(pair.pc1, cfg.k, rng);
  out.clusters1 = clusters_at(pair.pc1, centers1, cfg.r_cluster, cfg.c, rng);
  if (cfg.shared_centers && pair.pc2.size() == pair.pc1.size()) {
    out.clusters2 = clusters_at(pair.pc2, centers1, cfg.r_cluster, cfg.c, rng);
  } else {
    out.clusters2 = extract_clusters(pair.pc2, cfg.k, cfg.r_cluster, cfg.c, rng);
  }
  const ForwardOptions options{cfg.detach_orientation};
  out.desc1 = descriptor_forward(graph, out.clusters1, params, bound, options).descriptors;
  out.desc2 = descriptor_forward(graph, out.clusters2, params, bound, options).descriptors;
  const CfGraphResult cf = cf_register(out.desc1, out.clusters1.centers, out.desc2, out.clusters2.centers, cfg.alpha);
  out.solved = cf.transform;
  const ad::Var r_gt_t = graph.constant(pair.r_gt.rotation.transpose());
  const ad::Var identity = graph.constant(ad::Matrix::Identity(3, 3));
  out.loss = ad::frobenius_norm(ad::sub(identity, ad::matmul(cf.rotation, r_gt_t)));
  return out;
}

StepResult train_step(std::span<const TrainingPair> batch, DescriptorParams& params, ad::AdamState& opt,
                      const TrainConfig& cfg, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  auto& tensors = params.tensors();
  std::vector<ad::Matrix> grads;
  for (const auto& t : tensors) grads.push_back(ad::Matrix::Zero(t.data().rows(), t.data().cols()));

  StepResult result;
  double translation_sum = 0.0;
  for (const auto& pair : batch) {
    ad::Graph graph;
    const BoundParams bound = bind_variables(graph, params);
    try {
      const PairForward fwd = pair_forward(graph, pair, params, bound, cfg, rng);
      graph.backward(fwd.loss);
      if (graph.svd_degenerate()) {
        ++result.skipped;
        continue;
      }
      for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += graph.grad(bound.vars[i]);
      result.loss += fwd.loss.scalar();
      translation_sum += fwd.solved.translation.norm();
      ++result.used;
    } catch (const DegenerateConfiguration&) {
      ++result.skipped;
    }
  }
  if (result.used == 0) return result;
  const double inv = 1.0 / static_cast<double>(result.used);
  for (auto& g : grads) g *= inv;
  result.loss *= inv;
  result.mean_translation_norm = translation_sum * inv;
  ad::adam_step(tensors, grads, opt, cfg.lr);
  return result;
}

std::vector<std::optional<double>> evaluate_losses(std::span<const TrainingPair> batch,
                                                   const DescriptorParams& params, const TrainConfig& cfg, Rng& rng) {
  std::vector<std::optional<double>> out;
  for (const auto& pair : batch) {
    ad::Graph graph;
    const BoundParams bound = bind_detached(graph, params);
    try {
      out.emplace_back(pair_forward(graph, pair, params, bound, cfg, rng).loss.scalar());
    } catch (const DegenerateConfiguration&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

namespace {

std::string format_log_row(const TrainLogRow& row) {
  char line[128];
  std::snprintf(line, sizeof line, "%lld,%.17g,%lld,%.3f\n", static_cast<long long>(row.iter), row.loss,
                static_cast<long long>(row.skipped), row.seconds);
  return line;
}

}  // namespace

TrainOutput train(std::span<const PointCloud> dataset, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& cloud : dataset) require_valid(cloud, "train");

  Rng rng(cfg.seed);
  Rng init_rng = rng.split();
  TrainOutput out{DescriptorParams(cfg.network_shape(), init_rng), {}, 0, 0};
  ad::AdamState opt;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  auto next_cloud = [&]() -> const PointCloud& {
    if (cursor == order.size()) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      cursor = 0;
    }
    return dataset[order[cursor++]];
  };

  const auto start = std::chrono::steady_clock::now();
  std::vector<TrainingPair> batch;
  for (Index iter = 1; iter <= cfg.iterations; ++iter) {
    batch.clear();
    for (Index b = 0; b < cfg.batch_size; ++b) batch.push_back(make_training_pair(next_cloud(), cfg, rng));
    const StepResult step = train_step(batch, out.params, opt, cfg, rng);
    out.total_skipped += step.skipped;
    out.total_pairs += static_cast<Index>(batch.size());
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double loss = step.used > 0 ? step.loss : std::numeric_limits<double>::quiet_NaN();
    out.log.push_back({iter, loss, out.total_skipped, seconds});
    if (hooks.on_step) hooks.on_step(out.log.back());
    if (cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 && iter != cfg.iterations &&
        hooks.on_checkpoint)
      hooks.on_checkpoint(iter, out.params);
  }
  if (out.total_pairs > 0 &&
      static_cast<double>(out.total_skipped) > cfg.max_skip_fraction * static_cast<double>(out.total_pairs))
    throw TrainingFailed(std::to_string(out.total_skipped) + " of " + std::to_string(out.total_pairs) +
                         " pairs skipped as degenerate");
  return out;
}

TrainOutput train(std::span<const std::filesystem::path> dataset, const TrainConfig& cfg,
                  const std::filesystem::path& out, const std::filesystem::path& log_path) {
  std::vector<PointCloud> clouds;
  clouds.reserve(dataset.size());
  for (const auto& path : dataset) clouds.push_back(read_cloud(path));

  TrainHooks hooks;
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot open " + log_path.string());
    log << "iter,loss,skipped,seconds\n" << std::flush;
    hooks.on_step = [&log](const TrainLogRow& row) { log << format_log_row(row) << std::flush; };
  }
  hooks.on_checkpoint = [&out](Index iter, const DescriptorParams& params) {
    std::filesystem::path snap = out;
    snap.replace_filename(out.stem().string() + "_iter" + std::to_string(iter) + out.extension().string());
    save_checkpoint(params, snap);
  };
  TrainOutput result = train(clouds, cfg, hooks);
  save_checkpoint(result.params, out);
  if (log.is_open() && !log) throw IoError("write failed for " + log_path.string());
  return result;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out << "iter,loss,skipped,seconds\n";
  for (const auto& row : log) out << format_log_row(row);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sspd
