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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sspd/autodiff.hpp"
#include "sspd/descriptor_net.hpp"
#include "sspd/geometry.hpp"

namespace sspd {

inline constexpr Index kFullScaleIterations = 72500;
inline constexpr Index kDeskScaleIterations = 2000;

struct TrainConfig {
  double sigma_r = 0.6;   // radians, yaw of the self-rotation
  double sigma_p = 0.01;  // meters, per-axis jitter
  double alpha = 1.0;
  Index batch_size = 6;
  double lr = 1e-3;
  Index iterations = kDeskScaleIterations;
  Index k = 128;           // clusters per cloud
  Index c = 64;            // points per cluster
  double r_cluster = 2.0;  // meters
  Index subsample = 4096;
  std::uint64_t seed = 0;
  Index checkpoint_every = 0;  // 0: final checkpoint only
  Index descriptor_dim = 32;
  /// Reuse the PC1 cluster centers (same indices) for PC2 instead of sampling
  /// PC2 independently.
  bool shared_centers = false;
  bool detach_orientation = false;
  /// Fraction of skipped pairs above which train() fails.
  double max_skip_fraction = 0.1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  NetworkShape network_shape() const;
};

struct TrainingPair {
  PointCloud pc1;
  PointCloud pc2;
  RigidTransformd r_gt;
};

/// Uniform subsample (capped at the cloud size), then PC1 = jitter(sub) and
/// PC2 = jitter(Rz(phi) * sub). Throws EmptyCloud.
TrainingPair make_training_pair(const PointCloud& cloud, const TrainConfig& cfg, Rng& rng);

/// Forward chain for one pair: clusters, shared-weight descriptors, CF, loss.
struct PairForward {
  ad::Var loss;
  RigidTransformd solved;
  ClusterSet clusters1, clusters2;
  ad::Var desc1, desc2;
};
PairForward pair_forward(ad::Graph& graph, const TrainingPair& pair, const DescriptorParams& params,
                         const BoundParams& bound, const TrainConfig& cfg, Rng& rng);

struct StepResult {
  double loss = 0.0;  // mean over the pairs that were used
  Index used = 0;
  Index skipped = 0;
  double mean_translation_norm = 0.0;  // diagnostic; translation is not supervised
};

/// One optimization step: mean loss over the batch, one backward pass per
/// pair, gradients averaged, one Adam update. Pairs whose CF solve is
/// degenerate are skipped and counted. No update happens if every pair is skipped.
StepResult train_step(std::span<const TrainingPair> batch, DescriptorParams& params, ad::AdamState& opt,
                      const TrainConfig& cfg, Rng& rng);

/// Loss of each pair without updating anything; skipped pairs are nullopt.
std::vector<std::optional<double>> evaluate_losses(std::span<const TrainingPair> batch,
                                                   const DescriptorParams& params, const TrainConfig& cfg, Rng& rng);

struct TrainLogRow {
  Index iter;
  double loss;
  Index skipped;  // cumulative
  double seconds;
};

struct TrainOutput {
  DescriptorParams params;
  std::vector<TrainLogRow> log;
  Index total_skipped = 0;
  Index total_pairs = 0;
};

struct TrainHooks {
  /// Called after each step; iteration numbers start at 1.
  std::function<void(const TrainLogRow&)> on_step;
  /// Called every cfg.checkpoint_every steps (not for the final state).
  std::function<void(Index iter, const DescriptorParams&)> on_checkpoint;
};

/// Runs cfg.iterations steps over shuffled clouds (reshuffled each pass).
/// Throws TrainingFailed when skipped pairs exceed
/// cfg.max_skip_fraction.
TrainOutput train(std::span<const PointCloud> dataset, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// File-level driver: reads clouds, trains, writes the final checkpoint to
/// out (plus "<stem>_iter<N><ext>" snapshots) and the CSV log to log_path.
TrainOutput train(std::span<const std::filesystem::path> dataset, const TrainConfig& cfg,
                  const std::filesystem::path& out, const std::filesystem::path& log_path);

/// Header "iter,loss,skipped,seconds".
void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace sspd
