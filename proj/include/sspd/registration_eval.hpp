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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sspd/descriptor_net.hpp"
#include "sspd/geometry.hpp"
#include "sspd/io.hpp"

namespace sspd {

struct Correspondence {
  Index a;
  Index b;
  double distance;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;

  Index size() const { return static_cast<Index>(pairs.size()); }
};

struct IssConfig {
  double salient_radius = 3.0;  // meters
  double nms_radius = 4.0;      // meters
  double gamma21 = 0.975;
  double gamma32 = 0.975;
  Index min_neighbors = 5;
  /// Points with lambda3 / lambda1 below this are treated as flat.
  double min_flatness_ratio = 1e-3;
  /// Keep only the strongest responses; 0 keeps all.
  Index max_keypoints = 0;

  void validate() const;
};

/// Eigen-ratio saliency with non-maximum suppression on the smallest
/// eigenvalue. Returns ascending point indices; may be empty.
std::vector<Index> iss_like_keypoints(const PointCloud& cloud, const IssConfig& cfg = {});

/// Nearest descriptor in b for every row of a; ties go to the lowest index.
CorrespondenceSet nn_match(const MatrixXd& desc_a, const MatrixXd& desc_b);
CorrespondenceSet nn_match(const DescriptorSet& desc_a, const DescriptorSet& desc_b);

inline constexpr Index kRansacIterationCap = 10000;

struct RansacConfig {
  Index max_iterations = kRansacIterationCap;
  double confidence = 0.99;
  double inlier_threshold = 1.0;  // meters
  Index sample_size = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RansacResult {
  RigidTransformd transform;
  Index iterations = 0;
  Index inliers = 0;
};

/// Iterations needed to draw one all-inlier sample with the given confidence.
double ransac_iteration_bound(double inlier_ratio, double confidence, Index sample_size);

/// Hypotheses from minimal samples, scored by inlier count, adaptive stop,
/// final unweighted Kabsch refit on the best inlier set.
/// Throws InsufficientCorrespondences, NoConsensus.
RansacResult ransac_register(const CorrespondenceSet& corr, const Points3d& kpts_a, const Points3d& kpts_b,
                             const RansacConfig& cfg);

inline constexpr double kSuccessRte = 2.0;  // meters
inline constexpr double kSuccessRre = 5.0;  // degrees

enum class Detector { iss, fps };
Detector parse_detector(const std::string& name);
std::string to_string(Detector d);

struct EvalConfig {
  Detector detector = Detector::iss;
  IssConfig iss;
  Index fps_keypoints = 128;
  double r_cluster = 2.0;
  Index c = 64;
  RansacConfig ransac;
  std::uint64_t seed = 0;
};

struct EvalResult {
  double rte = 0.0;
  double rre = 0.0;
  bool success = false;
  Index iterations = 0;
  Index inliers = 0;
  RigidTransformd transform;
  std::string error;  // non-empty when the pair could not be registered
};

/// Keypoint indices of a cloud for the configured detector.
std::vector<Index> detect_keypoints(const PointCloud& cloud, const EvalConfig& cfg, Rng& rng);

/// Detector, clusters, descriptors for one cloud.
DescriptorSet describe_cloud(const PointCloud& cloud, const DescriptorParams& params, const EvalConfig& cfg,
                             Rng& rng);

/// Estimates the transform mapping cloud_a onto cloud_b. Throws on failure.
RansacResult register_pair(const PointCloud& cloud_a, const PointCloud& cloud_b, const DescriptorParams& params,
                           const EvalConfig& cfg);

/// register_pair plus error metrics against gt (which maps a to b). Failures
/// are reported in the result rather than thrown.
EvalResult evaluate_pair(const PointCloud& cloud_a, const PointCloud& cloud_b, const RigidTransformd& gt,
                         const DescriptorParams& params, const EvalConfig& cfg);

struct PrecisionPoint {
  double threshold;
  double precision;
};

/// Fraction of nearest-descriptor matches landing within each threshold of
/// the true location. Thresholds must be ascending.
std::vector<PrecisionPoint> precision_curve(const DescriptorSet& desc_a, const DescriptorSet& desc_b,
                                            const RigidTransformd& gt, const std::vector<double>& thresholds);

/// Match distances to ground truth, one per keypoint of a.
VectorXd match_errors(const DescriptorSet& desc_a, const DescriptorSet& desc_b, const RigidTransformd& gt);

/// evaluate_pair over every manifest row; row i uses its own seed stream
/// derived from cfg.seed, so results do not depend on evaluation order.
std::vector<EvalResult> evaluate_manifest(const std::vector<ManifestRow>& rows, const DescriptorParams& params,
                                          const EvalConfig& cfg);

/// Keypoint matches pooled over all manifest rows.
std::vector<PrecisionPoint> precision_manifest(const std::vector<ManifestRow>& rows, const DescriptorParams& params,
                                               const EvalConfig& cfg, const std::vector<double>& thresholds);

/// Header "pair_id,rte_m,rre_deg,success,iterations,inliers".
void write_results_csv(const std::vector<EvalResult>& results, const std::filesystem::path& path);
/// Header "threshold_m,precision".
void write_precision_csv(const std::vector<PrecisionPoint>& curve, const std::filesystem::path& path);

}  // namespace sspd
