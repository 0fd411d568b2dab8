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

#include "sspd/registration_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "sspd/cf_solver.hpp"
#include "sspd/io.hpp"
#include "sspd/sampling.hpp"

namespace sspd {

void IssConfig::validate() const {
  if (!(salient_radius > 0.0) || !(nms_radius > 0.0)) throw ConfigError("ISS radii must be positive");
  if (!(gamma21 > 0.0 && gamma21 < 1.0) || !(gamma32 > 0.0 && gamma32 < 1.0))
    throw ConfigError("ISS gammas must lie in (0, 1)");
  if (min_neighbors < 3) throw ConfigError("ISS min_neighbors must be >= 3");
  if (max_keypoints < 0) throw ConfigError("ISS max_keypoints must be >= 0");
}

std::vector<Index> iss_like_keypoints(const PointCloud& cloud, const IssConfig& cfg) {
  cfg.validate();
  const Index n = cloud.size();
  const RadiusIndex index(cloud.points, std::max(cfg.salient_radius, cfg.nms_radius));

  std::vector<double> response(static_cast<std::size_t>(n), -1.0);
  std::vector<Index> candidates;
  for (Index i = 0; i < n; ++i) {
    const auto nbrs = index.query(cloud.point(i), cfg.salient_radius);
    if (static_cast<Index>(nbrs.size()) < cfg.min_neighbors) continue;
    Vector3d mean = Vector3d::Zero();
    for (Index j : nbrs) mean += cloud.point(j);
    mean /= static_cast<double>(nbrs.size());
    Matrix3d cov = Matrix3d::Zero();
    for (Index j : nbrs) {
      const Vector3d d = cloud.point(j) - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nbrs.size());
    const Eigen::SelfAdjointEigenSolver<Matrix3d> eig(cov, Eigen::EigenvaluesOnly);
    const Vector3d ev = eig.eigenvalues();  // ascending
    const double l1 = ev(2), l2 = ev(1), l3 = ev(0);
    if (!(l1 > 0.0) || !(l2 > 0.0)) continue;
    if (l2 / l1 >= cfg.gamma21 || l3 / l2 >= cfg.gamma32) continue;
    if (l3 / l1 < cfg.min_flatness_ratio) continue;
    response[static_cast<std::size_t>(i)] = l3;
    candidates.push_back(i);
  }

  std::vector<Index> keep;
  for (Index i : candidates) {
    const double ri = response[static_cast<std::size_t>(i)];
    bool is_max = true;
    for (Index j : index.query(cloud.point(i), cfg.nms_radius)) {
      const double rj = response[static_cast<std::size_t>(j)];
      if (rj > ri || (rj == ri && j < i)) {
        is_max = false;
        break;
      }
    }
    if (is_max) keep.push_back(i);
  }

  if (cfg.max_keypoints > 0 && static_cast<Index>(keep.size()) > cfg.max_keypoints) {
    std::stable_sort(keep.begin(), keep.end(), [&response](Index a, Index b) {
      return response[static_cast<std::size_t>(a)] > response[static_cast<std::size_t>(b)];
    });
    keep.resize(static_cast<std::size_t>(cfg.max_keypoints));
    std::sort(keep.begin(), keep.end());
  }
  return keep;
}

CorrespondenceSet nn_match(const MatrixXd& desc_a, const MatrixXd& desc_b) {
  if (desc_a.rows() == 0 || desc_b.rows() == 0) throw std::invalid_argument("nn_match: empty descriptor set");
  if (desc_a.cols() != desc_b.cols()) throw ShapeMismatch("nn_match: descriptor widths differ");
  CorrespondenceSet out;
  out.pairs.reserve(static_cast<std::size_t>(desc_a.rows()));
  for (Index i = 0; i < desc_a.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < desc_b.rows(); ++j) {
      const double d = (desc_a.row(i) - desc_b.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out.pairs.push_back({i, best, std::sqrt(best_d)});
  }
  return out;
}

CorrespondenceSet nn_match(const DescriptorSet& desc_a, const DescriptorSet& desc_b) {
  return nn_match(desc_a.vectors, desc_b.vectors);
}

void RansacConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("ransac max_iterations must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("ransac confidence must lie in (0, 1)");
  if (!(inlier_threshold > 0.0)) throw ConfigError("ransac inlier_threshold must be positive");
  if (sample_size < 3) throw ConfigError("ransac sample_size must be >= 3");
}

double ransac_iteration_bound(double inlier_ratio, double confidence, Index sample_size) {
  const double good = std::pow(std::clamp(inlier_ratio, 0.0, 1.0), static_cast<double>(sample_size));
  if (good >= 1.0) return 0.0;
  if (good <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(1.0 - confidence) / std::log(1.0 - good);
}

namespace {

Index count_inliers(const CorrespondenceSet& corr, const Points3d& a, const Points3d& b, const RigidTransformd& tf,
                    double threshold, std::vector<Index>* members) {
  Index count = 0;
  if (members) members->clear();
  for (Index i = 0; i < corr.size(); ++i) {
    const auto& p = corr.pairs[static_cast<std::size_t>(i)];
    if ((tf(Vector3d(a.row(p.a).transpose())) - b.row(p.b).transpose()).norm() < threshold) {
      ++count;
      if (members) members->push_back(i);
    }
  }
  return count;
}

RigidTransformd fit(const CorrespondenceSet& corr, const std::vector<Index>& rows, const Points3d& a,
                    const Points3d& b) {
  Points3d pa(static_cast<Index>(rows.size()), 3), pb(static_cast<Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& p = corr.pairs[static_cast<std::size_t>(rows[i])];
    pa.row(static_cast<Index>(i)) = a.row(p.a);
    pb.row(static_cast<Index>(i)) = b.row(p.b);
  }
  return kabsch<double>(pa, pb).transform;
}

}  // namespace

RansacResult ransac_register(const CorrespondenceSet& corr, const Points3d& kpts_a, const Points3d& kpts_b,
                             const RansacConfig& cfg) {
  cfg.validate();
  if (corr.size() < cfg.sample_size)
    throw InsufficientCorrespondences(std::to_string(corr.size()) + " correspondences, need " +
                                      std::to_string(cfg.sample_size));
  for (const auto& p : corr.pairs)
    if (p.a < 0 || p.a >= kpts_a.rows() || p.b < 0 || p.b >= kpts_b.rows())
      throw std::out_of_range("ransac_register: correspondence index out of range");

  Rng rng(cfg.seed);
  const auto n = static_cast<std::uint64_t>(corr.size());
  RansacResult result;
  Index best = 0;
  std::vector<Index> best_members, members, sample(static_cast<std::size_t>(cfg.sample_size));
  double bound = std::numeric_limits<double>::infinity();
  Index iter = 0;
  while (iter < cfg.max_iterations && static_cast<double>(iter) < bound) {
    ++iter;
    for (std::size_t s = 0; s < sample.size(); ++s) {
      Index pick;
      do {
        pick = static_cast<Index>(rng.below(n));
      } while (std::find(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(s), pick) !=
               sample.begin() + static_cast<std::ptrdiff_t>(s));
      sample[s] = pick;
    }
    RigidTransformd hypothesis;
    try {
      hypothesis = fit(corr, sample, kpts_a, kpts_b);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    const Index count = count_inliers(corr, kpts_a, kpts_b, hypothesis, cfg.inlier_threshold, &members);
    if (count > best) {
      best = count;
      best_members = members;
      result.transform = hypothesis;
      bound = ransac_iteration_bound(static_cast<double>(best) / static_cast<double>(n), cfg.confidence,
                                     cfg.sample_size);
    }
  }
  result.iterations = iter;
  if (best < 3) throw NoConsensus("best hypothesis has " + std::to_string(best) + " inliers");

  try {
    result.transform = fit(corr, best_members, kpts_a, kpts_b);
  } catch (const DegenerateConfiguration&) {
    // keep the minimal-sample hypothesis
  }
  result.inliers = count_inliers(corr, kpts_a, kpts_b, result.transform, cfg.inlier_threshold, nullptr);
  return result;
}

Detector parse_detector(const std::string& name) {
  if (name == "iss" || name == "iss_like") return Detector::iss;
  if (name == "fps" || name == "fps_random") return Detector::fps;
  throw ConfigError("unknown detector '" + name + "' (expected iss or fps)");
}

std::string to_string(Detector d) { return d == Detector::iss ? "iss" : "fps"; }

std::vector<Index> detect_keypoints(const PointCloud& cloud, const EvalConfig& cfg, Rng& rng) {
  if (cfg.detector == Detector::iss) return iss_like_keypoints(cloud, cfg.iss);
  return farthest_point_sample(cloud, cfg.fps_keypoints, rng);
}

DescriptorSet describe_cloud(const PointCloud& cloud, const DescriptorParams& params, const EvalConfig& cfg,
                             Rng& rng) {
  require_valid(cloud, "describe_cloud");
  const auto keypoints = detect_keypoints(cloud, cfg, rng);
  if (keypoints.empty()) throw InsufficientCorrespondences("detector returned no keypoints");
  return describe(clusters_at(cloud, keypoints, cfg.r_cluster, cfg.c, rng), params);
}

RansacResult register_pair(const PointCloud& cloud_a, const PointCloud& cloud_b, const DescriptorParams& params,
                           const EvalConfig& cfg) {
  Rng rng(cfg.seed);
  const DescriptorSet da = describe_cloud(cloud_a, params, cfg, rng);
  const DescriptorSet db = describe_cloud(cloud_b, params, cfg, rng);
  RansacConfig rc = cfg.ransac;
  rc.seed = rng.next_u64();
  return ransac_register(nn_match(da, db), da.keypoints, db.keypoints, rc);
}

EvalResult evaluate_pair(const PointCloud& cloud_a, const PointCloud& cloud_b, const RigidTransformd& gt,
                         const DescriptorParams& params, const EvalConfig& cfg) {
  EvalResult out;
  try {
    const RansacResult r = register_pair(cloud_a, cloud_b, params, cfg);
    const auto err = registration_error(r.transform, gt);
    out.rte = err.rte;
    out.rre = err.rre;
    out.iterations = r.iterations;
    out.inliers = r.inliers;
    out.transform = r.transform;
    out.success = out.rte < kSuccessRte && out.rre < kSuccessRre;
  } catch (const Error& e) {
    out.rte = out.rre = std::numeric_limits<double>::quiet_NaN();
    out.error = e.what();
  }
  return out;
}

VectorXd match_errors(const DescriptorSet& desc_a, const DescriptorSet& desc_b, const RigidTransformd& gt) {
  const CorrespondenceSet corr = nn_match(desc_a, desc_b);
  VectorXd err(corr.size());
  for (Index i = 0; i < corr.size(); ++i) {
    const auto& p = corr.pairs[static_cast<std::size_t>(i)];
    err(i) = (desc_b.keypoints.row(p.b).transpose() - gt(Vector3d(desc_a.keypoints.row(p.a).transpose()))).norm();
  }
  return err;
}

std::vector<PrecisionPoint> precision_curve(const DescriptorSet& desc_a, const DescriptorSet& desc_b,
                                            const RigidTransformd& gt, const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("precision_curve: thresholds must be ascending");
  const VectorXd err = match_errors(desc_a, desc_b, gt);
  std::vector<PrecisionPoint> curve;
  for (double tau : thresholds)
    curve.push_back({tau, static_cast<double>((err.array() <= tau).count()) / static_cast<double>(err.size())});
  return curve;
}

namespace {

std::vector<std::uint64_t> row_seeds(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& s : out) s = rng.next_u64();
  return out;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::vector<EvalResult> evaluate_manifest(const std::vector<ManifestRow>& rows, const DescriptorParams& params,
                                          const EvalConfig& cfg) {
  const auto seeds = row_seeds(cfg.seed, rows.size());
  std::vector<EvalResult> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EvalConfig row_cfg = cfg;
    row_cfg.seed = seeds[i];
    const PointCloud a = read_cloud(rows[i].cloud_a);
    const PointCloud b = read_cloud(rows[i].cloud_b);
    const RigidTransformd gt = rows[i].gt_file.empty() ? RigidTransformd::identity() : read_transform(rows[i].gt_file);
    out.push_back(evaluate_pair(a, b, gt, params, row_cfg));
  }
  return out;
}

std::vector<PrecisionPoint> precision_manifest(const std::vector<ManifestRow>& rows, const DescriptorParams& params,
                                               const EvalConfig& cfg, const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("precision: thresholds must be ascending");
  const auto seeds = row_seeds(cfg.seed, rows.size());
  std::vector<double> errors;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Rng rng(seeds[i]);
    const DescriptorSet da = describe_cloud(read_cloud(rows[i].cloud_a), params, cfg, rng);
    const DescriptorSet db = describe_cloud(read_cloud(rows[i].cloud_b), params, cfg, rng);
    const RigidTransformd gt = rows[i].gt_file.empty() ? RigidTransformd::identity() : read_transform(rows[i].gt_file);
    const VectorXd e = match_errors(da, db, gt);
    errors.insert(errors.end(), e.data(), e.data() + e.size());
  }
  std::vector<PrecisionPoint> curve;
  for (double tau : thresholds) {
    const auto hits = std::count_if(errors.begin(), errors.end(), [tau](double e) { return e <= tau; });
    curve.push_back({tau, errors.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(errors.size())});
  }
  return curve;
}

void write_results_csv(const std::vector<EvalResult>& results, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "pair_id,rte_m,rre_deg,success,iterations,inliers\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    out << i << ',' << format_double(r.rte) << ',' << format_double(r.rre) << ',' << (r.success ? 1 : 0) << ','
        << r.iterations << ',' << r.inliers << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_precision_csv(const std::vector<PrecisionPoint>& curve, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "threshold_m,precision\n";
  for (const auto& p : curve) out << format_double(p.threshold) << ',' << format_double(p.precision) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sspd
