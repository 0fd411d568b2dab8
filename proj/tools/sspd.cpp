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

// Command-line front end: train, register, evaluate, precision, keypoints,
// synth, gradcheck.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "sspd/config.hpp"
#include "sspd/gradcheck_suite.hpp"
#include "sspd/io.hpp"
#include "sspd/registration_eval.hpp"
#include "sspd/synth.hpp"
#include "sspd/trainer.hpp"

namespace fs = std::filesystem;
using namespace sspd;

namespace {

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? parse_run_config("") : load_run_config(path);
}

std::vector<fs::path> cloud_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".xyz" || ext == ".txt" || ext == ".bin")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no .xyz, .txt or .bin clouds in " + dir.string());
  return out;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v > 0.0)) throw ConfigError("bad threshold '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("no thresholds given");
  return out;
}

void print_transform(const RigidTransformd& tf) {
  const auto& r = tf.rotation;
  std::cout << format_double(r(0, 0)) << ' ' << format_double(r(0, 1)) << ' ' << format_double(r(0, 2)) << ' '
            << format_double(r(1, 0)) << ' ' << format_double(r(1, 1)) << ' ' << format_double(r(1, 2)) << ' '
            << format_double(r(2, 0)) << ' ' << format_double(r(2, 1)) << ' ' << format_double(r(2, 2)) << '\n'
            << format_double(tf.translation(0)) << ' ' << format_double(tf.translation(1)) << ' '
            << format_double(tf.translation(2)) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep large activation buffers in the heap instead of mapping and
  // unmapping them on every graph.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Self-supervised point cloud descriptors and registration"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, log_path, ckpt, cloud_a, cloud_b, gt_path, detector, pairs,
      thresholds = "0.25,0.5,1,2", cloud, kind = "corner_room";
  Index n_points = 4096;
  double extent = 50.0, tolerance = 1e-4;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "Train a descriptor network on a directory of clouds");
  train->add_option("--config", config_path, "key=value run configuration")->required();
  train->add_option("--data", data_dir, "Directory of .xyz/.txt/.bin clouds")->required();
  train->add_option("--out", out_path, "Checkpoint to write")->required();
  train->add_option("--log", log_path, "Training log CSV (default <out stem>_log.csv)");

  auto* reg = app.add_subcommand("register", "Register one cloud pair; prints R (9 values) and t (3 values)");
  reg->add_option("--ckpt", ckpt)->required();
  reg->add_option("--cloud-a", cloud_a)->required();
  reg->add_option("--cloud-b", cloud_b)->required();
  reg->add_option("--gt", gt_path, "Ground-truth transform file");
  reg->add_option("--detector", detector, "iss or fps")->required();
  reg->add_option("--out", out_path, "Results CSV")->required();
  reg->add_option("--config", config_path);

  auto* evaluate = app.add_subcommand("evaluate", "Batch registration over a manifest");
  evaluate->add_option("--ckpt", ckpt)->required();
  evaluate->add_option("--pairs", pairs, "Manifest CSV cloud_a,cloud_b,gt_file")->required();
  evaluate->add_option("--out", out_path)->required();
  evaluate->add_option("--detector", detector, "iss or fps (overrides the config)");
  evaluate->add_option("--config", config_path);

  auto* precision = app.add_subcommand("precision", "Nearest-descriptor precision curve over a manifest");
  precision->add_option("--ckpt", ckpt)->required();
  precision->add_option("--pairs", pairs)->required();
  precision->add_option("--thresholds", thresholds, "Ascending, comma separated (meters)");
  precision->add_option("--out", out_path)->required();
  precision->add_option("--detector", detector, "iss or fps (overrides the config)");
  precision->add_option("--config", config_path);

  auto* keypoints = app.add_subcommand("keypoints", "Dump detected keypoints as CSV");
  keypoints->add_option("--cloud", cloud)->required();
  keypoints->add_option("--detector", detector, "iss or fps")->required();
  keypoints->add_option("--out", out_path)->required();
  keypoints->add_option("--config", config_path);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  synth->add_option("--kind", kind, "corner_room, cube_field or random_blobs");
  synth->add_option("--n", n_points, "Number of points");
  synth->add_option("--extent", extent, "Scene span in meters");
  synth->add_option("--seed", seed);
  synth->add_option("--out", out_path)->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--tolerance", tolerance);
  gradcheck->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*train) {
      const RunConfig cfg = load_run_config(config_path);
      const auto files = cloud_files(data_dir);
      const fs::path out(out_path);
      fs::path log = log_path;
      if (log.empty()) log = out.parent_path() / (out.stem().string() + "_log.csv");
      const TrainOutput result = sspd::train(files, cfg.train, out, log);
      if (result.log.empty()) {
        std::printf("0 iterations: wrote the initial parameters\n");
      } else {
        std::printf("trained %lld iterations on %zu clouds: loss %.6g -> %.6g, %lld skipped\n",
                    static_cast<long long>(result.log.back().iter), files.size(), result.log.front().loss,
                    result.log.back().loss, static_cast<long long>(result.total_skipped));
      }
      return 0;
    }

    if (*reg) {
      RunConfig cfg = config_or_default(config_path);
      cfg.eval.detector = parse_detector(detector);
      const DescriptorParams params = load_checkpoint(ckpt, cfg.train.descriptor_dim);
      const PointCloud a = read_cloud(cloud_a), b = read_cloud(cloud_b);
      EvalResult result;
      if (!gt_path.empty()) {
        result = evaluate_pair(a, b, read_transform(gt_path), params, cfg.eval);
        if (!result.error.empty()) throw NoConsensus(result.error);
      } else {
        const RansacResult r = register_pair(a, b, params, cfg.eval);
        result.rte = result.rre = std::numeric_limits<double>::quiet_NaN();
        result.transform = r.transform;
        result.iterations = r.iterations;
        result.inliers = r.inliers;
      }
      print_transform(result.transform);
      write_results_csv({result}, out_path);
      return 0;
    }

    if (*evaluate) {
      RunConfig cfg = config_or_default(config_path);
      if (!detector.empty()) cfg.eval.detector = parse_detector(detector);
      const DescriptorParams params = load_checkpoint(ckpt, cfg.train.descriptor_dim);
      const auto results = evaluate_manifest(read_manifest(pairs), params, cfg.eval);
      write_results_csv(results, out_path);
      const auto ok = std::count_if(results.begin(), results.end(), [](const EvalResult& r) { return r.success; });
      std::printf("%lld/%zu pairs registered successfully\n", static_cast<long long>(ok), results.size());
      return 0;
    }

    if (*precision) {
      RunConfig cfg = config_or_default(config_path);
      if (!detector.empty()) cfg.eval.detector = parse_detector(detector);
      const auto taus = parse_thresholds(thresholds);
      const DescriptorParams params = load_checkpoint(ckpt, cfg.train.descriptor_dim);
      const auto curve = precision_manifest(read_manifest(pairs), params, cfg.eval, taus);
      write_precision_csv(curve, out_path);
      for (const auto& p : curve) std::printf("%g m: %.4f\n", p.threshold, p.precision);
      return 0;
    }

    if (*keypoints) {
      RunConfig cfg = config_or_default(config_path);
      cfg.eval.detector = parse_detector(detector);
      const PointCloud c = read_cloud(cloud);
      Rng rng(cfg.eval.seed);
      const auto idx = detect_keypoints(c, cfg.eval, rng);
      std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open " + out_path);
      out << "index,x,y,z\n";
      for (Index i : idx)
        out << i << ',' << format_double(c.points(i, 0)) << ',' << format_double(c.points(i, 1)) << ','
            << format_double(c.points(i, 2)) << '\n';
      if (!out) throw IoError("write failed for " + out_path);
      std::printf("%zu keypoints\n", idx.size());
      return 0;
    }

    if (*synth) {
      Rng rng(seed);
      write_cloud(synth_scene(parse_scene_kind(kind), n_points, extent, rng), out_path);
      return 0;
    }

    if (*gradcheck) {
      const auto suite = run_gradcheck_suite(tolerance, seed);
      for (const auto& c : suite.cases)
        std::printf("%-28s %.3e %s\n", c.name.c_str(), c.max_rel_error, c.passed ? "ok" : "FAIL");
      std::printf("%s in %.2f s\n", suite.passed() ? "all passed" : "FAILED", suite.seconds);
      if (!suite.passed()) {
        std::cerr << "ERROR: gradient check failed\n";
        return 1;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "ERROR: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
