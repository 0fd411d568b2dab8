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

#include "sspd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "sspd/io.hpp"

namespace sspd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_value(const std::string& v, T& out) {
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  return res.ec == std::errc() && res.ptr == v.data() + v.size();
}

bool parse_value(const std::string& v, bool& out) {
  if (v == "true" || v == "1") return out = true, true;
  if (v == "false" || v == "0") return out = false, true;
  return false;
}

bool parse_value(const std::string& v, Detector& out) {
  try {
    out = parse_detector(v);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

std::string show(double v) { return format_double(v); }
std::string show(Index v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(Detector v) { return to_string(v); }

struct Field {
  std::function<bool(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(T TrainConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { return parse_value(v, c.train.*member); },
          [member](const RunConfig& c) { return show(c.train.*member); }};
}
template <typename T>
Field field(T RansacConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { return parse_value(v, c.eval.ransac.*member); },
          [member](const RunConfig& c) { return show(c.eval.ransac.*member); }};
}
template <typename T>
Field field(T IssConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { return parse_value(v, c.eval.iss.*member); },
          [member](const RunConfig& c) { return show(c.eval.iss.*member); }};
}
template <typename T>
Field field(T EvalConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { return parse_value(v, c.eval.*member); },
          [member](const RunConfig& c) { return show(c.eval.*member); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table{
      {"sigma_r", field(&TrainConfig::sigma_r)},
      {"sigma_p", field(&TrainConfig::sigma_p)},
      {"alpha", field(&TrainConfig::alpha)},
      {"batch_size", field(&TrainConfig::batch_size)},
      {"lr", field(&TrainConfig::lr)},
      {"iterations", field(&TrainConfig::iterations)},
      {"k", field(&TrainConfig::k)},
      {"c", field(&TrainConfig::c)},
      {"r_cluster", field(&TrainConfig::r_cluster)},
      {"subsample", field(&TrainConfig::subsample)},
      {"seed", field(&TrainConfig::seed)},
      {"checkpoint_every", field(&TrainConfig::checkpoint_every)},
      {"descriptor_dim", field(&TrainConfig::descriptor_dim)},
      {"shared_centers", field(&TrainConfig::shared_centers)},
      {"detach_orientation", field(&TrainConfig::detach_orientation)},
      {"max_skip_fraction", field(&TrainConfig::max_skip_fraction)},
      {"ransac.max_iterations", field(&RansacConfig::max_iterations)},
      {"ransac.confidence", field(&RansacConfig::confidence)},
      {"ransac.inlier_threshold", field(&RansacConfig::inlier_threshold)},
      {"ransac.sample_size", field(&RansacConfig::sample_size)},
      {"iss.salient_radius", field(&IssConfig::salient_radius)},
      {"iss.nms_radius", field(&IssConfig::nms_radius)},
      {"iss.gamma21", field(&IssConfig::gamma21)},
      {"iss.gamma32", field(&IssConfig::gamma32)},
      {"iss.min_neighbors", field(&IssConfig::min_neighbors)},
      {"iss.min_flatness_ratio", field(&IssConfig::min_flatness_ratio)},
      {"iss.max_keypoints", field(&IssConfig::max_keypoints)},
      {"eval.detector", field(&EvalConfig::detector)},
      {"eval.fps_keypoints", field(&EvalConfig::fps_keypoints)},
      {"eval.seed", field(&EvalConfig::seed)},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    if (!it->second.set(cfg, value)) throw ConfigError(where + "bad value '" + value + "' for " + key);
  }
  cfg.eval.r_cluster = cfg.train.r_cluster;
  cfg.eval.c = cfg.train.c;
  cfg.train.validate();
  cfg.eval.ransac.validate();
  cfg.eval.iss.validate();
  if (cfg.eval.fps_keypoints < 3) throw ConfigError(source + ": eval.fps_keypoints must be >= 3");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace sspd
