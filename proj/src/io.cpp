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

#include "sspd/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace sspd {

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_number(std::string_view token, double& out) {
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

PointCloud read_ascii(const std::filesystem::path& path) {
  const std::string text = read_all(path);
  std::vector<double> xyz, inten;
  bool any_intensity = false, any_plain = false;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tokens.size() != 3 && tokens.size() != 4) throw ParseError(where + ": expected 3 or 4 values");
    double v[4];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!parse_number(tokens[i], v[i])) throw ParseError(where + ": bad number '" + std::string(tokens[i]) + "'");
      if (!std::isfinite(v[i])) throw ParseError(where + ": non-finite value");
    }
    xyz.insert(xyz.end(), v, v + 3);
    if (tokens.size() == 4) {
      any_intensity = true;
      inten.push_back(v[3]);
    } else {
      any_plain = true;
      inten.push_back(0.0);
    }
  }
  if (xyz.empty()) throw EmptyCloud(path.string());
  if (any_intensity && any_plain) throw ParseError(path.string() + ": intensity present on some lines only");
  PointCloud cloud;
  cloud.points = Eigen::Map<const Points3d>(xyz.data(), static_cast<Index>(xyz.size() / 3), 3);
  if (any_intensity) cloud.intensity = Eigen::Map<const VectorXd>(inten.data(), static_cast<Index>(inten.size()));
  return cloud;
}

float le_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

PointCloud read_kitti(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() % 16 != 0)
    throw ParseError(path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of 16 bytes");
  const Index n = static_cast<Index>(bytes.size() / 16);
  if (n == 0) throw EmptyCloud(path.string());
  PointCloud cloud;
  cloud.points.resize(n, 3);
  cloud.intensity = VectorXd(n);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < 4; ++k) {
      const double v = le_f32(data + 16 * i + 4 * k);
      if (!std::isfinite(v))
        throw ParseError(path.string() + ": non-finite value at byte offset " + std::to_string(16 * i + 4 * k));
      if (k < 3)
        cloud.points(i, k) = v;
      else
        (*cloud.intensity)(i) = v;
    }
  }
  return cloud;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CloudFileFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? CloudFileFormat::kitti_bin : CloudFileFormat::ascii_xyz;
}

PointCloud read_cloud(const std::filesystem::path& path, CloudFileFormat format) {
  return format == CloudFileFormat::kitti_bin ? read_kitti(path) : read_ascii(path);
}

PointCloud read_cloud(const std::filesystem::path& path) { return read_cloud(path, format_for(path)); }

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFileFormat format) {
  auto out = open_out(path);
  if (format == CloudFileFormat::kitti_bin) {
    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(cloud.size()) * 16);
    for (Index i = 0; i < cloud.size(); ++i) {
      for (int k = 0; k < 4; ++k) {
        const float f = static_cast<float>(k < 3 ? cloud.points(i, k) : (cloud.intensity ? (*cloud.intensity)(i) : 0.0));
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
      }
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    std::string text;
    char buf[128];
    for (Index i = 0; i < cloud.size(); ++i) {
      int n = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", cloud.points(i, 0), cloud.points(i, 1),
                            cloud.points(i, 2));
      text.append(buf, static_cast<std::size_t>(n));
      if (cloud.intensity) {
        n = std::snprintf(buf, sizeof buf, " %.17g", (*cloud.intensity)(i));
        text.append(buf, static_cast<std::size_t>(n));
      }
      text.push_back('\n');
    }
    out << text;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_cloud(cloud, path, format_for(path));
}

RigidTransformd read_transform(const std::filesystem::path& path) {
  std::string text = read_all(path);
  const auto tokens = split_ws(text);
  if (tokens.size() != 12)
    throw ParseError(path.string() + ": expected 12 numbers, found " + std::to_string(tokens.size()));
  double v[12];
  for (int i = 0; i < 12; ++i)
    if (!parse_number(tokens[static_cast<std::size_t>(i)], v[i]) || !std::isfinite(v[i]))
      throw ParseError(path.string() + ": bad number at position " + std::to_string(i + 1));
  RigidTransformd tf;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) tf.rotation(r, c) = v[4 * r + c];
    tf.translation(r) = v[4 * r + 3];
  }
  if (!tf.is_valid(1e-6)) throw ParseError(path.string() + ": rotation block is not a proper rotation");
  return tf;
}

void write_transform(const RigidTransformd& tf, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (int r = 0; r < 3; ++r)
    out << format_double(tf.rotation(r, 0)) << ' ' << format_double(tf.rotation(r, 1)) << ' '
        << format_double(tf.rotation(r, 2)) << ' ' << format_double(tf.translation(r)) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_transform(const RigidTransformd& tf) {
  std::string s;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s += format_double(tf.rotation(r, c)) + ' ';
  s += format_double(tf.translation(0)) + ' ' + format_double(tf.translation(1)) + ' ' +
       format_double(tf.translation(2));
  return s;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_all(path));
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (line_no == 1 && t == "cloud_a,cloud_b,gt_file") continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected cloud_a,cloud_b,gt_file");
    rows.push_back({resolve(fields[0]), resolve(fields[1]), fields[2].empty() ? std::filesystem::path{} : resolve(fields[2])});
  }
  return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "cloud_a,cloud_b,gt_file\n";
  for (const auto& r : rows) out << r.cloud_a.string() << ',' << r.cloud_b.string() << ',' << r.gt_file.string() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sspd
