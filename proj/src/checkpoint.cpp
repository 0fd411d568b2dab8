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

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sspd/descriptor_net.hpp"

namespace sspd {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'P', 'D'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::string& buffer() const { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const DescriptorParams& params, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.descriptor_dim()));
  w.u32(static_cast<std::uint32_t>(params.tensors().size()));
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    const std::string& name = params.names()[i];
    const ad::Tensor& t = params.tensors()[i];
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.shape().size()));
    for (Index d : t.shape()) w.u64(static_cast<std::uint64_t>(d));
    for (Index k = 0; k < t.size(); ++k) w.f64(t.data().data()[k]);  // row-major storage
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError("write failed for " + path.string());
}

DescriptorParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  if (r.bytes(4) != std::string(kMagic, 4)) throw FormatError("bad magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  const std::uint32_t count = r.u32();

  std::vector<std::string> names;
  std::vector<ad::Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    names.push_back(r.bytes(r.u32()));
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 2) throw ShapeError("tensor " + names.back() + " has rank " + std::to_string(rank));
    std::vector<Index> shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint64_t v = r.u64();
      if (v == 0 || v > (1ull << 32)) throw ShapeError("tensor " + names.back() + " has dimension " + std::to_string(v));
      shape.push_back(static_cast<Index>(v));
    }
    const Index rows = rank == 2 ? shape[0] : 1;
    const Index cols = rank == 2 ? shape[1] : shape[0];
    ad::Matrix data(rows, cols);
    for (Index k = 0; k < data.size(); ++k) data.data()[k] = r.f64();
    tensors.emplace_back(std::move(shape), std::move(data));
  }
  if (!r.at_end()) throw FormatError("trailing bytes in " + path.string());
  DescriptorParams params = DescriptorParams::from_tensors(std::move(names), std::move(tensors));
  if (params.descriptor_dim() != static_cast<Index>(dim))
    throw ShapeError("header descriptor_dim " + std::to_string(dim) + " does not match network output " +
                     std::to_string(params.descriptor_dim()));
  return params;
}

DescriptorParams load_checkpoint(const std::filesystem::path& path, Index expected_descriptor_dim) {
  DescriptorParams params = load_checkpoint(path);
  if (params.descriptor_dim() != expected_descriptor_dim)
    throw ShapeError("checkpoint descriptor_dim " + std::to_string(params.descriptor_dim()) + ", expected " +
                     std::to_string(expected_descriptor_dim));
  return params;
}

}  // namespace sspd
