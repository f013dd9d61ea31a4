// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include <Eigen/Core>

#include "caddto/nn/mlp.hpp"

namespace caddto::nn {

// Layout, all integers u32 little-endian, all reals float32 little-endian:
//
//   offset  size  field
//   0       8     magic "CADTO01\0"
//   8       4     version (1)
//   12      4     layer count L
//   16      4     log_std length S (0 when absent)
//   20      4     trunk parameter count P
//   24      4     reserved, zero
//   28      8L    per-layer (in, out) pairs
//   ...     4P    weights of each layer (row-major, out x in), then biases of each layer
//   ...     4S    log_std
//   end-4   4     CRC32 of every preceding byte
//
// File size is therefore 32 + 8L + 4(P + S).

inline constexpr std::array<char, 8> kCheckpointMagic{'C', 'A', 'D', 'T', 'O', '0', '1', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 28;
inline constexpr std::size_t kCheckpointFixedBytes = kCheckpointHeaderBytes + 4;

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Mlp<double> net;
  std::optional<Eigen::VectorXd> log_std;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_f32(std::vector<unsigned char>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline double get_f32(const unsigned char* p) { return static_cast<double>(std::bit_cast<float>(get_u32(p))); }

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Mlp<double>& net, const Eigen::VectorXd* log_std = nullptr) {
  std::vector<unsigned char> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  const auto layers = static_cast<std::uint32_t>(net.num_layers());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, layers);
  detail::put_u32(out, log_std ? static_cast<std::uint32_t>(log_std->size()) : 0u);
  detail::put_u32(out, static_cast<std::uint32_t>(net.parameter_count()));
  detail::put_u32(out, 0u);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    detail::put_u32(out, static_cast<std::uint32_t>(net.weights()[l].cols()));
    detail::put_u32(out, static_cast<std::uint32_t>(net.weights()[l].rows()));
  }
  for (const auto& w : net.weights()) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) detail::put_f32(out, w(i, j));
    }
  }
  for (const auto& b : net.biases()) {
    for (Eigen::Index i = 0; i < b.size(); ++i) detail::put_f32(out, b[i]);
  }
  if (log_std) {
    for (Eigen::Index i = 0; i < log_std->size(); ++i) detail::put_f32(out, (*log_std)[i]);
  }
  detail::put_u32(out, detail::crc32_of(out.data(), out.size()));
  return out;
}

/// Fully validates before building anything; a bad file never yields a
/// partially populated network.
inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kCheckpointFixedBytes) throw CheckpointError("checkpoint truncated: checksum mismatch");
  const std::size_t body = bytes.size() - 4;
  if (detail::crc32_of(bytes.data(), body) != detail::get_u32(bytes.data() + body)) {
    throw CheckpointError("checkpoint checksum mismatch");
  }
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw CheckpointError("checkpoint magic mismatch");
  }
  const std::uint32_t version = detail::get_u32(bytes.data() + 8);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t layers = detail::get_u32(bytes.data() + 12);
  const std::uint32_t log_std_len = detail::get_u32(bytes.data() + 16);
  const std::uint32_t params = detail::get_u32(bytes.data() + 20);
  if (layers == 0) throw CheckpointError("checkpoint has no layers");

  std::size_t pos = kCheckpointHeaderBytes;
  if (pos + 8ull * layers > body) throw CheckpointError("checkpoint layer table truncated");
  std::vector<int> dims;
  std::uint64_t counted = 0;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t in = detail::get_u32(bytes.data() + pos);
    const std::uint32_t out = detail::get_u32(bytes.data() + pos + 4);
    pos += 8;
    if (in == 0 || out == 0) throw CheckpointError("checkpoint has an empty layer");
    if (l == 0) dims.push_back(static_cast<int>(in));
    if (static_cast<int>(in) != dims.back()) throw CheckpointError("checkpoint layer dims are not chained");
    dims.push_back(static_cast<int>(out));
    counted += static_cast<std::uint64_t>(in) * out + out;
  }
  if (counted != params) throw CheckpointError("checkpoint parameter count mismatch");
  if (pos + 4ull * (params + log_std_len) != body) throw CheckpointError("checkpoint size mismatch");

  Checkpoint ck{Mlp<double>(dims), std::nullopt};
  for (auto& w : ck.net.weights()) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j, pos += 4) w(i, j) = detail::get_f32(bytes.data() + pos);
    }
  }
  for (auto& b : ck.net.biases()) {
    for (Eigen::Index i = 0; i < b.size(); ++i, pos += 4) b[i] = detail::get_f32(bytes.data() + pos);
  }
  if (log_std_len > 0) {
    Eigen::VectorXd ls(log_std_len);
    for (Eigen::Index i = 0; i < ls.size(); ++i, pos += 4) ls[i] = detail::get_f32(bytes.data() + pos);
    ck.log_std = std::move(ls);
  }
  return ck;
}

inline void save_checkpoint(const Mlp<double>& net, const std::string& path, const Eigen::VectorXd* log_std = nullptr) {
  const auto bytes = encode_checkpoint(net, log_std);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace caddto::nn
