#pragma once

// Checkpoint container: "UPCK" magic, format version, tensor count, then per
// tensor a name, row/column counts, and raw little-endian float64
// coefficients in column-major order. A text sidecar <file>.meta records the
// seed, step count, and config hash.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "uparse/autodiff.hpp"
#include "uparse/errors.hpp"

namespace uparse {

constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  std::string config_hash;
  std::string version;
  std::map<std::string, std::string> extra;
};

namespace detail {

template <class T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_raw(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("checkpoint: truncated file");
}

}  // namespace detail

template <class Scalar>
void save_checkpoint(const ad::ParamStoreT<Scalar>& params,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os.write("UPCK", 4);
  detail::write_raw(os, kCheckpointVersion);
  std::uint64_t count = params.size();
  detail::write_raw(os, count);
  for (const auto* p : params.all()) {
    std::uint32_t name_len = static_cast<std::uint32_t>(p->name.size());
    detail::write_raw(os, name_len);
    os.write(p->name.data(), name_len);
    std::uint64_t rows = static_cast<std::uint64_t>(p->value.rows());
    std::uint64_t cols = static_cast<std::uint64_t>(p->value.cols());
    detail::write_raw(os, rows);
    detail::write_raw(os, cols);
    for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
      for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
        double v = static_cast<double>(p->value(r, c));
        detail::write_raw(os, v);
      }
    }
  }
  if (!os) throw DataError("checkpoint write failed: " + path);
}

// Loads tensors in file order into a fresh store (gradients zeroed).
template <class Scalar>
ad::ParamStoreT<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "UPCK", 4) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0;
  detail::read_raw(is, version);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint64_t count = 0;
  detail::read_raw(is, count);
  ad::ParamStoreT<Scalar> store(0);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    detail::read_raw(is, name_len);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw DataError("checkpoint: truncated name");
    std::uint64_t rows = 0, cols = 0;
    detail::read_raw(is, rows);
    detail::read_raw(is, cols);
    ad::Mat<Scalar> value(static_cast<Eigen::Index>(rows),
                          static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < value.cols(); ++c) {
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        double v = 0;
        detail::read_raw(is, v);
        value(r, c) = static_cast<Scalar>(v);
      }
    }
    store.add_value(name, std::move(value));
  }
  return store;
}

void save_checkpoint_meta(const CheckpointMeta& meta, const std::string& path);
CheckpointMeta load_checkpoint_meta(const std::string& path);

}  // namespace uparse
