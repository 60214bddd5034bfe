#pragma once

#include "omni/nn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace omni::nn {

/// Named fp64 array, stored row-major.
struct Blob {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> values;
};

/// Versioned container: header, free-form metadata text, then named blobs.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::string metadata;
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const;
};

/// Little-endian layout:
///   "OMNICKPT" | u32 version | u32 len, metadata | u32 count |
///   count x (u32 len, name | u32 ndim | ndim x i64 dim | f64 values...)
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

template <typename Scalar>
Blob to_blob(const Parameter<Scalar>& p) {
  Blob b{p.name, {p.value.rows(), p.value.cols()}, {}};
  b.values.reserve(static_cast<std::size_t>(p.value.size()));
  for (Index r = 0; r < p.value.rows(); ++r) {
    for (Index c = 0; c < p.value.cols(); ++c) b.values.push_back(static_cast<double>(p.value(r, c)));
  }
  return b;
}

template <typename Scalar>
void from_blob(const Blob& b, Parameter<Scalar>& p) {
  if (b.shape.size() != 2 || b.shape[0] != p.value.rows() || b.shape[1] != p.value.cols()) {
    throw ShapeError("checkpoint blob '" + b.name + "' has the wrong shape");
  }
  std::size_t i = 0;
  for (Index r = 0; r < p.value.rows(); ++r) {
    for (Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = static_cast<Scalar>(b.values[i++]);
  }
}

}  // namespace omni::nn
