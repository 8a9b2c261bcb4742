#pragma once

#include "llmfew/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace llmfew {

// Weight array file: the bytes "LFWA", uint32 format version (1), uint32
// rank, rank × uint64 dimensions, then the elements as float32 in row-major
// order. All integers and floats are little-endian.
struct FloatArray {
  std::vector<std::uint64_t> shape;
  std::vector<float> data;
};

void write_array(const std::filesystem::path& path, const FloatArray& array);
FloatArray read_array(const std::filesystem::path& path);

template <typename T>
FloatArray to_float_array(const Matrix<T>& m) {
  FloatArray out;
  out.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  out.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) out.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  return out;
}

// Vectors saved as rank-1 arrays load back as 1×n matrices.
template <typename T>
Matrix<T> to_matrix(const FloatArray& a) {
  Eigen::Index rows = 1, cols = 1;
  if (a.shape.size() == 1) {
    cols = static_cast<Eigen::Index>(a.shape[0]);
  } else if (a.shape.size() == 2) {
    rows = static_cast<Eigen::Index>(a.shape[0]);
    cols = static_cast<Eigen::Index>(a.shape[1]);
  }
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(a.data[static_cast<std::size_t>(i)]);
  return m;
}

// `meta` files: one "key value" pair per line; '#' starts a comment.
using MetaMap = std::map<std::string, std::string>;
void write_meta(const std::filesystem::path& path, const MetaMap& meta);
MetaMap read_meta(const std::filesystem::path& path);

// One array file per parameter, named "<parameter name>.bin".
template <typename T>
void save_parameters(const std::filesystem::path& dir, const ParameterRefs<T>& params);

}  // namespace llmfew
