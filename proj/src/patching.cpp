#include "llmfew/patching.hpp"

#include "llmfew/errors.hpp"

#include <algorithm>
#include <string>

namespace llmfew {

std::size_t num_patches(std::size_t length, std::size_t patch_len, std::size_t stride) {
  if (length == 0 || patch_len == 0 || stride == 0) {
    throw ArgumentError("length, patch length and stride must be positive");
  }
  if (patch_len > length) {
    throw ArgumentError("patch length " + std::to_string(patch_len) + " exceeds series length " +
                        std::to_string(length));
  }
  if (stride > patch_len) {
    throw ArgumentError("stride " + std::to_string(stride) + " exceeds patch length " +
                        std::to_string(patch_len));
  }
  return (length - patch_len) / stride + 2;
}

PatchArray::PatchArray(std::size_t dims, std::size_t patch_len, std::size_t stride,
                       std::size_t source_len)
    : dims_(dims),
      patch_len_(patch_len),
      stride_(stride),
      source_len_(source_len),
      num_patches_(llmfew::num_patches(source_len, patch_len, stride)),
      data_(dims * patch_len * num_patches_, 0.0) {}

Matrix<double> PatchArray::tokens() const {
  Matrix<double> out(static_cast<Eigen::Index>(num_patches_),
                     static_cast<Eigen::Index>(dims_ * patch_len_));
  for (std::size_t j = 0; j < num_patches_; ++j) {
    for (std::size_t m = 0; m < dims_; ++m) {
      for (std::size_t p = 0; p < patch_len_; ++p) {
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m * patch_len_ + p)) =
            at(m, p, j);
      }
    }
  }
  return out;
}

PatchArray patch(const Matrix<double>& values, std::size_t patch_len, std::size_t stride) {
  const auto dims = static_cast<std::size_t>(values.rows());
  const auto length = static_cast<std::size_t>(values.cols());
  PatchArray out(dims, patch_len, stride, length);
  for (std::size_t m = 0; m < dims; ++m) {
    const auto row = static_cast<Eigen::Index>(m);
    for (std::size_t j = 0; j < out.num_patches(); ++j) {
      for (std::size_t p = 0; p < patch_len; ++p) {
        // Positions at or past L read the padded copy of the last value.
        const auto t = std::min(j * stride + p, length - 1);
        out.at(m, p, j) = values(row, static_cast<Eigen::Index>(t));
      }
    }
  }
  return out;
}

}  // namespace llmfew
