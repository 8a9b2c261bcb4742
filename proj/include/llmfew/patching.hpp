#pragma once

#include "llmfew/tensor.hpp"

#include <cstddef>
#include <vector>

namespace llmfew {

// Per-channel patch sequences of one instance, shape (M, P, N_P).
// Each channel is end-padded with S copies of its last value before
// patching, and patch j reads padded positions [jS, jS + P).
class PatchArray {
 public:
  PatchArray(std::size_t dims, std::size_t patch_len, std::size_t stride,
             std::size_t source_len);

  std::size_t dims() const { return dims_; }
  std::size_t patch_len() const { return patch_len_; }
  std::size_t stride() const { return stride_; }
  std::size_t source_len() const { return source_len_; }
  std::size_t num_patches() const { return num_patches_; }

  double& at(std::size_t channel, std::size_t offset, std::size_t patch) {
    return data_[(channel * patch_len_ + offset) * num_patches_ + patch];
  }
  double at(std::size_t channel, std::size_t offset, std::size_t patch) const {
    return data_[(channel * patch_len_ + offset) * num_patches_ + patch];
  }

  // Token matrix (N_P × M·P): row j holds patch j of every channel,
  // channel-major (feature m·P + p).
  Matrix<double> tokens() const;

 private:
  std::size_t dims_;
  std::size_t patch_len_;
  std::size_t stride_;
  std::size_t source_len_;
  std::size_t num_patches_;
  std::vector<double> data_;
};

// ⌊(L − P)/S⌋ + 2. Requires P ≤ L and S ≤ P.
std::size_t num_patches(std::size_t length, std::size_t patch_len, std::size_t stride);

// `values` is M × L.
PatchArray patch(const Matrix<double>& values, std::size_t patch_len, std::size_t stride);

inline std::size_t default_stride(std::size_t patch_len) {
  return patch_len / 2 == 0 ? 1 : patch_len / 2;
}

}  // namespace llmfew
