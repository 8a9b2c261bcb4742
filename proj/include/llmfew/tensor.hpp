#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace llmfew {

// Sequences are stored position-major: one row per time step / token, one
// column per channel / feature.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// A named weight with its gradient accumulator. Vectors (biases, norm
// scales) are stored as 1×n matrices.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {
    grad = Matrix<T>::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

template <typename T>
using ParameterRefs = std::vector<Parameter<T>*>;

template <typename T>
std::size_t count_parameters(const ParameterRefs<T>& params, bool trainable_only) {
  std::size_t total = 0;
  for (const auto* p : params) {
    if (!trainable_only || p->trainable) total += p->size();
  }
  return total;
}

}  // namespace llmfew
