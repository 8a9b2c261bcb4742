#pragma once

// Building blocks shared by the encoder, backbone and head. Every layer is
// applied to a position-major sequence (rows = positions). forward() is
// const and writes what backward() needs into a caller-owned cache, so one
// set of parameters can serve concurrent evaluations.

#include "llmfew/rng.hpp"
#include "llmfew/tensor.hpp"

#include <string>

namespace llmfew {

// Row-wise affine map y = x Wᵀ + b with W stored (out × in).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features, bool with_bias = true);

  // Uniform(−1/√fan_in, 1/√fan_in) weights, zero bias.
  void init_uniform(Rng& rng);

  Matrix<T> forward(const Matrix<T>& x) const;
  // Accumulates parameter gradients; returns ∂L/∂x.
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& grad_out);

  void collect(ParameterRefs<T>& out);
  void set_trainable(bool trainable);

  int in_features() const { return static_cast<int>(weight.value.cols()); }
  int out_features() const { return static_cast<int>(weight.value.rows()); }

  Parameter<T> weight;
  Parameter<T> bias;
  bool has_bias = true;
};

// Normalizes each row over its features, then applies scale and shift.
template <typename T>
class LayerNorm {
 public:
  struct Cache {
    Matrix<T> normalized;
    Vector<T> inv_std;
  };

  LayerNorm() = default;
  LayerNorm(std::string name, int features, T eps = T(1e-5));

  Matrix<T> forward(const Matrix<T>& x, Cache* cache = nullptr) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& grad_out);

  void collect(ParameterRefs<T>& out);
  void set_trainable(bool trainable);

  Parameter<T> scale;
  Parameter<T> shift;
  T eps = T(1e-5);
};

// tanh approximation used by GPT-2.
template <typename T>
Matrix<T> gelu(const Matrix<T>& x);
template <typename T>
Matrix<T> gelu_backward(const Matrix<T>& x, const Matrix<T>& grad_out);

template <typename T>
Matrix<T> leaky_relu(const Matrix<T>& x, T negative_slope);
template <typename T>
Matrix<T> leaky_relu_backward(const Matrix<T>& x, const Matrix<T>& grad_out, T negative_slope);

// Numerically stable softmax of a single vector.
template <typename T>
Vector<T> softmax(const Vector<T>& logits);

}  // namespace llmfew
