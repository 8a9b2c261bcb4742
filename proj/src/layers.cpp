#include "llmfew/layers.hpp"

#include <cmath>
#include <numbers>

namespace llmfew {

template <typename T>
Linear<T>::Linear(std::string name, int in_features, int out_features, bool with_bias)
    : weight(name + ".weight", Matrix<T>::Zero(out_features, in_features)),
      bias(name + ".bias", Matrix<T>::Zero(1, with_bias ? out_features : 0)),
      has_bias(with_bias) {}

template <typename T>
void Linear<T>::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(weight.value.cols()));
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) {
    weight.value.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
  bias.value.setZero();
}

template <typename T>
Matrix<T> Linear<T>::forward(const Matrix<T>& x) const {
  Matrix<T> y = x * weight.value.transpose();
  if (has_bias) y.rowwise() += bias.value.row(0);
  return y;
}

template <typename T>
Matrix<T> Linear<T>::backward(const Matrix<T>& x, const Matrix<T>& grad_out) {
  if (weight.trainable) weight.grad.noalias() += grad_out.transpose() * x;
  if (has_bias && bias.trainable) bias.grad.row(0) += grad_out.colwise().sum();
  return grad_out * weight.value;
}

template <typename T>
void Linear<T>::collect(ParameterRefs<T>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

template <typename T>
void Linear<T>::set_trainable(bool trainable) {
  weight.trainable = trainable;
  bias.trainable = trainable;
}

template <typename T>
LayerNorm<T>::LayerNorm(std::string name, int features, T eps_)
    : scale(name + ".weight", Matrix<T>::Ones(1, features)),
      shift(name + ".bias", Matrix<T>::Zero(1, features)),
      eps(eps_) {}

template <typename T>
Matrix<T> LayerNorm<T>::forward(const Matrix<T>& x, Cache* cache) const {
  const auto n = static_cast<T>(x.cols());
  Matrix<T> normalized(x.rows(), x.cols());
  Vector<T> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).sum() / n;
    const auto centered = x.row(r).array() - mean;
    const T var = centered.square().sum() / n;
    inv_std(r) = T(1) / std::sqrt(var + eps);
    normalized.row(r) = centered * inv_std(r);
  }
  Matrix<T> y = (normalized.array().rowwise() * scale.value.row(0).array()).matrix();
  y.rowwise() += shift.value.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Matrix<T> LayerNorm<T>::backward(const Cache& cache, const Matrix<T>& grad_out) {
  const auto& xhat = cache.normalized;
  if (scale.trainable) scale.grad.row(0) += (grad_out.array() * xhat.array()).colwise().sum().matrix();
  if (shift.trainable) shift.grad.row(0) += grad_out.colwise().sum();

  const auto n = static_cast<T>(xhat.cols());
  Matrix<T> grad_hat = (grad_out.array().rowwise() * scale.value.row(0).array()).matrix();
  Matrix<T> grad_in(xhat.rows(), xhat.cols());
  for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
    const T mean_g = grad_hat.row(r).sum() / n;
    const T mean_gx = grad_hat.row(r).dot(xhat.row(r)) / n;
    grad_in.row(r) =
        (grad_hat.row(r).array() - mean_g - xhat.row(r).array() * mean_gx) * cache.inv_std(r);
  }
  return grad_in;
}

template <typename T>
void LayerNorm<T>::collect(ParameterRefs<T>& out) {
  out.push_back(&scale);
  out.push_back(&shift);
}

template <typename T>
void LayerNorm<T>::set_trainable(bool trainable) {
  scale.trainable = trainable;
  shift.trainable = trainable;
}

namespace {
template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // √(2/π)
}

template <typename T>
Matrix<T> gelu(const Matrix<T>& x) {
  return x.unaryExpr([](T v) {
    const T inner = kGeluC<T> * (v + T(0.044715) * v * v * v);
    return T(0.5) * v * (T(1) + std::tanh(inner));
  });
}

template <typename T>
Matrix<T> gelu_backward(const Matrix<T>& x, const Matrix<T>& grad_out) {
  return x.binaryExpr(grad_out, [](T v, T g) {
    const T inner = kGeluC<T> * (v + T(0.044715) * v * v * v);
    const T th = std::tanh(inner);
    const T sech2 = T(1) - th * th;
    const T d_inner = kGeluC<T> * (T(1) + T(3) * T(0.044715) * v * v);
    return g * (T(0.5) * (T(1) + th) + T(0.5) * v * sech2 * d_inner);
  });
}

template <typename T>
Matrix<T> leaky_relu(const Matrix<T>& x, T negative_slope) {
  return x.unaryExpr([negative_slope](T v) { return v > T(0) ? v : negative_slope * v; });
}

template <typename T>
Matrix<T> leaky_relu_backward(const Matrix<T>& x, const Matrix<T>& grad_out, T negative_slope) {
  return x.binaryExpr(grad_out,
                      [negative_slope](T v, T g) { return v > T(0) ? g : negative_slope * g; });
}

template <typename T>
Vector<T> softmax(const Vector<T>& logits) {
  const T peak = logits.maxCoeff();
  Vector<T> e = (logits.array() - peak).exp().matrix();
  return e / e.sum();
}

#define LLMFEW_INSTANTIATE(T)                                                              \
  template class Linear<T>;                                                                \
  template class LayerNorm<T>;                                                             \
  template Matrix<T> gelu<T>(const Matrix<T>&);                                            \
  template Matrix<T> gelu_backward<T>(const Matrix<T>&, const Matrix<T>&);                 \
  template Matrix<T> leaky_relu<T>(const Matrix<T>&, T);                                   \
  template Matrix<T> leaky_relu_backward<T>(const Matrix<T>&, const Matrix<T>&, T);        \
  template Vector<T> softmax<T>(const Vector<T>&);

LLMFEW_INSTANTIATE(float)
LLMFEW_INSTANTIATE(double)

#undef LLMFEW_INSTANTIATE

}  // namespace llmfew
