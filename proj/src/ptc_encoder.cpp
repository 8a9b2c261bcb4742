#include "llmfew/ptc_encoder.hpp"

#include "llmfew/errors.hpp"

#include <cmath>

namespace llmfew {

void EncoderConfig::validate() const {
  if (in_channels <= 0 || hidden_channels <= 0 || depth <= 0 || kernel_size <= 0 ||
      d_model <= 0) {
    throw ConfigError("encoder dimensions must all be positive");
  }
  if (depth > 24) throw ConfigError("encoder depth " + std::to_string(depth) + " is unsupported");
  if (!(negative_slope >= 0.0)) throw ConfigError("negative_slope must be non-negative");
}

int receptive_field(const EncoderConfig& cfg) {
  return 1 + 2 * (cfg.kernel_size - 1) * ((1 << cfg.depth) - 1);
}

template <typename T>
Matrix<T> causal_conv(const Matrix<T>& x, const Matrix<T>& weight, const Matrix<T>& bias,
                      int kernel_size, int dilation) {
  const Eigen::Index steps = x.rows();
  const Eigen::Index cin = x.cols();
  if (weight.cols() != cin * kernel_size) {
    throw ConfigError("causal_conv: weight has " + std::to_string(weight.cols()) +
                      " columns, expected " + std::to_string(cin * kernel_size));
  }
  Matrix<T> y = Matrix<T>::Zero(steps, weight.rows());
  for (int tap = 0; tap < kernel_size; ++tap) {
    const Eigen::Index shift = static_cast<Eigen::Index>(tap) * dilation;
    if (shift >= steps) break;
    const auto w_tap = weight.middleCols(tap * cin, cin);
    y.bottomRows(steps - shift).noalias() += x.topRows(steps - shift) * w_tap.transpose();
  }
  if (bias.size() > 0) y.rowwise() += bias.row(0);
  return y;
}

template <typename T>
Matrix<T> causal_conv_backward(const Matrix<T>& x, const Matrix<T>& weight,
                               const Matrix<T>& grad_out, int kernel_size, int dilation,
                               Matrix<T>* grad_weight, Matrix<T>* grad_bias) {
  const Eigen::Index steps = x.rows();
  const Eigen::Index cin = x.cols();
  Matrix<T> grad_x = Matrix<T>::Zero(steps, cin);
  for (int tap = 0; tap < kernel_size; ++tap) {
    const Eigen::Index shift = static_cast<Eigen::Index>(tap) * dilation;
    if (shift >= steps) break;
    const auto g = grad_out.bottomRows(steps - shift);
    grad_x.topRows(steps - shift).noalias() += g * weight.middleCols(tap * cin, cin);
    if (grad_weight) {
      grad_weight->middleCols(tap * cin, cin).noalias() += g.transpose() * x.topRows(steps - shift);
    }
  }
  if (grad_bias && grad_bias->size() > 0) grad_bias->row(0) += grad_out.colwise().sum();
  return grad_x;
}

template <typename T>
WeightNormCausalConv<T>::WeightNormCausalConv(std::string name, int in_channels,
                                              int out_channels, int kernel, int dil)
    : kernel_size(kernel),
      dilation(dil),
      direction(name + ".direction", Matrix<T>::Zero(out_channels, in_channels * kernel)),
      magnitude(name + ".magnitude", Matrix<T>::Ones(1, out_channels)),
      bias(name + ".bias", Matrix<T>::Zero(1, out_channels)) {}

template <typename T>
void WeightNormCausalConv<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(direction.value.cols()));
  for (Eigen::Index i = 0; i < direction.value.size(); ++i) {
    direction.value.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
  magnitude.value.setOnes();
  bias.value.setZero();
}

template <typename T>
Matrix<T> WeightNormCausalConv<T>::effective_weight() const {
  Matrix<T> w(direction.value.rows(), direction.value.cols());
  for (Eigen::Index o = 0; o < w.rows(); ++o) {
    const T norm = direction.value.row(o).norm();
    if (norm > T(0)) {
      w.row(o) = direction.value.row(o) * (magnitude.value(0, o) / norm);
    } else {
      w.row(o).setZero();
    }
  }
  return w;
}

template <typename T>
Matrix<T> WeightNormCausalConv<T>::forward(const Matrix<T>& x) const {
  return causal_conv(x, effective_weight(), bias.value, kernel_size, dilation);
}

template <typename T>
Matrix<T> WeightNormCausalConv<T>::backward(const Matrix<T>& x, const Matrix<T>& grad_out) {
  const Matrix<T> w = effective_weight();
  Matrix<T> grad_w = Matrix<T>::Zero(w.rows(), w.cols());
  Matrix<T> grad_x = causal_conv_backward(x, w, grad_out, kernel_size, dilation, &grad_w,
                                          bias.trainable ? &bias.grad : nullptr);
  // w = g·v/‖v‖ ⇒ ∂g = ⟨∂w, u⟩, ∂v = (g/‖v‖)(∂w − ⟨∂w, u⟩u) with u = v/‖v‖.
  for (Eigen::Index o = 0; o < w.rows(); ++o) {
    const T norm = direction.value.row(o).norm();
    if (norm <= T(0)) continue;
    const auto unit = direction.value.row(o) / norm;
    const T along = grad_w.row(o).dot(unit);
    if (magnitude.trainable) magnitude.grad(0, o) += along;
    if (direction.trainable) {
      direction.grad.row(o) += (magnitude.value(0, o) / norm) * (grad_w.row(o) - along * unit);
    }
  }
  return grad_x;
}

template <typename T>
void WeightNormCausalConv<T>::collect(ParameterRefs<T>& out) {
  out.push_back(&direction);
  out.push_back(&magnitude);
  out.push_back(&bias);
}

template <typename T>
PtcEncoder<T>::PtcEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  input_projection = Linear<T>("encoder.input_projection", cfg.in_channels, cfg.hidden_channels);
  input_projection.init_uniform(rng);
  for (int block = 1; block <= cfg.depth; ++block) {
    for (int layer = 1; layer <= 2; ++layer) {
      WeightNormCausalConv<T> conv(
          "encoder.block." + std::to_string(block) + ".conv" + std::to_string(layer),
          cfg.hidden_channels, cfg.hidden_channels, cfg.kernel_size, block_dilation(block));
      conv.init(rng);
      convs.push_back(std::move(conv));
    }
  }
  output_projection = Linear<T>("encoder.output_projection", cfg.hidden_channels, cfg.d_model);
  output_projection.init_uniform(rng);
}

template <typename T>
Matrix<T> PtcEncoder<T>::forward(const Matrix<T>& tokens, Cache* cache) const {
  if (tokens.cols() != cfg_.in_channels) {
    throw ConfigError("encoder expects " + std::to_string(cfg_.in_channels) +
                      " features per token, got " + std::to_string(tokens.cols()));
  }
  const T slope = static_cast<T>(cfg_.negative_slope);
  Matrix<T> hidden = input_projection.forward(tokens);
  if (cache) {
    cache->tokens = tokens;
    cache->blocks.clear();
  }
  for (int block = 0; block < cfg_.depth; ++block) {
    const auto& conv1 = convs[static_cast<std::size_t>(2 * block)];
    const auto& conv2 = convs[static_cast<std::size_t>(2 * block + 1)];
    Matrix<T> pre1 = conv1.forward(hidden);
    Matrix<T> act1 = leaky_relu(pre1, slope);
    Matrix<T> pre2 = conv2.forward(act1);
    Matrix<T> next = hidden + leaky_relu(pre2, slope);
    if (cache) {
      cache->blocks.push_back({std::move(hidden), std::move(pre1), std::move(act1), std::move(pre2)});
    }
    hidden = std::move(next);
  }
  Matrix<T> out = output_projection.forward(hidden);
  if (cache) cache->last_hidden = std::move(hidden);
  return out;
}

template <typename T>
Matrix<T> PtcEncoder<T>::backward(const Cache& cache, const Matrix<T>& grad_out) {
  const T slope = static_cast<T>(cfg_.negative_slope);
  Matrix<T> grad_hidden = output_projection.backward(cache.last_hidden, grad_out);
  for (int block = cfg_.depth - 1; block >= 0; --block) {
    const auto& bc = cache.blocks[static_cast<std::size_t>(block)];
    auto& conv1 = convs[static_cast<std::size_t>(2 * block)];
    auto& conv2 = convs[static_cast<std::size_t>(2 * block + 1)];
    const Matrix<T> grad_pre2 = leaky_relu_backward(bc.pre2, grad_hidden, slope);
    const Matrix<T> grad_act1 = conv2.backward(bc.act1, grad_pre2);
    const Matrix<T> grad_pre1 = leaky_relu_backward(bc.pre1, grad_act1, slope);
    grad_hidden += conv1.backward(bc.input, grad_pre1);
  }
  return input_projection.backward(cache.tokens, grad_hidden);
}

template <typename T>
void PtcEncoder<T>::collect(ParameterRefs<T>& out) {
  input_projection.collect(out);
  for (auto& conv : convs) conv.collect(out);
  output_projection.collect(out);
}

template <typename T>
Matrix<T> encode(const PatchArray& patches, const PtcEncoder<T>& encoder) {
  const auto features = patches.dims() * patches.patch_len();
  if (static_cast<int>(features) != encoder.config().in_channels) {
    throw ConfigError("patches carry " + std::to_string(features) + " features per token, encoder expects " +
                      std::to_string(encoder.config().in_channels));
  }
  return encoder.forward(patches.tokens().template cast<T>());
}

#define LLMFEW_INSTANTIATE(T)                                                                    \
  template Matrix<T> causal_conv<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&, int,   \
                                    int);                                                        \
  template Matrix<T> causal_conv_backward<T>(const Matrix<T>&, const Matrix<T>&,                 \
                                             const Matrix<T>&, int, int, Matrix<T>*, Matrix<T>*); \
  template class WeightNormCausalConv<T>;                                                        \
  template class PtcEncoder<T>;                                                                  \
  template Matrix<T> encode<T>(const PatchArray&, const PtcEncoder<T>&);

LLMFEW_INSTANTIATE(float)
LLMFEW_INSTANTIATE(double)

#undef LLMFEW_INSTANTIATE

}  // namespace llmfew
