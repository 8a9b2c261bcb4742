#pragma once

#include "llmfew/layers.hpp"
#include "llmfew/patching.hpp"
#include "llmfew/rng.hpp"
#include "llmfew/tensor.hpp"

#include <string>
#include <vector>

namespace llmfew {

struct EncoderConfig {
  int in_channels = 0;  // M·P
  int hidden_channels = 128;
  int depth = 2;
  int kernel_size = 3;
  int d_model = 64;
  double negative_slope = 0.01;

  void validate() const;
};

// Dilation of block d (1-based): 2^(d−1).
inline int block_dilation(int block) { return 1 << (block - 1); }

// 1 + 2(k−1)(2^D − 1): two causal layers per block, block d dilated by 2^(d−1).
int receptive_field(const EncoderConfig& cfg);

// Dilated causal convolution over a position-major sequence x (T × C_in).
// `weight` is (C_out × k·C_in); columns [i·C_in, (i+1)·C_in) hold tap i,
// which reads x[t − i·dilation] (zero outside the sequence). `bias` is
// 1 × C_out or empty.
template <typename T>
Matrix<T> causal_conv(const Matrix<T>& x, const Matrix<T>& weight, const Matrix<T>& bias,
                      int kernel_size, int dilation);

// Gradient of causal_conv. Adds into grad_weight / grad_bias when non-null;
// returns ∂L/∂x.
template <typename T>
Matrix<T> causal_conv_backward(const Matrix<T>& x, const Matrix<T>& weight,
                               const Matrix<T>& grad_out, int kernel_size, int dilation,
                               Matrix<T>* grad_weight, Matrix<T>* grad_bias);

// Causal convolution whose kernel is reparameterized per output channel as
// magnitude · direction / ‖direction‖.
template <typename T>
class WeightNormCausalConv {
 public:
  WeightNormCausalConv() = default;
  WeightNormCausalConv(std::string name, int in_channels, int out_channels, int kernel_size,
                       int dilation);

  // Direction ~ Uniform(±1/√(k·C_in)), magnitude 1, bias 0.
  void init(Rng& rng);

  Matrix<T> effective_weight() const;
  Matrix<T> forward(const Matrix<T>& x) const;
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& grad_out);

  void collect(ParameterRefs<T>& out);

  int kernel_size = 1;
  int dilation = 1;
  Parameter<T> direction;
  Parameter<T> magnitude;
  Parameter<T> bias;
};

// Patch-wise temporal convolution encoder: width-1 input projection,
// `depth` residual blocks of two [causal conv → LeakyReLU] layers, and a
// width-1 output projection to d_model.
template <typename T>
class PtcEncoder {
 public:
  struct BlockCache {
    Matrix<T> input;
    Matrix<T> pre1;
    Matrix<T> act1;
    Matrix<T> pre2;
  };
  struct Cache {
    Matrix<T> tokens;
    std::vector<BlockCache> blocks;
    Matrix<T> last_hidden;
  };

  PtcEncoder() = default;
  PtcEncoder(const EncoderConfig& cfg, Rng& rng);

  const EncoderConfig& config() const { return cfg_; }

  // tokens: N_P × in_channels → N_P × d_model.
  Matrix<T> forward(const Matrix<T>& tokens, Cache* cache = nullptr) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& grad_out);

  void collect(ParameterRefs<T>& out);

  Linear<T> input_projection;
  std::vector<WeightNormCausalConv<T>> convs;  // 2 per block
  Linear<T> output_projection;

 private:
  EncoderConfig cfg_;
};

template <typename T>
Matrix<T> encode(const PatchArray& patches, const PtcEncoder<T>& encoder);

}  // namespace llmfew
