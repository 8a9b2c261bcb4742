#pragma once

#include "llmfew/layers.hpp"
#include "llmfew/lora.hpp"
#include "llmfew/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace llmfew {

enum class BackboneKind { kTiny, kPretrained };

std::string to_string(BackboneKind kind);
BackboneKind backbone_kind_from_string(const std::string& name);

struct BackboneSpec {
  BackboneKind kind = BackboneKind::kTiny;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ffn_multiplier = 4;
  int max_positions = 512;
  std::filesystem::path checkpoint_path;  // pretrained only

  void validate() const;
};

// GPT-2 style pre-norm causal decoder that consumes embeddings directly:
//   x ← tokens + pos_emb
//   per layer: x ← x + Attn(LN₁(x)); x ← x + FFN(LN₂(x))
//   out = LN_final(x)
template <typename T>
class Decoder {
 public:
  struct LayerCache {
    Matrix<T> input;
    typename LayerNorm<T>::Cache ln1;
    Matrix<T> normed1;
    Matrix<T> q, k, v;
    typename LoraLinear<T>::Cache q_lora, k_lora, v_lora;
    std::vector<Matrix<T>> probs;  // per head, T × T
    Matrix<T> attn;
    Matrix<T> mid;
    typename LayerNorm<T>::Cache ln2;
    Matrix<T> normed2;
    Matrix<T> ffn_pre;
    Matrix<T> ffn_act;
  };
  struct Cache {
    std::vector<LayerCache> layers;
    typename LayerNorm<T>::Cache final_ln;
  };

  struct Layer {
    LayerNorm<T> ln1;
    LoraLinear<T> q, k, v;
    Linear<T> o;
    LayerNorm<T> ln2;
    Linear<T> ffn_in;
    Linear<T> ffn_out;
  };

  Decoder() = default;
  // Randomly initialized ("tiny") decoder; all weights frozen.
  Decoder(const BackboneSpec& spec, std::uint64_t seed);

  const BackboneSpec& spec() const { return spec_; }

  // tokens: T × d_model with T ≤ max_positions.
  Matrix<T> forward(const Matrix<T>& tokens, Cache* cache = nullptr) const;
  // Returns ∂L/∂tokens; accumulates gradients of trainable parameters only.
  Matrix<T> backward(const Cache& cache, const Matrix<T>& grad_out);

  // Wraps every Q, K, V projection with a fresh adapter. Throws
  // AlreadyAdaptedError on a second call.
  void inject_lora(int rank, double alpha, std::uint64_t seed);
  bool adapted() const { return adapted_; }

  // Marks every base weight trainable or frozen. Adapters stay trainable.
  void set_base_trainable(bool trainable);

  void collect(ParameterRefs<T>& out);
  std::size_t trainable_parameter_count();
  std::size_t total_parameter_count();

  // Writes `meta` plus one array file per base weight.
  void save_checkpoint(const std::filesystem::path& dir);

  Parameter<T> pos_emb;
  std::vector<Layer> layers;
  LayerNorm<T> final_norm;

 private:
  template <typename U>
  friend Decoder<U> load_pretrained(const BackboneSpec& spec);

  void build(int ffn_dim);
  void collect_base(ParameterRefs<T>& out);

  BackboneSpec spec_;
  bool adapted_ = false;
};

// Loads a decoder from `spec.checkpoint_path`. Shape and metadata mismatches
// raise CheckpointError naming every offending entry; a missing directory or
// meta file raises IoError. spec.d_model / n_layers / n_heads, when positive,
// must agree with the checkpoint metadata.
template <typename T>
Decoder<T> load_pretrained(const BackboneSpec& spec);

template <typename T>
std::size_t trainable_parameter_count(Decoder<T>& decoder) {
  return decoder.trainable_parameter_count();
}

}  // namespace llmfew
