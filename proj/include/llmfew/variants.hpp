#pragma once

#include "llmfew/backbone.hpp"
#include "llmfew/classifier.hpp"
#include "llmfew/layers.hpp"
#include "llmfew/patching.hpp"
#include "llmfew/ptc_encoder.hpp"
#include "llmfew/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace llmfew {

// full:      patch → PTC encoder → LoRA backbone → fuse → head
// no_ptcenc: patch → width-1 projection → LoRA backbone → fuse → head
// frozen:    patch → PTC encoder → frozen backbone → fuse → head
// no_llm:    patch → PTC encoder → head, with H = ReLU(H_e)
enum class Variant { kFull, kNoPtcEnc, kFrozen, kNoLlm };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
const std::vector<Variant>& all_variants();

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
};

struct EncoderSettings {
  int hidden_channels = 128;
  int depth = 2;
  int kernel_size = 3;
  double negative_slope = 0.01;
};

struct VariantSpec {
  Variant variant = Variant::kFull;
  BackboneSpec backbone;
  std::optional<LoraConfig> lora = LoraConfig{};
  EncoderSettings encoder;
  int patch_len = 16;
  int stride = 8;
  LnPosition ln_position = LnPosition::kPaper;
  bool no_llm_relu = true;
  // Full fine-tuning of the backbone base weights (debug mode).
  bool train_backbone = false;

  // Throws ConfigError when the variant and its LoRA setting disagree.
  void validate() const;
};

// Canonical spec for a variant: drops LoRA for frozen / no_llm.
VariantSpec with_variant(VariantSpec spec, Variant variant);

struct DatasetMeta {
  int dims = 0;
  int length = 0;
  int num_classes = 0;
};

template <typename T>
class Model {
 public:
  struct Cache {
    Matrix<T> tokens;
    typename PtcEncoder<T>::Cache encoder;
    Matrix<T> encoded;
    typename Decoder<T>::Cache decoder;
    Matrix<T> fused;
    typename ClassifierHead<T>::Cache head;
  };

  const VariantSpec& spec() const { return spec_; }
  const DatasetMeta& meta() const { return meta_; }
  int num_patches() const { return num_patches_; }

  // values: M × L instance → N_P × M·P token matrix.
  Matrix<T> tokens(const Matrix<double>& values) const;

  Vector<T> forward_tokens(const Matrix<T>& tokens, Cache* cache = nullptr) const;
  Vector<T> predict_proba(const Matrix<double>& values) const;
  int predict(const Matrix<double>& values) const;

  // Cross-entropy on one instance; adds ∂L into the trainable parameters'
  // gradients and returns the loss.
  T accumulate_gradients(const Matrix<T>& tokens, int label, Vector<T>* probs_out = nullptr);

  void collect(ParameterRefs<T>& out);
  std::vector<std::string> trainable_names();
  std::size_t trainable_parameter_count();

  std::optional<PtcEncoder<T>> encoder;
  std::optional<Linear<T>> projection;
  std::optional<Decoder<T>> backbone;
  ClassifierHead<T> head;

 private:
  template <typename U>
  friend Model<U> build(const VariantSpec& spec, const DatasetMeta& meta, std::uint64_t seed);

  VariantSpec spec_;
  DatasetMeta meta_;
  int num_patches_ = 0;
};

// Assembles a model. Components draw from independent streams of `seed`,
// so variants built with the same seed share encoder, backbone and head
// initial weights.
template <typename T>
Model<T> build(const VariantSpec& spec, const DatasetMeta& meta, std::uint64_t seed);

}  // namespace llmfew
