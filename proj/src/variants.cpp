#include "llmfew/variants.hpp"

#include "llmfew/errors.hpp"
#include "llmfew/rng.hpp"

#include <algorithm>

namespace llmfew {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoPtcEnc: return "no_ptcenc";
    case Variant::kFrozen: return "frozen";
    case Variant::kNoLlm: return "no_llm";
  }
  return "full";
}

Variant variant_from_string(const std::string& name) {
  for (auto v : all_variants()) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + name + "' (expected full, no_ptcenc, frozen or no_llm)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> variants = {Variant::kFull, Variant::kNoPtcEnc, Variant::kFrozen,
                                                Variant::kNoLlm};
  return variants;
}

void VariantSpec::validate() const {
  const bool uses_lora = variant == Variant::kFull || variant == Variant::kNoPtcEnc;
  if (uses_lora && !lora) throw ConfigError("variant " + to_string(variant) + " requires LoRA settings");
  if (!uses_lora && lora) throw ConfigError("variant " + to_string(variant) + " must not carry LoRA settings");
  if (patch_len <= 0 || stride <= 0) throw ConfigError("patch length and stride must be positive");
  if (stride > patch_len) throw ConfigError("stride must not exceed the patch length");
  if (variant != Variant::kNoLlm) backbone.validate();
}

VariantSpec with_variant(VariantSpec spec, Variant variant) {
  spec.variant = variant;
  const bool uses_lora = variant == Variant::kFull || variant == Variant::kNoPtcEnc;
  if (uses_lora && !spec.lora) spec.lora = LoraConfig{};
  if (!uses_lora) spec.lora.reset();
  return spec;
}

template <typename T>
Matrix<T> Model<T>::tokens(const Matrix<double>& values) const {
  if (values.rows() != meta_.dims) {
    throw ConfigError("model expects " + std::to_string(meta_.dims) + " channels, got " +
                      std::to_string(values.rows()));
  }
  const auto patches = patch(values, static_cast<std::size_t>(spec_.patch_len),
                             static_cast<std::size_t>(spec_.stride));
  if (static_cast<int>(patches.num_patches()) != num_patches_) {
    throw ConfigError("instance length yields " + std::to_string(patches.num_patches()) +
                      " patches, model was built for " + std::to_string(num_patches_));
  }
  return patches.tokens().template cast<T>();
}

template <typename T>
Vector<T> Model<T>::forward_tokens(const Matrix<T>& tokens, Cache* cache) const {
  typename PtcEncoder<T>::Cache* enc_cache = cache ? &cache->encoder : nullptr;
  Matrix<T> encoded = encoder ? encoder->forward(tokens, enc_cache) : projection->forward(tokens);
  Matrix<T> fused;
  if (backbone) {
    const Matrix<T> decoded = backbone->forward(encoded, cache ? &cache->decoder : nullptr);
    fused = fuse(encoded, decoded);
  } else {
    fused = spec_.no_llm_relu ? Matrix<T>(encoded.cwiseMax(T(0))) : encoded;
  }
  Vector<T> probs = head.forward(fused, cache ? &cache->head : nullptr);
  if (cache) {
    cache->tokens = tokens;
    cache->encoded = std::move(encoded);
    cache->fused = std::move(fused);
  }
  return probs;
}

template <typename T>
Vector<T> Model<T>::predict_proba(const Matrix<double>& values) const {
  return forward_tokens(tokens(values));
}

template <typename T>
int Model<T>::predict(const Matrix<double>& values) const {
  Eigen::Index best = 0;
  predict_proba(values).maxCoeff(&best);
  return static_cast<int>(best);
}

template <typename T>
T Model<T>::accumulate_gradients(const Matrix<T>& tokens, int label, Vector<T>* probs_out) {
  Cache cache;
  const Vector<T> probs = forward_tokens(tokens, &cache);
  const T loss = cross_entropy(probs, label);
  if (probs_out) *probs_out = probs;

  Matrix<T> grad_fused = head.backward(cache.head, label, cache.fused.rows(), cache.fused.cols());
  Matrix<T> grad_encoded;
  if (backbone) {
    const Matrix<T> grad_pre = fuse_backward(cache.fused, grad_fused);
    grad_encoded = grad_pre + backbone->backward(cache.decoder, grad_pre);
  } else if (spec_.no_llm_relu) {
    grad_encoded = fuse_backward(cache.fused, grad_fused);
  } else {
    grad_encoded = std::move(grad_fused);
  }
  if (encoder) {
    encoder->backward(cache.encoder, grad_encoded);
  } else {
    projection->backward(cache.tokens, grad_encoded);
  }
  return loss;
}

template <typename T>
void Model<T>::collect(ParameterRefs<T>& out) {
  if (encoder) encoder->collect(out);
  if (projection) projection->collect(out);
  if (backbone) backbone->collect(out);
  head.collect(out);
}

template <typename T>
std::vector<std::string> Model<T>::trainable_names() {
  ParameterRefs<T> params;
  collect(params);
  std::vector<std::string> names;
  for (const auto* p : params) {
    if (p->trainable) names.push_back(p->name);
  }
  return names;
}

template <typename T>
std::size_t Model<T>::trainable_parameter_count() {
  ParameterRefs<T> params;
  collect(params);
  return count_parameters(params, true);
}

template <typename T>
Model<T> build(const VariantSpec& spec, const DatasetMeta& meta, std::uint64_t seed) {
  spec.validate();
  if (meta.dims <= 0 || meta.length <= 0 || meta.num_classes < 2) {
    throw ConfigError("dataset metadata must have positive dims/length and at least two classes");
  }
  Model<T> model;
  model.spec_ = spec;
  model.meta_ = meta;
  model.num_patches_ = static_cast<int>(num_patches(static_cast<std::size_t>(meta.length),
                                                    static_cast<std::size_t>(spec.patch_len),
                                                    static_cast<std::size_t>(spec.stride)));
  const int in_channels = meta.dims * spec.patch_len;

  int d_model = spec.backbone.d_model;
  if (spec.variant != Variant::kNoLlm) {
    if (spec.backbone.kind == BackboneKind::kPretrained) {
      model.backbone = load_pretrained<T>(spec.backbone);
    } else {
      model.backbone = Decoder<T>(spec.backbone, seed);
    }
    d_model = model.backbone->spec().d_model;
    if (model.num_patches_ > model.backbone->spec().max_positions) {
      throw CapacityError(std::to_string(model.num_patches_) + " patches exceed the backbone's " +
                          std::to_string(model.backbone->spec().max_positions) + " positions");
    }
    if (spec.lora) model.backbone->inject_lora(spec.lora->rank, spec.lora->alpha, seed);
    if (spec.train_backbone) model.backbone->set_base_trainable(true);
  }

  Rng encoder_rng(seed, "encoder");
  if (spec.variant == Variant::kNoPtcEnc) {
    model.projection = Linear<T>("projection", in_channels, d_model);
    model.projection->init_uniform(encoder_rng);
  } else {
    EncoderConfig cfg;
    cfg.in_channels = in_channels;
    cfg.hidden_channels = spec.encoder.hidden_channels;
    cfg.depth = spec.encoder.depth;
    cfg.kernel_size = spec.encoder.kernel_size;
    cfg.d_model = d_model;
    cfg.negative_slope = spec.encoder.negative_slope;
    model.encoder = PtcEncoder<T>(cfg, encoder_rng);
  }

  Rng head_rng(seed, "head");
  model.head = ClassifierHead<T>(model.num_patches_, d_model, meta.num_classes, spec.ln_position, head_rng);
  return model;
}

template class Model<float>;
template class Model<double>;
template Model<float> build<float>(const VariantSpec&, const DatasetMeta&, std::uint64_t);
template Model<double> build<double>(const VariantSpec&, const DatasetMeta&, std::uint64_t);

}  // namespace llmfew
