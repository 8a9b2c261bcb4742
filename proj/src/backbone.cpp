#include "llmfew/backbone.hpp"

#include "llmfew/array_io.hpp"
#include "llmfew/errors.hpp"
#include "llmfew/rng.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace llmfew {

std::string to_string(BackboneKind kind) {
  return kind == BackboneKind::kTiny ? "tiny" : "pretrained";
}

BackboneKind backbone_kind_from_string(const std::string& name) {
  if (name == "tiny") return BackboneKind::kTiny;
  if (name == "pretrained") return BackboneKind::kPretrained;
  throw ConfigError("unknown backbone kind '" + name + "'");
}

void BackboneSpec::validate() const {
  if (d_model <= 0 || n_heads <= 0 || n_layers < 0 || ffn_multiplier <= 0 || max_positions <= 0) {
    throw ConfigError("backbone dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
}

namespace {

std::string layer_prefix(int i) { return "layer." + std::to_string(i); }

template <typename T>
void fill_normal(Matrix<T>& m, Rng& rng, double std_dev) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(std_dev * rng.normal());
}

}  // namespace

template <typename T>
void Decoder<T>::build(int ffn_dim) {
  const int d = spec_.d_model;
  pos_emb = Parameter<T>("pos_emb", Matrix<T>::Zero(spec_.max_positions, d), false);
  layers.clear();
  for (int i = 0; i < spec_.n_layers; ++i) {
    const auto p = layer_prefix(i);
    Layer layer;
    layer.ln1 = LayerNorm<T>(p + ".ln1", d);
    layer.q = LoraLinear<T>(Linear<T>(p + ".attn.q", d, d));
    layer.k = LoraLinear<T>(Linear<T>(p + ".attn.k", d, d));
    layer.v = LoraLinear<T>(Linear<T>(p + ".attn.v", d, d));
    layer.o = Linear<T>(p + ".attn.o", d, d);
    layer.ln2 = LayerNorm<T>(p + ".ln2", d);
    layer.ffn_in = Linear<T>(p + ".ffn.in", d, ffn_dim);
    layer.ffn_out = Linear<T>(p + ".ffn.out", ffn_dim, d);
    layers.push_back(std::move(layer));
  }
  final_norm = LayerNorm<T>("final_norm", d);
  set_base_trainable(false);
}

template <typename T>
Decoder<T>::Decoder(const BackboneSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  build(spec_.d_model * spec_.ffn_multiplier);
  Rng rng(seed, "backbone");
  constexpr double kStd = 0.02;
  const double residual_std = kStd / std::sqrt(2.0 * std::max(1, spec_.n_layers));
  fill_normal(pos_emb.value, rng, kStd);
  for (auto& layer : layers) {
    fill_normal(layer.q.base.weight.value, rng, kStd);
    fill_normal(layer.k.base.weight.value, rng, kStd);
    fill_normal(layer.v.base.weight.value, rng, kStd);
    fill_normal(layer.o.weight.value, rng, residual_std);
    fill_normal(layer.ffn_in.weight.value, rng, kStd);
    fill_normal(layer.ffn_out.weight.value, rng, residual_std);
  }
}

template <typename T>
Matrix<T> Decoder<T>::forward(const Matrix<T>& tokens, Cache* cache) const {
  const Eigen::Index steps = tokens.rows();
  if (steps > spec_.max_positions) {
    throw CapacityError("sequence of " + std::to_string(steps) + " tokens exceeds max_positions " +
                        std::to_string(spec_.max_positions));
  }
  if (tokens.cols() != spec_.d_model) {
    throw ConfigError("backbone expects d_model " + std::to_string(spec_.d_model) + ", got " +
                      std::to_string(tokens.cols()));
  }
  const int heads = spec_.n_heads;
  const Eigen::Index head_dim = spec_.d_model / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));

  Matrix<T> x = tokens + pos_emb.value.topRows(steps);
  if (cache) cache->layers.assign(layers.size(), LayerCache{});

  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& layer = layers[li];
    LayerCache local;
    LayerCache& c = cache ? cache->layers[li] : local;

    c.input = x;
    c.normed1 = layer.ln1.forward(x, &c.ln1);
    c.q = layer.q.forward(c.normed1, &c.q_lora);
    c.k = layer.k.forward(c.normed1, &c.k_lora);
    c.v = layer.v.forward(c.normed1, &c.v_lora);

    c.attn.resize(steps, spec_.d_model);
    c.probs.assign(static_cast<std::size_t>(heads), Matrix<T>());
    for (int h = 0; h < heads; ++h) {
      const auto qh = c.q.middleCols(h * head_dim, head_dim);
      const auto kh = c.k.middleCols(h * head_dim, head_dim);
      const auto vh = c.v.middleCols(h * head_dim, head_dim);
      Matrix<T> scores = (qh * kh.transpose()) * scale;
      auto& probs = c.probs[static_cast<std::size_t>(h)];
      probs = Matrix<T>::Zero(steps, steps);
      for (Eigen::Index i = 0; i < steps; ++i) {
        // Row i attends to positions 0..i only.
        const auto visible = scores.row(i).head(i + 1);
        const T peak = visible.maxCoeff();
        auto e = (visible.array() - peak).exp();
        probs.row(i).head(i + 1) = e / e.sum();
      }
      c.attn.middleCols(h * head_dim, head_dim).noalias() = probs * vh;
    }
    c.mid = x + layer.o.forward(c.attn);
    c.normed2 = layer.ln2.forward(c.mid, &c.ln2);
    c.ffn_pre = layer.ffn_in.forward(c.normed2);
    c.ffn_act = gelu(c.ffn_pre);
    x = c.mid + layer.ffn_out.forward(c.ffn_act);
  }
  return final_norm.forward(x, cache ? &cache->final_ln : nullptr);
}

template <typename T>
Matrix<T> Decoder<T>::backward(const Cache& cache, const Matrix<T>& grad_out) {
  const int heads = spec_.n_heads;
  const Eigen::Index head_dim = spec_.d_model / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));

  Matrix<T> grad_x = final_norm.backward(cache.final_ln, grad_out);
  for (std::size_t li = layers.size(); li-- > 0;) {
    auto& layer = layers[li];
    const auto& c = cache.layers[li];

    const Matrix<T> grad_act = layer.ffn_out.backward(c.ffn_act, grad_x);
    const Matrix<T> grad_pre = gelu_backward(c.ffn_pre, grad_act);
    const Matrix<T> grad_normed2 = layer.ffn_in.backward(c.normed2, grad_pre);
    Matrix<T> grad_mid = grad_x + layer.ln2.backward(c.ln2, grad_normed2);

    const Matrix<T> grad_attn = layer.o.backward(c.attn, grad_mid);
    Matrix<T> grad_q(c.q.rows(), c.q.cols());
    Matrix<T> grad_k(c.k.rows(), c.k.cols());
    Matrix<T> grad_v(c.v.rows(), c.v.cols());
    for (int h = 0; h < heads; ++h) {
      const auto& probs = c.probs[static_cast<std::size_t>(h)];
      const auto cols = [&](const Matrix<T>& m) { return m.middleCols(h * head_dim, head_dim); };
      const Matrix<T> grad_head = cols(grad_attn);
      const Matrix<T> grad_probs = grad_head * cols(c.v).transpose();
      grad_v.middleCols(h * head_dim, head_dim).noalias() = probs.transpose() * grad_head;
      const Vector<T> row_dot = (grad_probs.array() * probs.array()).rowwise().sum().matrix();
      const Matrix<T> grad_scores =
          (probs.array() * (grad_probs.colwise() - row_dot).array()).matrix() * scale;
      grad_q.middleCols(h * head_dim, head_dim).noalias() = grad_scores * cols(c.k);
      grad_k.middleCols(h * head_dim, head_dim).noalias() = grad_scores.transpose() * cols(c.q);
    }
    Matrix<T> grad_normed1 = layer.q.backward(c.normed1, c.q_lora, grad_q);
    grad_normed1 += layer.k.backward(c.normed1, c.k_lora, grad_k);
    grad_normed1 += layer.v.backward(c.normed1, c.v_lora, grad_v);
    grad_x = grad_mid + layer.ln1.backward(c.ln1, grad_normed1);
  }
  if (pos_emb.trainable) pos_emb.grad.topRows(grad_x.rows()) += grad_x;
  return grad_x;
}

template <typename T>
void Decoder<T>::inject_lora(int rank, double alpha, std::uint64_t seed) {
  if (adapted_) throw AlreadyAdaptedError("backbone already carries LoRA adapters");
  const int d = spec_.d_model;
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    auto& layer = layers[static_cast<std::size_t>(i)];
    layer.q.adapter = init_adapter<T>(d, d, rank, alpha, seed, {i, Projection::kQuery});
    layer.k.adapter = init_adapter<T>(d, d, rank, alpha, seed, {i, Projection::kKey});
    layer.v.adapter = init_adapter<T>(d, d, rank, alpha, seed, {i, Projection::kValue});
  }
  set_base_trainable(false);
  adapted_ = true;
}

template <typename T>
void Decoder<T>::set_base_trainable(bool trainable) {
  ParameterRefs<T> base;
  collect_base(base);
  for (auto* p : base) p->trainable = trainable;
}

template <typename T>
void Decoder<T>::collect_base(ParameterRefs<T>& out) {
  out.push_back(&pos_emb);
  for (auto& layer : layers) {
    layer.ln1.collect(out);
    layer.q.base.collect(out);
    layer.k.base.collect(out);
    layer.v.base.collect(out);
    layer.o.collect(out);
    layer.ln2.collect(out);
    layer.ffn_in.collect(out);
    layer.ffn_out.collect(out);
  }
  final_norm.collect(out);
}

template <typename T>
void Decoder<T>::collect(ParameterRefs<T>& out) {
  collect_base(out);
  for (auto& layer : layers) {
    for (auto* proj : {&layer.q, &layer.k, &layer.v}) {
      if (proj->adapter) {
        out.push_back(&proj->adapter->a);
        out.push_back(&proj->adapter->b);
      }
    }
  }
}

template <typename T>
std::size_t Decoder<T>::trainable_parameter_count() {
  ParameterRefs<T> params;
  collect(params);
  return count_parameters(params, true);
}

template <typename T>
std::size_t Decoder<T>::total_parameter_count() {
  ParameterRefs<T> params;
  collect(params);
  return count_parameters(params, false);
}

template <typename T>
void Decoder<T>::save_checkpoint(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_meta(dir / "meta", {{"kind", "pretrained"},
                            {"d_model", std::to_string(spec_.d_model)},
                            {"n_layers", std::to_string(spec_.n_layers)},
                            {"n_heads", std::to_string(spec_.n_heads)},
                            {"max_positions", std::to_string(spec_.max_positions)}});
  ParameterRefs<T> base;
  collect_base(base);
  save_parameters(dir, base);
}

template <typename T>
Decoder<T> load_pretrained(const BackboneSpec& spec) {
  const auto& dir = spec.checkpoint_path;
  if (!std::filesystem::is_directory(dir)) throw IoError("checkpoint directory not found: " + dir.string());
  const auto meta = read_meta(dir / "meta");

  auto meta_int = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw CheckpointError("checkpoint meta is missing '" + key + "'");
    try {
      return std::stoi(it->second);
    } catch (const std::exception&) {
      throw CheckpointError("checkpoint meta '" + key + "' is not an integer");
    }
  };

  BackboneSpec loaded = spec;
  loaded.kind = BackboneKind::kPretrained;
  loaded.d_model = meta_int("d_model");
  loaded.n_layers = meta_int("n_layers");
  loaded.n_heads = meta_int("n_heads");
  loaded.max_positions = meta_int("max_positions");

  std::vector<std::string> problems;
  auto check_meta = [&](const char* key, int requested, int found) {
    if (requested > 0 && requested != found) {
      problems.push_back(std::string(key) + " (spec " + std::to_string(requested) + ", checkpoint " +
                         std::to_string(found) + ")");
    }
  };
  check_meta("d_model", spec.d_model, loaded.d_model);
  check_meta("n_layers", spec.n_layers, loaded.n_layers);
  check_meta("n_heads", spec.n_heads, loaded.n_heads);
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "checkpoint " << dir.string() << " disagrees with the backbone spec:";
    for (const auto& p : problems) msg << ' ' << p;
    throw CheckpointError(msg.str());
  }
  try {
    loaded.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid checkpoint meta: ") + e.what());
  }

  int ffn_dim = loaded.d_model * loaded.ffn_multiplier;
  if (loaded.n_layers > 0) {
    const auto probe = dir / "layer.0.ffn.in.weight.bin";
    if (std::filesystem::exists(probe)) {
      const auto shape = read_array(probe).shape;
      if (shape.size() == 2 && shape[0] > 0) ffn_dim = static_cast<int>(shape[0]);
    }
  }

  Decoder<T> decoder;
  decoder.spec_ = loaded;
  decoder.build(ffn_dim);
  decoder.spec_.ffn_multiplier = std::max(1, ffn_dim / loaded.d_model);

  ParameterRefs<T> base;
  decoder.collect_base(base);
  for (auto* p : base) {
    const auto path = dir / (p->name + ".bin");
    if (!std::filesystem::exists(path)) {
      problems.push_back(p->name + " (missing)");
      continue;
    }
    const auto array = read_array(path);
    std::uint64_t count = 1;
    for (auto d : array.shape) count *= d;
    const bool vector_ok = array.shape.size() == 1 && p->value.rows() == 1 &&
                           static_cast<Eigen::Index>(array.shape[0]) == p->value.cols();
    const bool matrix_ok = array.shape.size() == 2 &&
                           static_cast<Eigen::Index>(array.shape[0]) == p->value.rows() &&
                           static_cast<Eigen::Index>(array.shape[1]) == p->value.cols();
    if (!(vector_ok || matrix_ok) || count != array.data.size()) {
      std::ostringstream shape;
      for (std::size_t i = 0; i < array.shape.size(); ++i) shape << (i ? "x" : "") << array.shape[i];
      problems.push_back(p->name + " (shape " + shape.str() + ", expected " +
                         std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()) + ")");
      continue;
    }
    p->value = to_matrix<T>(array);
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "checkpoint " << dir.string() << " has bad weight entries:";
    for (const auto& p : problems) msg << ' ' << p;
    throw CheckpointError(msg.str());
  }
  decoder.set_base_trainable(false);
  return decoder;
}

template class Decoder<float>;
template class Decoder<double>;
template Decoder<float> load_pretrained<float>(const BackboneSpec&);
template Decoder<double> load_pretrained<double>(const BackboneSpec&);

}  // namespace llmfew
