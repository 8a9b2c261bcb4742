#include "llmfew/lora.hpp"

#include "llmfew/errors.hpp"
#include "llmfew/rng.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

namespace llmfew {

std::string AdapterTarget::id() const {
  const char* suffix = projection == Projection::kQuery ? "q"
                       : projection == Projection::kKey ? "k"
                                                        : "v";
  return "layer." + std::to_string(layer) + ".attn." + suffix;
}

AdapterTarget AdapterTarget::parse(const std::string& id) {
  static const std::regex pattern(R"(layer\.(\d+)\.attn\.([qkv]))");
  std::smatch match;
  if (!std::regex_match(id, match, pattern)) throw CheckpointError("bad adapter target '" + id + "'");
  AdapterTarget t;
  t.layer = std::stoi(match[1].str());
  const auto p = match[2].str();
  t.projection = p == "q" ? Projection::kQuery : p == "k" ? Projection::kKey : Projection::kValue;
  return t;
}

template <typename T>
LoraAdapter<T> init_adapter(int d_in, int d_out, int rank, double alpha, std::uint64_t seed,
                            AdapterTarget target) {
  if (d_in <= 0 || d_out <= 0) throw ArgumentError("adapter dimensions must be positive");
  if (rank < 1 || rank > std::min(d_in, d_out)) {
    throw ArgumentError("LoRA rank " + std::to_string(rank) + " outside [1, " +
                        std::to_string(std::min(d_in, d_out)) + "]");
  }
  if (!(alpha > 0.0)) throw ArgumentError("LoRA alpha must be positive");

  LoraAdapter<T> adapter;
  adapter.rank = rank;
  adapter.alpha = alpha;
  adapter.target = target;
  const auto prefix = "lora." + target.id();
  Matrix<T> a(d_out, rank);
  Rng rng(seed, prefix);
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(rank));
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = static_cast<T>(std_dev * rng.normal());
  adapter.a = Parameter<T>(prefix + ".A", std::move(a));
  adapter.b = Parameter<T>(prefix + ".B", Matrix<T>::Zero(rank, d_in));
  return adapter;
}

namespace {
template <typename T>
void check_shapes(const LoraAdapter<T>& adapter, const Matrix<T>& w0) {
  if (w0.rows() != adapter.d_out() || w0.cols() != adapter.d_in()) {
    throw ConfigError("adapter " + adapter.target.id() + " is " + std::to_string(adapter.d_out()) +
                      "x" + std::to_string(adapter.d_in()) + " but the base weight is " +
                      std::to_string(w0.rows()) + "x" + std::to_string(w0.cols()));
  }
}
}  // namespace

template <typename T>
Matrix<T> apply(const LoraAdapter<T>& adapter, const Matrix<T>& w0, const Matrix<T>& x) {
  check_shapes(adapter, w0);
  if (x.cols() != w0.cols()) throw ConfigError("adapter input width mismatch");
  Matrix<T> y = x * w0.transpose();
  y.noalias() += adapter.scaling() * ((x * adapter.b.value.transpose()) * adapter.a.value.transpose());
  return y;
}

template <typename T>
Matrix<T> merge(const LoraAdapter<T>& adapter, const Matrix<T>& w0) {
  check_shapes(adapter, w0);
  return w0 + adapter.scaling() * (adapter.a.value * adapter.b.value);
}

template <typename T>
Matrix<T> LoraLinear<T>::forward(const Matrix<T>& x, Cache* cache) const {
  Matrix<T> y = base.forward(x);
  if (adapter) {
    Matrix<T> down = x * adapter->b.value.transpose();
    y.noalias() += adapter->scaling() * (down * adapter->a.value.transpose());
    if (cache) cache->down = std::move(down);
  }
  return y;
}

template <typename T>
Matrix<T> LoraLinear<T>::backward(const Matrix<T>& x, const Cache& cache, const Matrix<T>& grad_out) {
  Matrix<T> grad_x = base.backward(x, grad_out);
  if (adapter) {
    const T s = adapter->scaling();
    const Matrix<T> grad_down = s * (grad_out * adapter->a.value);  // T × r
    if (adapter->a.trainable) adapter->a.grad.noalias() += s * (grad_out.transpose() * cache.down);
    if (adapter->b.trainable) adapter->b.grad.noalias() += grad_down.transpose() * x;
    grad_x.noalias() += grad_down * adapter->b.value;
  }
  return grad_x;
}

template <typename T>
void LoraLinear<T>::collect(ParameterRefs<T>& out) {
  base.collect(out);
  if (adapter) {
    out.push_back(&adapter->a);
    out.push_back(&adapter->b);
  }
}

#define LLMFEW_INSTANTIATE(T)                                                                   \
  template LoraAdapter<T> init_adapter<T>(int, int, int, double, std::uint64_t, AdapterTarget); \
  template Matrix<T> apply<T>(const LoraAdapter<T>&, const Matrix<T>&, const Matrix<T>&);       \
  template Matrix<T> merge<T>(const LoraAdapter<T>&, const Matrix<T>&);                         \
  template class LoraLinear<T>;

LLMFEW_INSTANTIATE(float)
LLMFEW_INSTANTIATE(double)

#undef LLMFEW_INSTANTIATE

}  // namespace llmfew
