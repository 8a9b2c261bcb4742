#include "llmfew/classifier.hpp"

#include "llmfew/errors.hpp"

#include <algorithm>
#include <cmath>

namespace llmfew {

std::string to_string(LnPosition pos) { return pos == LnPosition::kPaper ? "paper" : "none"; }

LnPosition ln_position_from_string(const std::string& name) {
  if (name == "paper") return LnPosition::kPaper;
  if (name == "none") return LnPosition::kNone;
  throw ConfigError("unknown ln_position '" + name + "'");
}

template <typename T>
Matrix<T> fuse(const Matrix<T>& encoded, const Matrix<T>& decoded) {
  if (encoded.rows() != decoded.rows() || encoded.cols() != decoded.cols()) {
    throw ConfigError("fuse: encoder output is " + std::to_string(encoded.rows()) + "x" +
                      std::to_string(encoded.cols()) + ", decoder output is " +
                      std::to_string(decoded.rows()) + "x" + std::to_string(decoded.cols()));
  }
  return (encoded + decoded).cwiseMax(T(0));
}

template <typename T>
Matrix<T> fuse_backward(const Matrix<T>& fused, const Matrix<T>& grad_fused) {
  return fused.binaryExpr(grad_fused, [](T h, T g) { return h > T(0) ? g : T(0); });
}

template <typename T>
T cross_entropy(const Vector<T>& probs, int label) {
  if (label < 0 || label >= probs.size()) {
    throw ArgumentError("label " + std::to_string(label) + " outside [0, " +
                        std::to_string(probs.size()) + ")");
  }
  return -std::log(std::max(probs(label), static_cast<T>(1e-12)));
}

template <typename T>
ClassifierHead<T>::ClassifierHead(int num_tokens, int d_model, int num_classes,
                                  LnPosition ln_position, Rng& rng)
    : linear("head.linear", num_tokens * d_model, num_classes),
      norm("head.norm", num_classes),
      ln_position_(ln_position) {
  if (num_classes < 2) throw ConfigError("classifier head needs at least two classes");
  linear.init_uniform(rng);
}

template <typename T>
Vector<T> ClassifierHead<T>::forward(const Matrix<T>& fused, Cache* cache) const {
  if (fused.size() != input_width()) {
    throw ConfigError("head expects " + std::to_string(input_width()) + " inputs, got " +
                      std::to_string(fused.size()));
  }
  // Row-major storage makes the raw buffer the position-major flattening.
  const Eigen::Map<const RowVector<T>> flat(fused.data(), fused.size());
  Matrix<T> logits = linear.forward(flat);
  if (ln_position_ == LnPosition::kPaper) {
    logits = norm.forward(logits, cache ? &cache->ln : nullptr);
  }
  Vector<T> probs = softmax<T>(logits.row(0).transpose());
  if (cache) {
    cache->flat = flat;
    cache->probs = probs;
  }
  return probs;
}

template <typename T>
Matrix<T> ClassifierHead<T>::backward(const Cache& cache, int label, Eigen::Index rows,
                                      Eigen::Index cols) {
  if (label < 0 || label >= cache.probs.size()) throw ArgumentError("label out of range");
  Matrix<T> grad = cache.probs.transpose();
  grad(0, label) -= T(1);
  if (ln_position_ == LnPosition::kPaper) grad = norm.backward(cache.ln, grad);
  const Matrix<T> grad_flat = linear.backward(cache.flat, grad);
  Matrix<T> grad_fused(rows, cols);
  std::copy(grad_flat.data(), grad_flat.data() + grad_flat.size(), grad_fused.data());
  return grad_fused;
}

template <typename T>
void ClassifierHead<T>::collect(ParameterRefs<T>& out) {
  linear.collect(out);
  if (ln_position_ == LnPosition::kPaper) norm.collect(out);
}

#define LLMFEW_INSTANTIATE(T)                                                    \
  template Matrix<T> fuse<T>(const Matrix<T>&, const Matrix<T>&);                \
  template Matrix<T> fuse_backward<T>(const Matrix<T>&, const Matrix<T>&);       \
  template T cross_entropy<T>(const Vector<T>&, int);                            \
  template class ClassifierHead<T>;

LLMFEW_INSTANTIATE(float)
LLMFEW_INSTANTIATE(double)

#undef LLMFEW_INSTANTIATE

}  // namespace llmfew
