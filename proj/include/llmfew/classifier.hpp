#pragma once

#include "llmfew/layers.hpp"
#include "llmfew/rng.hpp"
#include "llmfew/tensor.hpp"

#include <string>

namespace llmfew {

// Where the head's LayerNorm sits. `kPaper` normalizes the N logits after
// the linear map (Linear → LN → Softmax); `kNone` drops it.
enum class LnPosition { kPaper, kNone };

std::string to_string(LnPosition pos);
LnPosition ln_position_from_string(const std::string& name);

// H = ReLU(H_e + H_d).
template <typename T>
Matrix<T> fuse(const Matrix<T>& encoded, const Matrix<T>& decoded);

// Routes ∂L/∂H back through the ReLU; `fused` is the forward output.
template <typename T>
Matrix<T> fuse_backward(const Matrix<T>& fused, const Matrix<T>& grad_fused);

// −log(max(probs[label], 1e-12)).
template <typename T>
T cross_entropy(const Vector<T>& probs, int label);

// Softmax(LN(Linear(flatten(H)))) with position-major flattening: token 0's
// d_model features come first.
template <typename T>
class ClassifierHead {
 public:
  struct Cache {
    RowVector<T> flat;
    typename LayerNorm<T>::Cache ln;
    Vector<T> probs;
  };

  ClassifierHead() = default;
  ClassifierHead(int num_tokens, int d_model, int num_classes, LnPosition ln_position, Rng& rng);

  int input_width() const { return linear.in_features(); }
  int num_classes() const { return linear.out_features(); }
  LnPosition ln_position() const { return ln_position_; }

  Vector<T> forward(const Matrix<T>& fused, Cache* cache = nullptr) const;

  // Cross-entropy of the cached forward pass; accumulates head gradients
  // and returns ∂L/∂H (same shape as the forward input).
  Matrix<T> backward(const Cache& cache, int label, Eigen::Index rows, Eigen::Index cols);

  void collect(ParameterRefs<T>& out);

  Linear<T> linear;
  LayerNorm<T> norm;

 private:
  LnPosition ln_position_ = LnPosition::kPaper;
};

template <typename T>
Vector<T> classify(const Matrix<T>& fused, const ClassifierHead<T>& head) {
  return head.forward(fused);
}

}  // namespace llmfew
