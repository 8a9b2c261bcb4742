#pragma once

#include "llmfew/layers.hpp"
#include "llmfew/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace llmfew {

enum class Projection { kQuery, kKey, kValue };

struct AdapterTarget {
  int layer = 0;
  Projection projection = Projection::kQuery;

  std::string id() const;  // "layer.<i>.attn.{q,k,v}"
  static AdapterTarget parse(const std::string& id);
  friend bool operator==(const AdapterTarget&, const AdapterTarget&) = default;
};

// Low-rank update of a frozen projection W₀ (d_out × d_in):
//   h = W₀h₀ + (α/r)·A(B h₀),  A: d_out × r,  B: r × d_in.
// B starts at zero so a fresh adapter leaves the projection unchanged.
template <typename T>
struct LoraAdapter {
  Parameter<T> a;
  Parameter<T> b;
  int rank = 0;
  double alpha = 0.0;
  AdapterTarget target;

  int d_in() const { return static_cast<int>(b.value.cols()); }
  int d_out() const { return static_cast<int>(a.value.rows()); }
  T scaling() const { return static_cast<T>(alpha / rank); }
  std::size_t trainable_size() const { return a.size() + b.size(); }
};

// A ~ N(0, 1/r), B = 0. Deterministic in `seed`.
template <typename T>
LoraAdapter<T> init_adapter(int d_in, int d_out, int rank, double alpha, std::uint64_t seed,
                            AdapterTarget target = {});

// x holds one input per row (T × d_in); returns T × d_out.
template <typename T>
Matrix<T> apply(const LoraAdapter<T>& adapter, const Matrix<T>& w0, const Matrix<T>& x);

// W₀ + (α/r)·AB.
template <typename T>
Matrix<T> merge(const LoraAdapter<T>& adapter, const Matrix<T>& w0);

// A frozen Linear with an optional adapter on top.
template <typename T>
class LoraLinear {
 public:
  struct Cache {
    Matrix<T> down;  // x Bᵀ
  };

  LoraLinear() = default;
  explicit LoraLinear(Linear<T> base) : base(std::move(base)) {}

  Matrix<T> forward(const Matrix<T>& x, Cache* cache = nullptr) const;
  Matrix<T> backward(const Matrix<T>& x, const Cache& cache, const Matrix<T>& grad_out);

  void collect(ParameterRefs<T>& out);

  Linear<T> base;
  std::optional<LoraAdapter<T>> adapter;
};

}  // namespace llmfew
