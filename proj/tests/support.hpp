#pragma once

#include "llmfew/rng.hpp"
#include "llmfew/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>

namespace llmfew::testing {

template <typename T>
Matrix<T> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(scale * rng.normal());
  return m;
}

// Counts patch starts jS (j ≥ 0) whose window [jS, jS + P) fits inside the
// sequence after it has been end-padded with S copies of its last value.
inline std::size_t enumerate_patch_starts(std::size_t length, std::size_t patch_len, std::size_t stride) {
  std::size_t count = 0;
  for (std::size_t start = 0; start + patch_len <= length + stride; start += stride) ++count;
  return count;
}

// Central-difference check of analytic gradients. `loss` evaluates the
// scalar objective at the current parameter values; `analytic` holds the
// gradient to compare against. Returns the worst relative error
// |a − n| / max(|a|, |n|), ignoring entries where both are below `floor`.
inline double max_relative_error(Matrix<double>& values, const Matrix<double>& analytic,
                                 const std::function<double()>& loss, double step = 1e-6,
                                 double floor = 1e-9) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double saved = values.data()[i];
    values.data()[i] = saved + step;
    const double up = loss();
    values.data()[i] = saved - step;
    const double down = loss();
    values.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.data()[i];
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale < floor) continue;
    const double rel = std::abs(a - numeric) / scale;
    worst = std::max(worst, rel);
  }
  return worst;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("llmfew_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path data_dir() { return LLMFEW_DATA_DIR; }

}  // namespace llmfew::testing
