#pragma once

#include "llmfew/dataset_io.hpp"

#include <cstdint>
#include <string>

namespace llmfew {

// Frequency-coded sinusoids: class c oscillates at (c + 1)·base_cycles
// cycles per series on every channel, with a fixed per-channel phase plus a
// small random phase jitter and Gaussian noise.
struct SinusoidOptions {
  int num_classes = 4;
  int dims = 3;
  int length = 128;
  int train_per_class = 1;
  int test_size = 40;
  double base_cycles = 2.0;
  double phase_jitter = 0.3;
  double noise = 0.1;
  std::uint64_t seed = 1234;
};

inline constexpr const char* kSyntheticDatasetName = "SyntheticSines";

DatasetPair make_sinusoid_dataset(const SinusoidOptions& options = {});

// True for names the experiment runner generates in memory.
bool is_synthetic_dataset(const std::string& name);

}  // namespace llmfew
