#pragma once

#include "llmfew/dataset_io.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace llmfew {

// The K-shot training subset for one run. `shots` is empty for the
// degenerate "full" episode that uses the whole train split.
struct Episode {
  std::vector<std::size_t> train_indices;
  std::optional<int> shots;
  std::uint64_t seed = 0;
};

// Draws min(K, available_c) instances of every class c without
// replacement. Classes are visited in sorted-name order; the generator is
// seeded from `seed` mixed with a stable hash of the dataset name.
Episode sample_episode(const Dataset& train, int shots, std::uint64_t seed);

// Every train instance, in file order.
Episode full_episode(const Dataset& train);

// Σ_c min(K, available_c), computed from class counts alone.
std::size_t expected_episode_size(const Dataset& train, int shots);

}  // namespace llmfew
