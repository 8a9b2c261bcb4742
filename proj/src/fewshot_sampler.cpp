#include "llmfew/fewshot_sampler.hpp"

#include "llmfew/errors.hpp"
#include "llmfew/rng.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace llmfew {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& train) {
  std::vector<std::vector<std::size_t>> by_class(train.num_classes());
  for (std::size_t i = 0; i < train.instances.size(); ++i) {
    by_class.at(static_cast<std::size_t>(train.instances[i].label)).push_back(i);
  }
  return by_class;
}

std::vector<std::size_t> sorted_class_order(const Dataset& train) {
  std::vector<std::size_t> order(train.num_classes());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return train.class_names[a] < train.class_names[b];
  });
  return order;
}

}  // namespace

Episode sample_episode(const Dataset& train, int shots, std::uint64_t seed) {
  if (shots <= 0) throw ArgumentError("K must be positive, got " + std::to_string(shots));
  if (train.instances.empty()) throw ArgumentError("cannot sample from an empty train split");

  const auto by_class = indices_by_class(train);
  Rng rng(seed, train.name);
  Episode episode;
  episode.shots = shots;
  episode.seed = seed;

  for (const auto c : sorted_class_order(train)) {
    auto pool = by_class[c];
    if (pool.empty()) {
      throw ProtocolError("class '" + train.class_names[c] + "' has no train samples");
    }
    // Partial Fisher-Yates: the first `take` slots become the sample.
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(shots));
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    episode.train_indices.insert(episode.train_indices.end(), pool.begin(),
                                 pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return episode;
}

Episode full_episode(const Dataset& train) {
  if (train.instances.empty()) throw ArgumentError("cannot sample from an empty train split");
  Episode episode;
  episode.train_indices.resize(train.instances.size());
  std::iota(episode.train_indices.begin(), episode.train_indices.end(), std::size_t{0});
  return episode;
}

std::size_t expected_episode_size(const Dataset& train, int shots) {
  std::size_t total = 0;
  for (const auto& members : indices_by_class(train)) {
    total += std::min(members.size(), static_cast<std::size_t>(shots));
  }
  return total;
}

}  // namespace llmfew
