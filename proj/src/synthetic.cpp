#include "llmfew/synthetic.hpp"

#include "llmfew/errors.hpp"
#include "llmfew/rng.hpp"

#include <cmath>
#include <numbers>

namespace llmfew {

namespace {

MultivariateSeries make_instance(const SinusoidOptions& o, int label, Rng& rng) {
  MultivariateSeries s;
  s.label = label;
  s.values.resize(o.dims, o.length);
  const double cycles = (label + 1) * o.base_cycles;
  for (int m = 0; m < o.dims; ++m) {
    const double phase = 0.7 * m + rng.uniform(-o.phase_jitter, o.phase_jitter);
    for (int t = 0; t < o.length; ++t) {
      const double angle = 2.0 * std::numbers::pi * cycles * t / o.length + phase;
      s.values(m, t) = std::sin(angle) + o.noise * rng.normal();
    }
  }
  return s;
}

}  // namespace

DatasetPair make_sinusoid_dataset(const SinusoidOptions& o) {
  if (o.num_classes < 2 || o.dims < 1 || o.length < 1 || o.train_per_class < 1 || o.test_size < 1) {
    throw ArgumentError("invalid synthetic dataset options");
  }
  Rng rng(o.seed, kSyntheticDatasetName);
  DatasetPair pair;
  for (Dataset* d : {&pair.train, &pair.test}) {
    d->name = kSyntheticDatasetName;
    d->dims = static_cast<std::size_t>(o.dims);
    d->length = static_cast<std::size_t>(o.length);
    for (int c = 0; c < o.num_classes; ++c) d->class_names.push_back("c" + std::to_string(c));
  }
  pair.train.split = Split::kTrain;
  pair.test.split = Split::kTest;
  for (int c = 0; c < o.num_classes; ++c) {
    for (int i = 0; i < o.train_per_class; ++i) pair.train.instances.push_back(make_instance(o, c, rng));
  }
  for (int i = 0; i < o.test_size; ++i) {
    pair.test.instances.push_back(make_instance(o, i % o.num_classes, rng));
  }
  return pair;
}

bool is_synthetic_dataset(const std::string& name) {
  return name == kSyntheticDatasetName || name == "synthetic";
}

}  // namespace llmfew
