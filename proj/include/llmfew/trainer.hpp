#pragma once

#include "llmfew/dataset_io.hpp"
#include "llmfew/fewshot_sampler.hpp"
#include "llmfew/variants.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace llmfew {

enum class Precision { kFloat32, kFloat64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& name);

struct TrainSchedule {
  int epochs = 200;
  double base_lr = 2e-4;
  double decay_factor = 0.8;
  int decay_every = 50;
  int batch_size = 0;  // 0: the whole episode in one step
  double clip_norm = 1.0;  // ≤ 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  Precision precision = Precision::kFloat32;
  std::uint64_t seed = 0;

  void validate() const;
};

// base_lr · decay_factor^⌊epoch / decay_every⌋ for 0 ≤ epoch < epochs,
// rounded to 15 significant digits.
double lr_at_epoch(const TrainSchedule& schedule, int epoch);

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> train_accuracy;
  std::vector<double> learning_rate;
  // Accuracy on the episode after the last update.
  double final_train_accuracy = 0.0;
};

// Adam without weight decay over the trainable parameters.
template <typename T>
class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(const ParameterRefs<T>& params, double lr);

 private:
  double beta1_, beta2_, eps_;
  long steps_ = 0;
  std::vector<Matrix<T>> m_, v_;
};

// Scales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
template <typename T>
double clip_grad_norm(const ParameterRefs<T>& params, double max_norm);

// Throws ConfigError unless trainable parameters are exactly the encoder /
// projection, LoRA and head parameters (backbone base weights included only
// when the model was built with train_backbone).
template <typename T>
void check_parameter_partition(Model<T>& model);

// Optimizes the model on the episode. Throws TrainingAborted on a
// non-finite loss.
template <typename T>
TrainHistory train(Model<T>& model, const Episode& episode, const Dataset& train_split,
                   const TrainSchedule& schedule);

// Fraction of `test_split` whose argmax prediction equals the label.
template <typename T>
double evaluate(const Model<T>& model, const Dataset& test_split);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace llmfew
