#include "llmfew/trainer.hpp"

#include "llmfew/errors.hpp"
#include "llmfew/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <set>

namespace llmfew {

std::string to_string(Precision p) { return p == Precision::kFloat32 ? "f32" : "f64"; }

Precision precision_from_string(const std::string& name) {
  if (name == "f32" || name == "float32") return Precision::kFloat32;
  if (name == "f64" || name == "float64") return Precision::kFloat64;
  if (name == "bf16" || name == "bfloat16") {
    throw ConfigError("bfloat16 training is not available in this build; use f32 or f64");
  }
  throw ConfigError("unknown precision '" + name + "'");
}

void TrainSchedule::validate() const {
  if (epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (!(base_lr > 0.0)) throw ArgumentError("base_lr must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ArgumentError("decay_factor must be in (0, 1]");
  if (decay_every < 1) throw ArgumentError("decay_every must be at least 1");
  if (batch_size < 0) throw ArgumentError("batch_size must be non-negative");
}

double lr_at_epoch(const TrainSchedule& schedule, int epoch) {
  if (epoch < 0 || epoch >= schedule.epochs) {
    throw ArgumentError("epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(schedule.epochs) + ")");
  }
  const double raw = schedule.base_lr * std::pow(schedule.decay_factor, epoch / schedule.decay_every);
  // Rounded to 15 significant digits so decimal schedules stay decimal
  // (2e-4 · 0.8² is 1.28e-4, not 1.2800000000000002e-4).
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.15g", raw);
  return std::strtod(buf, nullptr);
}

template <typename T>
void Adam<T>::step(const ParameterRefs<T>& params, double lr) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto* p : params) {
      m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++steps_;
  const T b1 = static_cast<T>(beta1_);
  const T b2 = static_cast<T>(beta2_);
  const T correction1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(steps_)));
  const T correction2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(steps_)));
  const T step_size = static_cast<T>(lr);
  const T eps = static_cast<T>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    if (!p->trainable) continue;
    m_[i] = b1 * m_[i] + (T(1) - b1) * p->grad;
    v_[i] = b2 * v_[i] + (T(1) - b2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= step_size * (m_[i].array() / correction1) /
                        ((v_[i].array() / correction2).sqrt() + eps);
  }
}

template <typename T>
double clip_grad_norm(const ParameterRefs<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) {
    if (p->trainable) sq += p->grad.template cast<double>().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / (norm + 1e-12));
    for (auto* p : params) {
      if (p->trainable) p->grad *= factor;
    }
  }
  return norm;
}

template <typename T>
void check_parameter_partition(Model<T>& model) {
  ParameterRefs<T> params;
  model.collect(params);
  std::set<std::string> trainable, frozen;
  for (const auto* p : params) (p->trainable ? trainable : frozen).insert(p->name);
  for (const auto& name : trainable) {
    if (frozen.count(name)) throw ConfigError("parameter '" + name + "' is both trainable and frozen");
    const bool allowed = name.starts_with("encoder.") || name.starts_with("projection.") ||
                         name.starts_with("lora.") || name.starts_with("head.") ||
                         model.spec().train_backbone;
    if (!allowed) throw ConfigError("backbone parameter '" + name + "' is unexpectedly trainable");
  }
}

template <typename T>
TrainHistory train(Model<T>& model, const Episode& episode, const Dataset& train_split,
                   const TrainSchedule& schedule) {
  schedule.validate();
  if (episode.train_indices.empty()) throw ArgumentError("episode is empty");
  check_parameter_partition(model);

  std::vector<Matrix<T>> inputs;
  std::vector<int> labels;
  for (const auto idx : episode.train_indices) {
    const auto& inst = train_split.instances.at(idx);
    inputs.push_back(model.tokens(inst.values));
    labels.push_back(inst.label);
  }

  ParameterRefs<T> params;
  model.collect(params);
  ParameterRefs<T> trainable;
  for (auto* p : params) {
    if (p->trainable) trainable.push_back(p);
  }

  Adam<T> optimizer(schedule.beta1, schedule.beta2, schedule.adam_eps);
  Rng batch_rng(schedule.seed, "batches");
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = schedule.batch_size > 0 ? static_cast<std::size_t>(schedule.batch_size)
                                                    : inputs.size();

  TrainHistory history;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double lr = lr_at_epoch(schedule, epoch);
    if (batch < inputs.size()) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[batch_rng.index(i)]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      for (auto* p : trainable) p->zero_grad();
      for (std::size_t i = start; i < stop; ++i) {
        const auto idx = order[i];
        Vector<T> probs;
        const T loss = model.accumulate_gradients(inputs[idx], labels[idx], &probs);
        Eigen::Index predicted = 0;
        probs.maxCoeff(&predicted);
        if (predicted == labels[idx]) ++correct;
        if (!std::isfinite(static_cast<double>(loss))) {
          throw TrainingAborted(epoch, "non-finite loss on train instance " +
                                           std::to_string(episode.train_indices[idx]));
        }
        loss_sum += static_cast<double>(loss);
      }
      const T inv = T(1) / static_cast<T>(stop - start);
      for (auto* p : trainable) p->grad *= inv;
      clip_grad_norm(trainable, schedule.clip_norm);
      optimizer.step(trainable, lr);
    }
    history.loss.push_back(loss_sum / static_cast<double>(inputs.size()));
    history.train_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(inputs.size()));
    history.learning_rate.push_back(lr);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Eigen::Index predicted = 0;
    model.forward_tokens(inputs[i]).maxCoeff(&predicted);
    if (predicted == labels[i]) ++correct;
  }
  history.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
  return history;
}

template <typename T>
double evaluate(const Model<T>& model, const Dataset& test_split) {
  if (test_split.instances.empty()) throw ArgumentError("cannot evaluate on an empty test split");
  std::vector<int> predicted, truth;
  for (const auto& inst : test_split.instances) {
    predicted.push_back(model.predict(inst.values));
    truth.push_back(inst.label);
  }
  return accuracy(predicted, truth);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (truth.empty()) throw ArgumentError("cannot score an empty prediction set");
  if (predicted.size() != truth.size()) throw ArgumentError("prediction and label counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

#define LLMFEW_INSTANTIATE(T)                                                                  \
  template class Adam<T>;                                                                      \
  template double clip_grad_norm<T>(const ParameterRefs<T>&, double);                          \
  template void check_parameter_partition<T>(Model<T>&);                                       \
  template TrainHistory train<T>(Model<T>&, const Episode&, const Dataset&, const TrainSchedule&); \
  template double evaluate<T>(const Model<T>&, const Dataset&);

LLMFEW_INSTANTIATE(float)
LLMFEW_INSTANTIATE(double)

#undef LLMFEW_INSTANTIATE

}  // namespace llmfew
