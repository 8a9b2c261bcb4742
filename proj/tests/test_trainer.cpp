#include "llmfew/errors.hpp"
#include "llmfew/synthetic.hpp"
#include "llmfew/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>

using namespace llmfew;

namespace {

VariantSpec small_spec(Variant v) {
  VariantSpec spec = with_variant(VariantSpec{}, v);
  spec.backbone.d_model = 16;
  spec.backbone.n_layers = 1;
  spec.backbone.n_heads = 2;
  spec.encoder.hidden_channels = 16;
  spec.patch_len = 16;
  spec.stride = 8;
  return spec;
}

DatasetMeta meta_of(const Dataset& d) {
  return {static_cast<int>(d.dims), static_cast<int>(d.length), static_cast<int>(d.num_classes())};
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainSchedule s;
  CHECK(lr_at_epoch(s, 0) == 2e-4);
  CHECK(lr_at_epoch(s, 49) == 2e-4);
  CHECK(lr_at_epoch(s, 50) == 1.6e-4);
  CHECK(lr_at_epoch(s, 149) == 1.28e-4);
  CHECK(lr_at_epoch(s, 199) == 1.024e-4);
  CHECK_THROWS_AS(lr_at_epoch(s, 200), ArgumentError);
  s.epochs = 0;
  CHECK_THROWS_AS(s.validate(), ArgumentError);
}

TEST_CASE("precision names") {
  CHECK(precision_from_string("f32") == Precision::kFloat32);
  CHECK(precision_from_string("float64") == Precision::kFloat64);
  CHECK_THROWS_AS(precision_from_string("bf16"), ConfigError);
  CHECK_THROWS_AS(precision_from_string("f16"), ConfigError);
}

TEST_CASE("accuracy examples") {
  CHECK(accuracy({0, 1, 2}, {0, 1, 2}) == 1.0);
  CHECK(accuracy({0, 0, 0, 0}, {0, 1, 0, 1}) == 0.5);
  std::vector<int> truth(205, 1), pred(205, 1);
  for (int i = 0; i < 41; ++i) pred[static_cast<std::size_t>(i)] = 0;
  CHECK(accuracy(pred, truth) == doctest::Approx(0.8));
  CHECK_THROWS_AS(accuracy({}, {}), ArgumentError);
  CHECK_THROWS_AS(accuracy({1}, {1, 2}), ArgumentError);
}

TEST_CASE("one Adam step matches a hand-written update") {
  Parameter<double> p("w", Matrix<double>::Constant(1, 3, 1.0));
  p.grad << 0.5, -2.0, 0.0;
  Adam<double> adam(0.9, 0.999, 1e-8);
  ParameterRefs<double> params{&p};
  adam.step(params, 0.1);
  // First step: m̂ = g, v̂ = g², so the update is lr·g/(|g| + ε).
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(p.value(0, 1) == doctest::Approx(1.0 + 0.1 * 2.0 / (2.0 + 1e-8)));
  CHECK(p.value(0, 2) == 1.0);
}

TEST_CASE("gradient clipping bounds the global norm") {
  Parameter<double> a("a", Matrix<double>::Zero(1, 2)), b("b", Matrix<double>::Zero(1, 1));
  a.grad << 3.0, 0.0;
  b.grad << 4.0;
  ParameterRefs<double> params{&a, &b};
  CHECK(clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad(0, 0) == doctest::Approx(0.6));
  CHECK(b.grad(0, 0) == doctest::Approx(0.8));
  CHECK(clip_grad_norm(params, 10.0) == doctest::Approx(1.0));
}

TEST_CASE("synthetic one-shot episode is memorized") {
  const auto data = make_sinusoid_dataset();
  auto model = build<float>(small_spec(Variant::kFull), meta_of(data.train), 0);
  const auto episode = sample_episode(data.train, 1, 0);
  TrainSchedule schedule;
  const auto history = train(model, episode, data.train, schedule);
  CHECK(history.loss.size() == 200);
  CHECK(history.final_train_accuracy == 1.0);
  CHECK(history.loss.back() < history.loss.front());
  CHECK(history.learning_rate.front() == 2e-4);
}

TEST_CASE("frozen variant leaves backbone weights untouched") {
  const auto data = make_sinusoid_dataset();
  auto model = build<float>(small_spec(Variant::kFrozen), meta_of(data.train), 1);
  ParameterRefs<float> params;
  model.backbone->collect(params);
  std::map<std::string, Matrix<float>> before;
  for (auto* p : params) before[p->name] = p->value;
  TrainSchedule schedule;
  schedule.epochs = 20;
  train(model, sample_episode(data.train, 1, 1), data.train, schedule);
  for (auto* p : params) CHECK(p->value == before.at(p->name));
}

TEST_CASE("mini-batches and full batches both train") {
  const auto data = make_sinusoid_dataset();
  auto model = build<double>(small_spec(Variant::kNoLlm), meta_of(data.train), 2);
  TrainSchedule schedule;
  schedule.epochs = 5;
  schedule.batch_size = 3;
  const auto history = train(model, full_episode(data.train), data.train, schedule);
  CHECK(history.loss.size() == 5);
}

TEST_CASE("non-finite loss aborts training") {
  auto data = make_sinusoid_dataset();
  data.train.instances[0].values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  auto model = build<float>(small_spec(Variant::kFull), meta_of(data.train), 3);
  TrainSchedule schedule;
  schedule.epochs = 3;
  try {
    train(model, full_episode(data.train), data.train, schedule);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("evaluation on an empty split") {
  const auto data = make_sinusoid_dataset();
  auto model = build<float>(small_spec(Variant::kFull), meta_of(data.train), 4);
  Dataset empty = data.test;
  empty.instances.clear();
  CHECK_THROWS_AS(evaluate(model, empty), ArgumentError);
}
