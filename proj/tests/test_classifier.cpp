#include "llmfew/classifier.hpp"
#include "llmfew/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numeric>

using namespace llmfew;

TEST_CASE("fuse examples") {
  Matrix<double> he(1, 2), hd(1, 2);
  he << 1, -2;
  hd << 0.5, 1;
  const auto h = fuse(he, hd);
  CHECK(h(0, 0) == 1.5);
  CHECK(h(0, 1) == 0.0);

  Rng rng(0);
  const auto d = testing::random_matrix<double>(4, 3, rng);
  CHECK(fuse(Matrix<double>(Matrix<double>::Zero(4, 3)), d) == Matrix<double>(d.cwiseMax(0.0)));
  CHECK(fuse(Matrix<double>(-d), d).isZero(0.0));
  CHECK_THROWS_AS(fuse(d, Matrix<double>(Matrix<double>::Zero(3, 3))), ConfigError);
}

TEST_CASE("cross entropy examples") {
  Vector<double> uniform = Vector<double>::Constant(4, 0.25);
  CHECK(cross_entropy(uniform, 2) == doctest::Approx(std::log(4.0)));
  CHECK(cross_entropy(uniform, 2) == doctest::Approx(1.3863).epsilon(1e-4));
  Vector<double> sure = Vector<double>::Zero(3);
  sure(1) = 1.0;
  CHECK(cross_entropy(sure, 1) == 0.0);
  Vector<double> p(3);
  p << 0.5, 0.25, 0.25;
  CHECK(cross_entropy(p, 0) == doctest::Approx(0.6931).epsilon(1e-4));
  // Zero probability is clamped instead of producing infinity.
  CHECK(std::isfinite(cross_entropy(sure, 0)));
  CHECK_THROWS_AS(cross_entropy(p, 3), ArgumentError);
}

TEST_CASE("head without normalization is a plain softmax") {
  Rng rng(1);
  ClassifierHead<double> head(1, 1, 4, LnPosition::kNone, rng);
  head.linear.weight.value << 2, 0, 0, 0;
  head.linear.bias.value.setZero();
  const auto probs = head.forward(Matrix<double>::Ones(1, 1));
  CHECK(probs(0) == doctest::Approx(0.711).epsilon(1e-3));
  for (int i = 1; i < 4; ++i) CHECK(probs(i) == doctest::Approx(0.0963).epsilon(1e-3));
}

TEST_CASE("two equal logits normalize to a coin flip") {
  Rng rng(2);
  ClassifierHead<double> head(2, 3, 2, LnPosition::kPaper, rng);
  head.linear.weight.value.setZero();
  head.linear.bias.value.setConstant(0.7);
  const auto probs = head.forward(Matrix<double>::Ones(2, 3));
  CHECK(probs(0) == doctest::Approx(0.5));
  CHECK(probs(1) == doctest::Approx(0.5));
}

TEST_CASE("head outputs are distributions") {
  Rng rng(3);
  for (auto pos : {LnPosition::kPaper, LnPosition::kNone}) {
    ClassifierHead<float> head(5, 8, 6, pos, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const auto probs = head.forward(testing::random_matrix<float>(5, 8, rng, 3.0));
      CHECK(std::abs(probs.sum() - 1.0f) < 1e-6f);
      CHECK(probs.minCoeff() >= 0.0f);
    }
  }
  ClassifierHead<float> head(5, 8, 6, LnPosition::kPaper, rng);
  CHECK_THROWS_AS(head.forward(Matrix<float>::Zero(4, 8)), ConfigError);
}

TEST_CASE("softmax is permutation-equivariant and shift-invariant") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Vector<double> logits = testing::random_matrix<double>(7, 1, rng, 2.0);
    const auto p = softmax(logits);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 6; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.index(static_cast<std::size_t>(i) + 1)]);
    Vector<double> permuted(7);
    for (int i = 0; i < 7; ++i) permuted(i) = logits(perm[static_cast<std::size_t>(i)]);
    const auto pp = softmax(permuted);
    for (int i = 0; i < 7; ++i) CHECK(pp(i) == doctest::Approx(p(perm[static_cast<std::size_t>(i)])));

    Eigen::Index a = 0, b = 0;
    p.maxCoeff(&a);
    softmax(Vector<double>(logits.array() + 5.0)).maxCoeff(&b);
    CHECK(a == b);
  }
}

TEST_CASE("fused head gradients match finite differences") {
  Rng rng(5);
  const int tokens = 7, width = 5, classes = 4;
  for (auto pos : {LnPosition::kPaper, LnPosition::kNone}) {
    ClassifierHead<double> head(tokens, width, classes, pos, rng);
    head.norm.scale.value = testing::random_matrix<double>(1, classes, rng, 0.3).array() + 1.0;
    head.norm.shift.value = testing::random_matrix<double>(1, classes, rng, 0.3);
    auto he = testing::random_matrix<double>(tokens, width, rng);
    auto hd = testing::random_matrix<double>(tokens, width, rng);
    const int label = 2;
    auto loss = [&] { return cross_entropy(head.forward(fuse(he, hd)), label); };

    ParameterRefs<double> params;
    head.collect(params);
    for (auto* p : params) p->zero_grad();
    ClassifierHead<double>::Cache cache;
    const auto fused = fuse(he, hd);
    head.forward(fused, &cache);
    const auto grad_fused = head.backward(cache, label, tokens, width);
    const auto grad_pre = fuse_backward(fused, grad_fused);
    for (auto* p : params) {
      if (!p->trainable) continue;
      INFO(p->name);
      CHECK(testing::max_relative_error(p->value, p->grad, loss) < 1e-4);
    }
    CHECK(testing::max_relative_error(he, grad_pre, loss) < 1e-4);
    CHECK(testing::max_relative_error(hd, grad_pre, loss) < 1e-4);
  }
}
