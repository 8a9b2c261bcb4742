#include "llmfew/errors.hpp"
#include "llmfew/patching.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace llmfew;

TEST_CASE("patch counts match the published grid") {
  CHECK(num_patches(152, 16, 8) == 19);
  CHECK(num_patches(1751, 64, 32) == 54);
  for (std::size_t s = 1; s <= 10; ++s) CHECK(num_patches(10, 10, s) == 2);
}

TEST_CASE("num_patches agrees with start enumeration") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t length = 1 + rng.index(400);
    const std::size_t p = 1 + rng.index(length);
    const std::size_t s = 1 + rng.index(p);
    CHECK(num_patches(length, p, s) == testing::enumerate_patch_starts(length, p, s));
  }
}

TEST_CASE("invalid patch arguments") {
  CHECK_THROWS_AS(num_patches(10, 11, 5), ArgumentError);
  CHECK_THROWS_AS(num_patches(10, 4, 5), ArgumentError);
  CHECK_THROWS_AS(num_patches(10, 0, 1), ArgumentError);
  CHECK_THROWS_AS(num_patches(10, 4, 0), ArgumentError);
}

TEST_CASE("hand-enumerated patches") {
  Matrix<double> x(1, 4);
  x << 1, 2, 3, 4;
  const auto p = patch(x, 2, 2);
  REQUIRE(p.num_patches() == 3);
  const double expected[3][2] = {{1, 2}, {3, 4}, {4, 4}};
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t o = 0; o < 2; ++o) CHECK(p.at(0, o, j) == expected[j][o]);
  }
}

TEST_CASE("constant series gives constant patches") {
  const Matrix<double> x = Matrix<double>::Constant(2, 13, 4.5);
  const auto p = patch(x, 4, 3);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t j = 0; j < p.num_patches(); ++j) CHECK(p.at(m, o, j) == 4.5);
}

TEST_CASE("channels are patched independently") {
  Rng rng(1);
  const auto x = testing::random_matrix<double>(3, 37, rng);
  const auto all = patch(x, 8, 4);
  for (Eigen::Index m = 0; m < 3; ++m) {
    const auto single = patch(Matrix<double>(x.row(m)), 8, 4);
    for (std::size_t o = 0; o < 8; ++o)
      for (std::size_t j = 0; j < all.num_patches(); ++j)
        CHECK(all.at(static_cast<std::size_t>(m), o, j) == single.at(0, o, j));
  }
}

TEST_CASE("token rows are channel-major") {
  Rng rng(2);
  const auto x = testing::random_matrix<double>(3, 20, rng);
  const auto p = patch(x, 5, 2);
  const auto tokens = p.tokens();
  CHECK(tokens.rows() == static_cast<Eigen::Index>(p.num_patches()));
  CHECK(tokens.cols() == 15);
  for (std::size_t j = 0; j < p.num_patches(); ++j)
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t o = 0; o < 5; ++o)
        CHECK(tokens(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m * 5 + o)) == p.at(m, o, j));
}

TEST_CASE("default stride is half the patch length") {
  CHECK(default_stride(16) == 8);
  CHECK(default_stride(128) == 64);
  CHECK(default_stride(1) == 1);
}
