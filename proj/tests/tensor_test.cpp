#include <gtest/gtest.h>

#include <cmath>

#include "adadim/tensor.hpp"
#include "test_util.hpp"

using namespace adadim;
using adadim::testing::make;
using adadim::testing::random_tensor;

namespace {

// Independent triple-loop oracle, float64 accumulation.
Tensor2D naive_forward(const Tensor2D& w, const Tensor2D& x) {
  Tensor2D y(x.rows(), w.rows());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double s = 0;
      for (std::size_t i = 0; i < x.cols(); ++i) s += double(x(t, i)) * double(w(o, i));
      y(t, o) = float(s);
    }
  return y;
}

}  // namespace

TEST(Forward, IdentityWeight) {
  auto y = forward(make(2, 2, {1, 0, 0, 1}), make(1, 2, {3, 4}));
  EXPECT_EQ(y, make(1, 2, {3, 4}));
}

TEST(Forward, ZeroWeightGivesZeros) {
  auto x = random_tensor(5, 7, 1);
  auto y = forward(Tensor2D(3, 7), x);
  EXPECT_EQ(y, Tensor2D(5, 3));
}

TEST(Forward, HandEvaluatedDotProducts) {
  auto w = make(2, 2, {1, 2, 3, 4});
  auto x = make(2, 2, {1, 1, 2, 0});
  EXPECT_EQ(forward(w, x), make(2, 2, {3, 7, 2, 6}));
  EXPECT_EQ(forward(w, x), naive_forward(w, x));
}

TEST(Forward, MatchesNaiveOracleOnRandom) {
  auto w = random_tensor(9, 13, 2);
  auto x = random_tensor(11, 13, 3);
  EXPECT_TRUE(identical(forward(w, x), naive_forward(w, x)));
}

TEST(Forward, DimensionMismatchNamesShapes) {
  try {
    forward(Tensor2D(2, 3), Tensor2D(4, 5));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4x5]"), std::string::npos);
  }
}

TEST(Forward, CountsCalls) {
  const auto before = forward_call_count();
  forward(Tensor2D(1, 1), Tensor2D(1, 1));
  forward(Tensor2D(1, 1), Tensor2D(1, 1));
  EXPECT_EQ(forward_call_count() - before, 2u);
}

TEST(ForwardProperty, Linearity) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto w = random_tensor(6, 10, 100 + seed, 10.0f);
    auto x1 = random_tensor(4, 10, 200 + seed, 30.0f);
    auto x2 = random_tensor(4, 10, 300 + seed, 30.0f);
    const float a = 0.5f + float(seed % 5), b = -1.5f;
    Tensor2D mix(4, 10);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = a * x1.values()[i] + b * x2.values()[i];
    auto lhs = forward(w, mix);
    auto y1 = forward(w, x1), y2 = forward(w, x2);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      const double rhs = a * double(y1.values()[i]) + b * double(y2.values()[i]);
      EXPECT_NEAR(lhs.values()[i], rhs, 1e-5 * std::max(1.0, std::abs(rhs)) + 1e-3) << seed;
    }
  }
}

TEST(Mse, EqualIsZero) {
  auto a = random_tensor(3, 4, 5);
  EXPECT_EQ(mse(a, a), 0.0);
}

TEST(Mse, ConstantOffset) {
  auto a = random_tensor(3, 4, 6);
  auto b = a;
  for (auto& v : b.values()) v += 0.5f;
  EXPECT_NEAR(mse(a, b), 0.25, 1e-6);
}

TEST(Mse, HandArithmetic) { EXPECT_DOUBLE_EQ(mse(make(1, 2, {1, 2}), make(1, 2, {0, 4})), 2.5); }

TEST(Mse, ShapeMismatch) { EXPECT_THROW(mse(Tensor2D(1, 2), Tensor2D(2, 1)), Error); }

TEST(MseProperty, NonNegativeAndZeroOnlyWhenEqual) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto a = random_tensor(3, 3, seed);
    auto b = a;
    EXPECT_EQ(mse(a, b), 0.0);
    b.values()[seed % 9] = std::nextafter(b.values()[seed % 9], 1e9f);
    EXPECT_GT(mse(a, b), 0.0);
  }
}

TEST(Tensor, RejectsWrongDataLength) { EXPECT_THROW(Tensor2D(2, 2, std::vector<float>(3)), Error); }
