// Copyright 2026 The gradst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradst/numeric.h"

#include <cmath>
#include <limits>

#include "gradst/rng.h"
#include "gtest/gtest.h"

namespace gradst {
namespace {

Vec random_vec(Rng& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

TEST(SoftmaxTest, Examples) {
  const Vec u = softmax(Vec{0, 0, 0});
  for (double p : u) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(softmax(Vec{-7.5})[0], 1.0);
  const Vec p = softmax(Vec{std::log(1.0), std::log(2.0), std::log(3.0)});
  EXPECT_NEAR(p[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(p[2], 3.0 / 6.0, 1e-15);
}

TEST(SoftmaxTest, RejectsBadInput) {
  EXPECT_THROW(softmax(Vec{}), InvalidInput);
  EXPECT_THROW(softmax(Vec{1.0, std::nan("")}), InvalidInput);
  EXPECT_THROW(softmax(Vec{std::numeric_limits<double>::infinity()}),
               InvalidInput);
}

TEST(SoftmaxTest, SumsToOneAndShiftInvariant) {
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    Vec z = random_vec(rng, 1 + rng.below(16));
    for (auto& x : z) x *= 30.0;
    const Vec p = softmax(z);
    double sum = 0.0;
    for (double x : p) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double c = 100.0 * rng.normal();
    Vec shifted = z;
    for (auto& x : shifted) x += c;
    const Vec q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(SoftmaxTest, BackwardMatchesFiniteDifferences) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(16);
    const Vec z = random_vec(rng, n);
    const Vec w = random_vec(rng, n);
    const Vec g = softmax_backward(softmax(z), w);
    const Vec fd = finite_difference_grad(
        [&](std::span<const double> x) { return dot(softmax(x), w); }, z, 1e-5);
    EXPECT_LT(relative_error(g, fd, 1e-12), 1e-4);
  }
}

TEST(SigmoidTest, Examples) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(50.0), 1.0, 1e-12);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  EXPECT_GT(sigmoid(-800.0), -1e-300);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0)));
}

TEST(CosineTest, Examples) {
  EXPECT_NEAR(cosine(Vec{0.3, -2.0}, Vec{0.3, -2.0}), 1.0, 1e-15);
  EXPECT_EQ(cosine(Vec{1, 0}, Vec{0, 1}), 0.0);
  EXPECT_NEAR(cosine(Vec{1, 1}, Vec{1, 0}), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(cosine(Vec{0, 0}, Vec{1, 0}), DegenerateInput);
  EXPECT_THROW(cosine(Vec{1, 0}, Vec{1, 0, 0}), InvalidInput);
}

TEST(CosineTest, ScaleInvariantAndGradient) {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(15);
    const Vec u = random_vec(rng, n), v = random_vec(rng, n);
    const double a = 0.01 + 10 * rng.uniform(), b = 0.01 + 10 * rng.uniform();
    Vec au = u, bv = v;
    for (auto& x : au) x *= a;
    for (auto& x : bv) x *= b;
    EXPECT_NEAR(cosine(au, bv), cosine(u, v), 1e-12);

    const CosineGrad g = cosine_with_grad(u, v);
    EXPECT_NEAR(g.value, cosine(u, v), 1e-15);
    const Vec fdu = finite_difference_grad(
        [&](std::span<const double> x) { return cosine(x, v); }, u, 1e-5);
    const Vec fdv = finite_difference_grad(
        [&](std::span<const double> x) { return cosine(u, x); }, v, 1e-5);
    EXPECT_LT(relative_error(g.du, fdu, 1e-12), 1e-4);
    EXPECT_LT(relative_error(g.dv, fdv, 1e-12), 1e-4);
  }
}

TEST(CrossEntropyTest, Examples) {
  EXPECT_NEAR(cross_entropy(Vec{0, 1, 0}, 1), 0.0, 1e-12);
  EXPECT_NEAR(cross_entropy(Vec{0.25, 0.25, 0.25, 0.25}, 3), std::log(4.0),
              1e-15);
  EXPECT_NEAR(cross_entropy(Vec{1, 0}, 1), -std::log(1e-12), 1e-9);
  EXPECT_THROW(cross_entropy(Vec{1, 0}, 2), InvalidInput);
}

TEST(BinaryCrossEntropyTest, Examples) {
  const std::vector<std::uint8_t> t = {1, 0, 1};
  EXPECT_NEAR(binary_cross_entropy(Vec{1 - 1e-12, 1e-12, 1 - 1e-12}, t), 0.0,
              1e-11);
  EXPECT_NEAR(binary_cross_entropy(Vec{0.5, 0.5, 0.5}, t), std::log(2.0),
              1e-15);
  EXPECT_THROW(binary_cross_entropy(Vec{0.5, 0.5}, t), InvalidInput);
  // Exact 0/1 scores are floored rather than producing infinities.
  EXPECT_TRUE(std::isfinite(binary_cross_entropy(Vec{0.0, 1.0, 0.0}, t)));
}

TEST(GaussianSampleTest, ZeroVarianceAndDeterminism) {
  Rng rng(1);
  const Vec z = gaussian_sample(rng, 50, 0.0);
  for (double x : z) EXPECT_EQ(x, 0.0);
  Rng a(99), b(99);
  EXPECT_EQ(gaussian_sample(a, 20, 1e-4), gaussian_sample(b, 20, 1e-4));
  EXPECT_THROW(gaussian_sample(rng, 3, -1.0), InvalidInput);
}

TEST(GaussianSampleTest, Moments) {
  Rng rng(2);
  const Vec z = gaussian_sample(rng, 1000000, 1e-4);
  double mean = 0.0;
  for (double x : z) mean += x;
  mean /= static_cast<double>(z.size());
  double var = 0.0;
  for (double x : z) var += (x - mean) * (x - mean);
  var /= static_cast<double>(z.size() - 1);
  EXPECT_LT(std::abs(mean), 3e-5);
  EXPECT_NEAR(var, 1e-4, 0.05e-4);
}

TEST(FiniteDifferenceTest, Examples) {
  const Vec x = {0.3, -1.0, 2.5};
  const Vec g = finite_difference_grad(
      [](std::span<const double> v) { return v[0] + v[1] + v[2]; }, x, 1e-5);
  for (double v : g) EXPECT_NEAR(v, 1.0, 1e-9);
  const Vec sq = finite_difference_grad(
      [](std::span<const double> v) { return dot(v, v); }, Vec{1, 2}, 1e-5);
  EXPECT_NEAR(sq[0], 2.0, 1e-6);
  EXPECT_NEAR(sq[1], 4.0, 1e-6);
  const Vec c = finite_difference_grad(
      [](std::span<const double>) { return 3.0; }, x, 1e-5);
  for (double v : c) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(FiniteDifferenceTest, RejectsBadEpsAndNonFinite) {
  auto f = [](std::span<const double> v) { return v[0]; };
  EXPECT_THROW(finite_difference_grad(f, Vec{1.0}, 1e-9), InvalidInput);
  EXPECT_THROW(finite_difference_grad(f, Vec{1.0}, 1e-2), InvalidInput);
  EXPECT_THROW(finite_difference_grad(
                   [](std::span<const double> v) { return std::log(v[0]); },
                   Vec{0.0}, 1e-5),
               InvalidInput);
}

TEST(MatTest, LinearAlgebraAgainstLoops) {
  Rng rng(5);
  Mat m(3, 4);
  for (auto& x : m.flat()) x = rng.normal();
  const Vec x = random_vec(rng, 4), y = random_vec(rng, 3);
  const Vec mx = matvec(m, x);
  const Vec mty = matvec_transposed(m, y);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) s += m(r, c) * x[c];
    EXPECT_NEAR(mx[r], s, 1e-14);
  }
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 3; ++r) s += m(r, c) * y[r];
    EXPECT_NEAR(mty[c], s, 1e-14);
  }
  Mat copy = m;
  add_outer(copy, y, x, 2.0);
  EXPECT_NEAR(copy(2, 1), m(2, 1) + 2.0 * y[2] * x[1], 1e-14);
  EXPECT_THROW(matvec(m, y), InvalidInput);
  EXPECT_THROW(Mat(2, 2, Vec{1.0}), InvalidInput);
}

TEST(RngTest, DeterministicAndIndependentChildren) {
  Rng a(7), b(7);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  Rng c1 = Rng(7).child("x"), c2 = Rng(7).child("y");
  EXPECT_NE(c1(), c2());
  Rng r(3);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) counts[r.below(5)]++;
  for (int c : counts) EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
}

}  // namespace
}  // namespace gradst
