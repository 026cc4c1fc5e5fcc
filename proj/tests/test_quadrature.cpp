#include <gtest/gtest.h>

#include <cmath>

#include "ardiff/quadrature.hpp"

using namespace ardiff;

TEST(GaussHermite, WeightsSumToOne) {
  for (int n : {1, 2, 5, 16, 64}) EXPECT_NEAR(gauss_hermite(n).weights.sum(), 1.0, 1e-13);
}

TEST(GaussHermite, StandardNormalMoments) {
  const auto rule = gauss_hermite(20);
  // E xi^(2k) = (2k-1)!!
  double dfact = 1.0;
  for (int k = 1; k <= 8; ++k) {
    dfact *= 2 * k - 1;
    const double even = (rule.weights.array() * rule.nodes.array().pow(2 * k)).sum();
    const double odd = (rule.weights.array() * rule.nodes.array().pow(2 * k - 1)).sum();
    EXPECT_NEAR(even / dfact, 1.0, 1e-11) << k;
    EXPECT_NEAR(odd / (dfact * (2 * k + 1)), 0.0, 1e-12) << k;
  }
}

TEST(ExpectGaussian, QuadraticForm) {
  Vector mu(2);
  mu << 1.0, -2.0;
  Matrix cov(2, 2);
  cov << 2.0, 0.5, 0.5, 1.0;
  const double got = expect_gaussian(mu, cov, 6, [](const Vector& x) { return x.squaredNorm(); });
  EXPECT_NEAR(got, mu.squaredNorm() + cov.trace(), 1e-12);
}
