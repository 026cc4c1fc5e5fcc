#pragma once

#include <cmath>

#include "ardiff/gauss.hpp"
#include "ardiff/rng.hpp"

namespace testutil {

using ardiff::Gaussian;
using ardiff::GaussianMixture;
using ardiff::Matrix;
using ardiff::Vector;

inline Matrix random_spd(int n, ardiff::NoiseStream& rng, double floor = 0.3) {
  const Matrix a = Matrix::NullaryExpr(n, n, [&] { return rng.normal(); });
  return a * a.transpose() / n + floor * Matrix::Identity(n, n);
}

inline Gaussian causal(double sigma2 = 1.0) {
  Matrix c(2, 2);
  c << 1.0, 1.0, 1.0, 1.0 + sigma2;
  return Gaussian(Vector::Zero(2), c);
}

inline GaussianMixture two_mixture_2d() {
  Matrix c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.4, 0.4, 0.8;
  c2 << 0.5, -0.2, -0.2, 1.2;
  Vector w(2);
  w << 0.35, 0.65;
  return GaussianMixture(w, {Gaussian(Eigen::Vector2d(-1.0, 1.0), c1),
                             Gaussian(Eigen::Vector2d(1.5, -0.5), c2)});
}

}  // namespace testutil
