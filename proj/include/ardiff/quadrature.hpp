#pragma once

#include <functional>

#include "ardiff/common.hpp"

namespace ardiff {

// Gauss–Hermite rule for expectations under the standard normal:
// E[f(xi)] ~= sum_i weights[i] * f(nodes[i]). Weights sum to one.
struct HermiteRule {
  Vector nodes;
  Vector weights;
};

// Golub–Welsch construction for the probabilists' Hermite polynomials.
HermiteRule gauss_hermite(int n);

// Tensor-product expectation E[f(x)] for x ~ N(mean, cov), with cov = L L^T
// and x = mean + L xi. Cost is n^dim evaluations.
double expect_gaussian(const Vector& mean, const Matrix& cov, int nodes_per_dim,
                       const std::function<double(const Vector&)>& f);

}  // namespace ardiff
