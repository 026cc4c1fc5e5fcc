#include "ardiff/quadrature.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ardiff {

HermiteRule gauss_hermite(int n) {
  require(n >= 1, "gauss_hermite: need at least one node");
  Matrix jacobi = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    jacobi(i, i - 1) = std::sqrt(static_cast<double>(i));
    jacobi(i - 1, i) = jacobi(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  HermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  return rule;
}

double expect_gaussian(const Vector& mean, const Matrix& cov, int nodes_per_dim,
                       const std::function<double(const Vector&)>& f) {
  const auto dim = mean.size();
  require(cov.rows() == dim && cov.cols() == dim, "expect_gaussian: covariance shape mismatch");
  if (dim == 0) return f(mean);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("expect_gaussian: covariance not PD");
  const Matrix chol = llt.matrixL();
  const auto rule = gauss_hermite(nodes_per_dim);

  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Vector xi(dim);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      xi[j] = rule.nodes[idx[j]];
      w *= rule.weights[idx[j]];
    }
    total += w * f(mean + chol * xi);
    Eigen::Index j = 0;
    while (j < dim && ++idx[j] == nodes_per_dim) idx[j++] = 0;
    if (j == dim) break;
  }
  return total;
}

}  // namespace ardiff
