#pragma once

#include <vector>

#include "ardiff/common.hpp"
#include "ardiff/patches.hpp"
#include "ardiff/rng.hpp"

namespace ardiff {

// Full-covariance normal N(mean, cov) with a cached Cholesky factor.
//
// The covariance is symmetrized on construction; an input whose asymmetry
// exceeds 1e-9 relative, or that is not strictly positive definite, is
// rejected with ValidationError.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix cov);
  static Gaussian standard(int dim);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  // Lower-triangular L with cov = L L^T.
  const Matrix& chol() const { return chol_; }
  double logdet() const { return logdet_; }

  Matrix precision() const;
  // cov^{-1} v via the cached factor.
  Vector solve(const Vector& v) const;
  double log_density(const Vector& x) const;
  // Largest eigenvalue of the precision matrix.
  double max_precision_eigenvalue() const;

 private:
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  double logdet_ = 0.0;
};

// Weighted mixture of equal-dimension Gaussians. Weights are validated to be
// a probability vector (nonnegative, sum 1 within 1e-12).
class GaussianMixture {
 public:
  GaussianMixture(Vector weights, std::vector<Gaussian> components);
  GaussianMixture(const Gaussian& single);  // NOLINT: a Gaussian is a one-component mixture

  int dim() const { return components_.front().dim(); }
  int size() const { return static_cast<int>(components_.size()); }
  const Vector& weights() const { return weights_; }
  const std::vector<Gaussian>& components() const { return components_; }
  const Gaussian& component(int i) const { return components_.at(static_cast<std::size_t>(i)); }
  bool is_single() const { return size() == 1; }

  Vector mean() const;
  Matrix cov() const;

 private:
  Vector weights_;
  std::vector<Gaussian> components_;
};

// log sum_i w_i N(x; mu_i, Sigma_i) with a max-shifted log-sum-exp.
double log_density(const GaussianMixture& gm, const Vector& x);

// Posterior component probabilities at x. Entries below 1e-300 are flushed
// to zero; the result sums to one.
Vector responsibilities(const GaussianMixture& gm, const Vector& x);

// Gradient of log p at x.
Vector grad_log_density(const GaussianMixture& gm, const Vector& x);

// Hessian of log p at x: sum_i r_i (-P_i) + Cov_r[g_i], g_i = -P_i (x - mu_i).
Matrix hessian_log_density(const GaussianMixture& gm, const Vector& x);

// n draws, one per row. Row i depends only on seed.child(i).
Matrix sample(const GaussianMixture& gm, int n_samples, const SeedPath& seed);
Vector sample_one(const GaussianMixture& gm, NoiseStream& stream);

GaussianMixture marginal(const GaussianMixture& gm, const PatchLayout& layout, int l, int r);

// Per-component pieces of p(x_k | x_[1:k-1]) that do not depend on the
// conditioning value: gain Sigma_yx Sigma_xx^{-1}, Schur complement, and the
// prefix marginal used to reweight components.
class ConditionalFamily {
 public:
  ConditionalFamily(const GaussianMixture& joint, const PatchLayout& layout, int k);

  int patch() const { return k_; }
  int patch_dim() const { return patch_dim_; }
  int prefix_dim() const { return prefix_dim_; }
  int size() const { return static_cast<int>(base_weights_.size()); }

  // Conditional component means at z, and reweighted weights.
  void evaluate(const Condition& z, Vector& weights, std::vector<Vector>& means) const;
  GaussianMixture at(const Condition& z) const;

  // Schur complement Sigma_yy - Sigma_yx Sigma_xx^{-1} Sigma_xy of component i.
  const Matrix& cond_cov(int i) const { return cond_cov_[static_cast<std::size_t>(i)]; }
  // Mean of component i is offset(i) + gain(i) * z.
  const Matrix& gain(int i) const { return gain_[static_cast<std::size_t>(i)]; }
  const Vector& offset(int i) const { return offset_[static_cast<std::size_t>(i)]; }

 private:
  int k_;
  int patch_dim_;
  int prefix_dim_;
  Vector base_weights_;
  std::vector<Matrix> gain_;
  std::vector<Vector> offset_;
  std::vector<Matrix> cond_cov_;
  std::vector<Gaussian> prefix_marginals_;
};

GaussianMixture conditional(const GaussianMixture& gm, const PatchLayout& layout, int k,
                            const Condition& given);

// Closed-form KL(p || q).
double kl_gaussian(const Gaussian& p, const Gaussian& q);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo E_p[log p - log q] with jackknife standard error.
McEstimate kl_mixture_mc(const GaussianMixture& p, const GaussianMixture& q, int n_samples,
                         const SeedPath& seed);

struct MomentReport {
  double second_moment = 0.0;
  double lipschitz_bound = 0.0;
  double grad_bound = 0.0;
  // True when lipschitz_bound is an empirical estimate (mixtures).
  bool lipschitz_is_estimate = false;
};

MomentReport moment_report(const GaussianMixture& gm, double probe_radius, int n_probes = 10000,
                           const SeedPath& seed = SeedPath(0));

// Spectral norm of a symmetric matrix.
double symmetric_norm(const Matrix& m);

}  // namespace ardiff
