#include "ardiff/gauss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace ardiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kFlush = 1e-300;

// log-sum-exp normalization in place; returns the log normalizer.
double normalize_log_weights(Vector& logw) {
  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) throw NumericalError("all mixture components have zero density");
  Vector w = (logw.array() - top).exp();
  const double total = w.sum();
  logw = w / total;
  for (Eigen::Index i = 0; i < logw.size(); ++i)
    if (logw[i] < kFlush) logw[i] = 0.0;
  logw /= logw.sum();
  return top + std::log(total);
}

Vector component_log_terms(const GaussianMixture& gm, const Vector& x) {
  require(x.size() == gm.dim(), "dimension mismatch: point has " + std::to_string(x.size()) +
                                    " coordinates, distribution has " + std::to_string(gm.dim()));
  Vector logw(gm.size());
  for (int i = 0; i < gm.size(); ++i) {
    const double w = gm.weights()[i];
    logw[i] = w > 0.0 ? std::log(w) + gm.component(i).log_density(x)
                      : -std::numeric_limits<double>::infinity();
  }
  return logw;
}

}  // namespace

Gaussian::Gaussian(Vector mean, Matrix cov) : mean_(std::move(mean)) {
  const auto n = mean_.size();
  require(n >= 1, "Gaussian needs dimension >= 1");
  require(cov.rows() == n && cov.cols() == n,
          "covariance must be " + std::to_string(n) + "x" + std::to_string(n));
  require(mean_.allFinite() && cov.allFinite(), "Gaussian parameters must be finite");
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-9 * scale, "covariance is not symmetric (max asymmetry " +
                                    std::to_string(asym) + ")");
  cov_ = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0).all())
    throw ValidationError("covariance is not positive definite");
  chol_ = llt.matrixL();
  logdet_ = 2.0 * chol_.diagonal().array().log().sum();
}

Gaussian Gaussian::standard(int dim) {
  return Gaussian(Vector::Zero(dim), Matrix::Identity(dim, dim));
}

Matrix Gaussian::precision() const {
  const Matrix inv_l =
      chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
  return inv_l.transpose() * inv_l;
}

Vector Gaussian::solve(const Vector& v) const {
  const Vector w = chol_.triangularView<Eigen::Lower>().solve(v);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(w);
}

double Gaussian::log_density(const Vector& x) const {
  require(x.size() == mean_.size(), "dimension mismatch in Gaussian::log_density");
  const Vector w = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (w.squaredNorm() + logdet_ + static_cast<double>(dim()) * kLog2Pi);
}

double Gaussian::max_precision_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_, Eigen::EigenvaluesOnly);
  return 1.0 / eig.eigenvalues().minCoeff();
}

GaussianMixture::GaussianMixture(Vector weights, std::vector<Gaussian> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  require(!components_.empty(), "mixture needs at least one component");
  require(weights_.size() == static_cast<Eigen::Index>(components_.size()),
          "mixture weight count does not match component count");
  require((weights_.array() >= 0.0).all(), "mixture weights must be nonnegative");
  require(std::abs(weights_.sum() - 1.0) <= 1e-12, "mixture weights must sum to 1");
  for (const auto& c : components_)
    require(c.dim() == components_.front().dim(), "mixture components differ in dimension");
}

GaussianMixture::GaussianMixture(const Gaussian& single)
    : weights_(Vector::Ones(1)), components_{single} {}

Vector GaussianMixture::mean() const {
  Vector m = Vector::Zero(dim());
  for (int i = 0; i < size(); ++i) m += weights_[i] * components_[i].mean();
  return m;
}

Matrix GaussianMixture::cov() const {
  const Vector m = mean();
  Matrix c = Matrix::Zero(dim(), dim());
  for (int i = 0; i < size(); ++i) {
    const Vector dm = components_[i].mean() - m;
    c += weights_[i] * (components_[i].cov() + dm * dm.transpose());
  }
  return c;
}

double log_density(const GaussianMixture& gm, const Vector& x) {
  Vector logw = component_log_terms(gm, x);
  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((logw.array() - top).exp().sum());
}

Vector responsibilities(const GaussianMixture& gm, const Vector& x) {
  Vector logw = component_log_terms(gm, x);
  normalize_log_weights(logw);
  return logw;
}

Vector grad_log_density(const GaussianMixture& gm, const Vector& x) {
  const Vector r = responsibilities(gm, x);
  Vector g = Vector::Zero(gm.dim());
  for (int i = 0; i < gm.size(); ++i) {
    if (r[i] == 0.0) continue;
    const auto& c = gm.component(i);
    g -= r[i] * c.solve(x - c.mean());
  }
  return g;
}

Matrix hessian_log_density(const GaussianMixture& gm, const Vector& x) {
  const Vector r = responsibilities(gm, x);
  const int n = gm.dim();
  Matrix h = Matrix::Zero(n, n);
  Vector gbar = Vector::Zero(n);
  Matrix second = Matrix::Zero(n, n);
  for (int i = 0; i < gm.size(); ++i) {
    if (r[i] == 0.0) continue;
    const auto& c = gm.component(i);
    const Vector g = -c.solve(x - c.mean());
    h -= r[i] * c.precision();
    gbar += r[i] * g;
    second += r[i] * g * g.transpose();
  }
  h += second - gbar * gbar.transpose();
  return 0.5 * (h + h.transpose());
}

Vector sample_one(const GaussianMixture& gm, NoiseStream& stream) {
  const int i = gm.is_single() ? 0 : stream.categorical(gm.weights());
  const auto& c = gm.component(i);
  return c.mean() + c.chol() * stream.normal_vector(c.dim());
}

Matrix sample(const GaussianMixture& gm, int n_samples, const SeedPath& seed) {
  require(n_samples >= 1, "sample: n_samples must be >= 1");
  Matrix out(n_samples, gm.dim());
  for (int s = 0; s < n_samples; ++s) {
    NoiseStream stream(seed.child(static_cast<std::uint64_t>(s)));
    out.row(s) = sample_one(gm, stream).transpose();
  }
  return out;
}

GaussianMixture marginal(const GaussianMixture& gm, const PatchLayout& layout, int l, int r) {
  require(gm.dim() == layout.total_dim(), "marginal: layout does not match distribution");
  const auto range = layout.index_range(l, r);
  std::vector<Gaussian> comps;
  comps.reserve(gm.components().size());
  for (const auto& c : gm.components())
    comps.emplace_back(c.mean().segment(range.begin, range.size()),
                       c.cov().block(range.begin, range.begin, range.size(), range.size()));
  return GaussianMixture(gm.weights(), std::move(comps));
}

ConditionalFamily::ConditionalFamily(const GaussianMixture& joint, const PatchLayout& layout,
                                     int k)
    : k_(k), base_weights_(joint.weights()) {
  require(joint.dim() == layout.total_dim(), "conditional: layout does not match distribution");
  const auto target = layout.index_range(k, k);
  const auto pre = layout.prefix(k);
  patch_dim_ = target.size();
  prefix_dim_ = pre.size();
  for (const auto& c : joint.components()) {
    const Matrix syy = c.cov().block(target.begin, target.begin, patch_dim_, patch_dim_);
    const Vector my = c.mean().segment(target.begin, patch_dim_);
    if (prefix_dim_ == 0) {
      gain_.emplace_back(patch_dim_, 0);
      offset_.push_back(my);
      cond_cov_.push_back(syy);
      continue;
    }
    const Matrix sxx = c.cov().block(pre.begin, pre.begin, prefix_dim_, prefix_dim_);
    const Matrix syx = c.cov().block(target.begin, pre.begin, patch_dim_, prefix_dim_);
    const Vector mx = c.mean().segment(pre.begin, prefix_dim_);
    Eigen::LLT<Matrix> llt(sxx);
    if (llt.info() != Eigen::Success)
      throw NumericalError("conditioning error: prefix covariance of patch " +
                           std::to_string(k) + " is singular");
    const Matrix gain = llt.solve(syx.transpose()).transpose();
    Matrix schur = syy - gain * syx.transpose();
    schur = 0.5 * (schur + schur.transpose());
    gain_.push_back(gain);
    offset_.push_back(my - gain * mx);
    cond_cov_.push_back(schur);
    prefix_marginals_.emplace_back(mx, sxx);
  }
}

void ConditionalFamily::evaluate(const Condition& z, Vector& weights,
                                 std::vector<Vector>& means) const {
  const int m = size();
  means.resize(static_cast<std::size_t>(m));
  if (prefix_dim_ == 0) {
    require(z.is_none() || z.size() == 0, "patch 1 takes no condition");
    weights = base_weights_;
    for (int i = 0; i < m; ++i) means[i] = offset_[i];
    return;
  }
  require(!z.is_none() && z.size() == prefix_dim_,
          "condition for patch " + std::to_string(k_) + " must have length " +
              std::to_string(prefix_dim_));
  const Vector& x = z.vector();
  Vector logw(m);
  for (int i = 0; i < m; ++i) {
    means[i] = offset_[i] + gain_[i] * x;
    logw[i] = base_weights_[i] > 0.0 ? std::log(base_weights_[i]) + prefix_marginals_[i].log_density(x)
                                     : -std::numeric_limits<double>::infinity();
  }
  normalize_log_weights(logw);
  weights = logw;
}

GaussianMixture ConditionalFamily::at(const Condition& z) const {
  Vector w;
  std::vector<Vector> means;
  evaluate(z, w, means);
  std::vector<Gaussian> comps;
  comps.reserve(means.size());
  for (int i = 0; i < size(); ++i) {
    try {
      comps.emplace_back(means[i], cond_cov_[i]);
    } catch (const ValidationError&) {
      throw NumericalError("conditioning error: conditional covariance of patch " +
                           std::to_string(k_) + " is not positive definite");
    }
  }
  return GaussianMixture(w, std::move(comps));
}

GaussianMixture conditional(const GaussianMixture& gm, const PatchLayout& layout, int k,
                            const Condition& given) {
  return ConditionalFamily(gm, layout, k).at(given);
}

double kl_gaussian(const Gaussian& p, const Gaussian& q) {
  require(p.dim() == q.dim(), "kl_gaussian: dimension mismatch");
  const auto lq = q.chol().triangularView<Eigen::Lower>();
  // tr(Sq^{-1} Sp) = ||Lq^{-1} Lp||_F^2
  const Matrix a = lq.solve(p.chol());
  const Vector dm = lq.solve(q.mean() - p.mean());
  return 0.5 * (a.squaredNorm() + dm.squaredNorm() - static_cast<double>(p.dim()) + q.logdet() -
                p.logdet());
}

McEstimate kl_mixture_mc(const GaussianMixture& p, const GaussianMixture& q, int n_samples,
                         const SeedPath& seed) {
  require(p.dim() == q.dim(), "kl_mixture_mc: dimension mismatch");
  require(n_samples >= 100, "kl_mixture_mc: n_samples must be >= 100");
  Vector terms(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    NoiseStream stream(seed.child(static_cast<std::uint64_t>(s)));
    const Vector x = sample_one(p, stream);
    terms[s] = log_density(p, x) - log_density(q, x);
  }
  const double n = n_samples;
  const double sum = terms.sum();
  // Leave-one-out means; for the sample mean the jackknife reduces to s/sqrt(n).
  const Vector loo = (sum - terms.array()) / (n - 1.0);
  const double loo_mean = loo.mean();
  const double jack_var = (n - 1.0) / n * (loo.array() - loo_mean).square().sum();
  return {sum / n, std::sqrt(jack_var)};
}

double symmetric_norm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

MomentReport moment_report(const GaussianMixture& gm, double probe_radius, int n_probes,
                           const SeedPath& seed) {
  require(probe_radius > 0.0, "moment_report: probe_radius must be positive");
  MomentReport rep;
  for (int i = 0; i < gm.size(); ++i) {
    const auto& c = gm.component(i);
    rep.second_moment += gm.weights()[i] * (c.mean().squaredNorm() + c.cov().trace());
  }

  double component_bound = 0.0;
  for (const auto& c : gm.components())
    component_bound = std::max(component_bound, c.max_precision_eigenvalue());

  const int n = gm.dim();
  std::vector<Vector> probes;
  // Box corners for small dimensions, then half mixture samples, half uniform box points.
  if (n <= 10)
    for (int mask = 0; mask < (1 << n); ++mask) {
      Vector v(n);
      for (int j = 0; j < n; ++j) v[j] = (mask >> j & 1) ? probe_radius : -probe_radius;
      probes.push_back(v);
    }
  const int remaining = std::max(0, n_probes - static_cast<int>(probes.size()));
  for (int s = 0; s < remaining; ++s) {
    NoiseStream stream(seed.child({1, static_cast<std::uint64_t>(s)}));
    if (s % 2 == 0) {
      probes.push_back(sample_one(gm, stream));
    } else {
      Vector v(n);
      for (int j = 0; j < n; ++j) v[j] = probe_radius * (2.0 * stream.uniform() - 1.0);
      probes.push_back(v);
    }
  }

  double correction = 0.0;
  for (const auto& y : probes) {
    rep.grad_bound = std::max(rep.grad_bound, grad_log_density(gm, y).norm());
    if (gm.is_single()) continue;
    const Vector r = responsibilities(gm, y);
    Vector gbar = Vector::Zero(n);
    Matrix second = Matrix::Zero(n, n);
    for (int i = 0; i < gm.size(); ++i) {
      if (r[i] == 0.0) continue;
      const auto& c = gm.component(i);
      const Vector g = -c.solve(y - c.mean());
      gbar += r[i] * g;
      second += r[i] * g * g.transpose();
    }
    correction = std::max(correction, symmetric_norm(second - gbar * gbar.transpose()));
  }
  rep.lipschitz_bound = component_bound + correction;
  rep.lipschitz_is_estimate = !gm.is_single();
  return rep;
}

}  // namespace ardiff
