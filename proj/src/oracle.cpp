#include "ardiff/oracle.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <string>

namespace ardiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::string key_of(const Condition& z) {
  if (z.is_none()) return {};
  const Vector& v = z.vector();
  std::string key(static_cast<std::size_t>(v.size()) * sizeof(double), '\0');
  std::memcpy(key.data(), v.data(), key.size());
  return key;
}

}  // namespace

DiffusedLaw diffuse(const GaussianMixture& gm, double t) {
  require(t >= 0.0 && std::isfinite(t), "diffuse: time must be finite and >= 0");
  if (t == 0.0) return {gm, 0.0, gm};
  const double alpha = std::exp(-t);
  const double var = -std::expm1(-2.0 * t);
  std::vector<Gaussian> comps;
  comps.reserve(gm.components().size());
  for (const auto& c : gm.components()) {
    Matrix cov = alpha * alpha * c.cov();
    cov.diagonal().array() += var;
    comps.emplace_back(alpha * c.mean(), cov);
  }
  return {gm, t, GaussianMixture(gm.weights(), std::move(comps))};
}

Vector score(const DiffusedLaw& law, const Vector& y) { return grad_log_density(law.diffused, y); }

Matrix score_hessian(const DiffusedLaw& law, const Vector& y) {
  return hessian_log_density(law.diffused, y);
}

OracleScore::OracleScore(const GaussianMixture& joint, const PatchLayout& layout, int k)
    : family_(joint, layout, k) {}

const OracleScore::ZEntry& OracleScore::z_entry(const Condition& z) const {
  const std::string key = key_of(z);
  {
    std::shared_lock lock(z_mutex_);
    if (auto it = z_memo_.find(key); it != z_memo_.end()) return it->second;
  }
  ZEntry entry;
  family_.evaluate(z, entry.weights, entry.means);
  std::unique_lock lock(z_mutex_);
  return z_memo_.try_emplace(key, std::move(entry)).first->second;
}

const OracleScore::TEntry& OracleScore::t_entry(double t) const {
  {
    std::shared_lock lock(t_mutex_);
    if (auto it = t_memo_.find(t); it != t_memo_.end()) return it->second;
  }
  const double a2 = std::exp(-2.0 * t);
  const double var = -std::expm1(-2.0 * t);
  TEntry entry;
  for (int i = 0; i < family_.size(); ++i) {
    Matrix cov = a2 * family_.cond_cov(i);
    cov.diagonal().array() += var;
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("oracle: diffused conditional covariance not PD at t=" +
                           std::to_string(t));
    Matrix l = llt.matrixL();
    entry.logdet.push_back(2.0 * l.diagonal().array().log().sum());
    entry.chol.push_back(std::move(l));
  }
  std::unique_lock lock(t_mutex_);
  return t_memo_.try_emplace(t, std::move(entry)).first->second;
}

Vector OracleScore::score(const Vector& y, double t, const Condition& z, StepTag) const {
  require(t > 0.0, "oracle score needs t > 0");
  require(y.size() == patch_dim(), "oracle score: wrong patch dimension");
  const auto& ze = z_entry(z);
  const auto& te = t_entry(t);
  const double alpha = std::exp(-t);
  const int m = family_.size();
  if (m == 1) {
    const auto l = te.chol[0].triangularView<Eigen::Lower>();
    return -l.transpose().solve(l.solve(y - alpha * ze.means[0]));
  }
  Vector logw(m);
  std::vector<Vector> whitened(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    whitened[i] = te.chol[i].triangularView<Eigen::Lower>().solve(y - alpha * ze.means[i]);
    logw[i] = ze.weights[i] > 0.0 ? std::log(ze.weights[i]) -
                                        0.5 * (whitened[i].squaredNorm() + te.logdet[i] +
                                               patch_dim() * kLog2Pi)
                                  : -std::numeric_limits<double>::infinity();
  }
  const double top = logw.maxCoeff();
  Vector r = (logw.array() - top).exp();
  r /= r.sum();
  Vector s = Vector::Zero(patch_dim());
  for (int i = 0; i < m; ++i) {
    if (r[i] < 1e-300) continue;
    s -= r[i] * te.chol[i].transpose().triangularView<Eigen::Upper>().solve(whitened[i]);
  }
  return s;
}

DiffusedLaw OracleScore::law(double t, const Condition& z) const {
  return diffuse(family_.at(z), t);
}

std::shared_ptr<OracleScore> conditional_oracle(const GaussianMixture& joint,
                                                const PatchLayout& layout, int k) {
  layout.patch_dim(k);
  return std::make_shared<OracleScore>(joint, layout, k);
}

double BiasSpec::eps_for(int stage) const {
  if (!stage_eps.empty()) {
    require(stage >= 1 && stage <= static_cast<int>(stage_eps.size()),
            "bias spec has no entry for stage " + std::to_string(stage));
    return stage_eps[static_cast<std::size_t>(stage - 1)];
  }
  return eps;
}

Vector BiasSpec::direction_for(int stage, int step, int dim) const {
  if (!fixed_directions.empty()) {
    const auto& u = fixed_directions.at(static_cast<std::size_t>(stage - 1));
    require(u.size() == dim, "fixed bias direction has wrong dimension");
    return u.normalized();
  }
  const auto r = direction == BiasDirection::kPerStage ? 0 : static_cast<std::uint64_t>(step) + 1;
  NoiseStream stream(SeedPath(seed).child({0xb1a5, static_cast<std::uint64_t>(stage), r}));
  Vector u = stream.normal_vector(dim);
  double n = u.norm();
  while (n < 1e-8) {
    u = stream.normal_vector(dim);
    n = u.norm();
  }
  return u / n;
}

bool BiasSpec::is_zero() const {
  if (!stage_eps.empty()) {
    for (double e : stage_eps)
      if (e != 0.0) return false;
    return true;
  }
  return eps == 0.0;
}

PerturbedScore::PerturbedScore(ScoreSourcePtr base, BiasSpec spec, PerturbMode mode)
    : base_(std::move(base)), spec_(std::move(spec)), mode_(mode) {
  require(base_ != nullptr, "perturb: base source is null");
  require(spec_.eps >= 0.0, "perturb: eps must be >= 0");
  for (double e : spec_.stage_eps) require(e >= 0.0, "perturb: stage eps must be >= 0");
  if (mode_ == PerturbMode::kRotational)
    require(base_->patch_dim() >= 2, "rotational perturbation needs patch dimension >= 2");
}

Vector PerturbedScore::score(const Vector& y, double t, const Condition& z, StepTag tag) const {
  Vector s = base_->score(y, t, z, tag);
  const double eps = spec_.eps_for(tag.stage);
  if (eps == 0.0) return s;
  const int n = static_cast<int>(s.size());
  if (mode_ == PerturbMode::kConstantBias) {
    s += eps * spec_.direction_for(tag.stage, tag.step, n);
    return s;
  }
  // J s for a skew J (quarter turn in 2-D, A - A^T with A the cyclic shift
  // otherwise), so the added error is orthogonal to s.
  Vector js(n);
  if (n == 2) {
    js << -s[1], s[0];
  } else {
    for (int i = 0; i < n; ++i) js[i] = s[(i + 1) % n] - s[(i + n - 1) % n];
  }
  const double norm = js.norm();
  if (norm > 1e-12 * std::max(1.0, s.norm()))
    s += eps * js / norm;
  else
    s += eps * spec_.direction_for(tag.stage, tag.step, n);
  return s;
}

std::shared_ptr<PerturbedScore> perturb(ScoreSourcePtr base, double eps, PerturbMode mode,
                                        std::uint64_t seed, BiasDirection direction) {
  require(eps >= 0.0, "perturb: eps must be >= 0");
  BiasSpec spec;
  spec.eps = eps;
  spec.seed = seed;
  spec.direction = direction;
  return std::make_shared<PerturbedScore>(std::move(base), std::move(spec), mode);
}

}  // namespace ardiff
