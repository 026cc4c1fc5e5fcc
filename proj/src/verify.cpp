#include "ardiff/verify.hpp"

#include <cmath>

namespace ardiff {

void CounterexampleSpec::validate() const {
  require(eps > 0.0 && eps <= 0.5, "counterexample eps must lie in (0, 1/2]");
  require(M > 0.0 && std::isfinite(M), "counterexample M must be positive");
  require(d_y >= 1 && d_x >= 1, "counterexample dimensions must be positive");
  require(d_y <= d_x, "counterexample needs d_y <= d_x");
}

namespace {

Gaussian counterexample_joint(const CounterexampleSpec& s, double inflate) {
  const int d = s.d();
  const double a = s.eps / (d * s.M);
  Matrix cov = Matrix::Zero(d, d);
  // x block first, then y
  cov.topLeftCorner(s.d_x, s.d_x) = 2.0 * a * a * inflate * Matrix::Identity(s.d_x, s.d_x);
  cov.bottomRightCorner(s.d_y, s.d_y) = Matrix::Identity(s.d_y, s.d_y);
  for (int i = 0; i < s.d_y; ++i) {
    cov(s.d_x + i, i) = a;
    cov(i, s.d_x + i) = a;
  }
  try {
    return Gaussian(Vector::Zero(d), cov);
  } catch (const ValidationError& e) {
    throw NumericalError(std::string("counterexample build error: ") + e.what());
  }
}

}  // namespace

Counterexample build_counterexample(const CounterexampleSpec& spec) {
  spec.validate();
  const int d = spec.d();
  const double eps = spec.eps;
  Matrix trunc = Matrix::Zero(spec.d_y, spec.d_x);
  trunc.leftCols(spec.d_y).setIdentity();
  const Matrix eye = Matrix::Identity(spec.d_y, spec.d_y);
  LinearConditional hat{(d * spec.M / (2.0 * eps)) * trunc, 0.5 * eye};
  LinearConditional star{(d * spec.M / (2.0 * eps * (1.0 + eps))) * trunc,
                         0.5 * (1.0 + eps / (1.0 + eps)) * eye};
  return {spec,
          PatchLayout({spec.d_x, spec.d_y}),
          counterexample_joint(spec, 1.0 + eps),
          counterexample_joint(spec, 1.0),
          std::move(star),
          std::move(hat)};
}

CounterexampleReport check_counterexample(const CounterexampleSpec& spec, const Vector& x) {
  require(x.size() == spec.d_x, "probe must have dimension d_x");
  const Counterexample ce = build_counterexample(spec);
  CounterexampleReport rep;
  rep.kl_joint = kl_gaussian(ce.p_star, ce.p_hat);
  const Gaussian ps = ce.star_cond.at(x);
  const Gaussian ph = ce.hat_cond.at(x);
  rep.kl_cond = kl_gaussian(ps, ph);
  const double d = spec.d();
  const double x2 = x.head(spec.d_y).squaredNorm();
  rep.kl_cond_mean_term = d * d * spec.M * spec.M * x2 / (4.0 * (1.0 + spec.eps) * (1.0 + spec.eps));
  rep.kl_cond_cov_term = kl_gaussian(Gaussian(Vector::Zero(spec.d_y), ps.cov()),
                                     Gaussian(Vector::Zero(spec.d_y), ph.cov()));
  rep.joint_budget = spec.eps * d;
  rep.cond_floor = spec.M * spec.M * x2;
  rep.passes_joint = rep.kl_joint <= rep.joint_budget;
  rep.passes_cond = rep.kl_cond > rep.cond_floor;
  rep.mean_term_exceeds_floor = rep.kl_cond_mean_term > rep.cond_floor;
  return rep;
}

std::vector<InitErrorRow> init_error_sweep(const Gaussian& target, double L,
                                           const std::vector<double>& t_grid) {
  require(L > 0.0, "L must be positive");
  const int d = target.dim();
  const double m2 = target.mean().squaredNorm() + target.cov().trace();
  const Gaussian ref = Gaussian::standard(d);
  std::vector<InitErrorRow> rows;
  for (double t : t_grid) {
    require(t >= 0.0, "sweep times must be nonnegative");
    const double a = std::exp(-t);
    Matrix cov = a * a * target.cov();
    cov.diagonal().array() += -std::expm1(-2.0 * t);
    const Gaussian qt(a * target.mean(), cov);
    InitErrorRow row;
    row.t = t;
    row.exact = std::max(0.0, kl_gaussian(qt, ref));
    row.bound = init_error_bound(L, d, m2, t);
    row.dominated = row.exact <= row.bound;
    rows.push_back(row);
  }
  return rows;
}

ArVsJointResult ar_vs_joint_conditional(const Gaussian& target, const PatchLayout& layout,
                                        const TimeSchedule& schedule,
                                        const std::optional<BiasSpec>& joint_bias,
                                        const std::optional<BiasSpec>& ar_bias,
                                        const std::optional<Vector>& probe) {
  require(layout.num_patches() == 2, "ar_vs_joint_conditional needs a 2-patch layout");
  require(layout.total_dim() == target.dim(), "layout does not match the target");
  const PatchLayout whole({target.dim()});
  auto joint = exact_pushforward(target, whole, schedule, joint_bias);
  auto ar = exact_pushforward(target, layout, schedule, ar_bias);

  const StageLaw want = target_stage_law(target, layout, 2);
  const StageLaw joint_cond = target_stage_law(joint.output, layout, 2);
  const StageLaw& ar_cond = ar.stages[1];
  const int p = layout.patch_dim(1);
  const Gaussian prefix(target.mean().head(p), target.cov().topLeftCorner(p, p));

  ArVsJointResult res{joint.output, ar.output, joint.kl, ar.kl, 0.0, 0.0, {}, {}};
  res.cond_kl_joint_path = condition_averaged_kl(want, joint_cond, prefix);
  res.cond_kl_ar_path = condition_averaged_kl(want, ar_cond, prefix);
  if (probe) {
    require(probe->size() == p, "probe must have the dimension of patch 1");
    const auto kl_at = [&](const StageLaw& q) {
      return kl_gaussian(Gaussian(want.gain * *probe + want.offset, want.cov),
                         Gaussian(q.gain * *probe + q.offset, q.cov));
    };
    res.probe_cond_kl_joint_path = kl_at(joint_cond);
    res.probe_cond_kl_ar_path = kl_at(ar_cond);
  }
  return res;
}

}  // namespace ardiff
