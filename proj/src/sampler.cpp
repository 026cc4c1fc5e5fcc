#include "ardiff/sampler.hpp"

#include <cmath>
#include <string>

#include "ardiff/parallel.hpp"
#include "ardiff/quadrature.hpp"

namespace ardiff {

AffineStep AffineStep::for_step(double eta_r, ScoreGain gain) {
  require(eta_r >= 0.0 && std::isfinite(eta_r), "step size must be finite and >= 0");
  const double em1 = std::expm1(eta_r);
  return {1.0 + em1, (gain == ScoreGain::kDouble ? 2.0 : 1.0) * em1,
          std::sqrt(std::expm1(2.0 * eta_r))};
}

Vector integrator_step(const Vector& y, const AffineStep& step, const Vector& s, const Vector& xi) {
  require(y.size() == s.size() && y.size() == xi.size(), "integrator_step: dimension mismatch");
  if (!y.allFinite() || !s.allFinite() || !xi.allFinite())
    throw NumericalError("integrator_step: non-finite input");
  return step.scale * y + step.score_gain * s + step.noise_std * xi;
}

Vector sample_patch(const ScoreSource& source, const Condition& z, int patch_dim,
                    const TimeSchedule& schedule, const SeedPath& seed, int stage, int sample,
                    const SamplerOptions& opts) {
  const auto base = seed.child({static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(sample)});
  NoiseStream init(base.child(0));
  Vector y = init.normal_vector(patch_dim);
  Vector xi(patch_dim);
  for (int r = 0; r < schedule.R; ++r) {
    const Vector s = source.score(y, schedule.forward_time(r), z, {stage, r});
    if (s.size() != patch_dim || !s.allFinite())
      throw NumericalError("sampling error: non-finite score at sample " + std::to_string(sample) +
                           ", step " + std::to_string(r) + " (stage " + std::to_string(stage) + ")");
    NoiseStream noise(base.child(static_cast<std::uint64_t>(r) + 1));
    noise.fill_normal(xi);
    y = integrator_step(y, AffineStep::for_step(schedule.eta_r[r], opts.gain), s, xi);
  }
  return y;
}

Matrix inner_sample(const ScoreSource& source, const Condition& z, int patch_dim,
                    const TimeSchedule& schedule, int n, const SeedPath& seed, int stage,
                    const SamplerOptions& opts) {
  require(n >= 1, "inner_sample: n must be >= 1");
  require(source.patch_dim() == patch_dim, "inner_sample: source patch dimension mismatch");
  Matrix out(n, patch_dim);
  parallel_for(n, opts.threads, [&](int i) {
    out.row(i) = sample_patch(source, z, patch_dim, schedule, seed, stage, i, opts).transpose();
  });
  return out;
}

Matrix ar_sample(const RunConfig& cfg) {
  require(cfg.n_samples >= 1, "ar_sample: n_samples must be >= 1");
  require(static_cast<bool>(cfg.source_factory), "ar_sample: missing score source factory");
  const auto& layout = cfg.layout;
  const int K = layout.num_patches();
  std::vector<ScoreSourcePtr> sources;
  for (int k = 1; k <= K; ++k) {
    auto src = cfg.source_factory(k);
    require(src != nullptr, "ar_sample: no score source for patch " + std::to_string(k));
    require(src->patch_dim() == layout.patch_dim(k),
            "ar_sample: source for patch " + std::to_string(k) + " has wrong dimension");
    sources.push_back(std::move(src));
  }
  Matrix out(cfg.n_samples, layout.total_dim());
  parallel_for(cfg.n_samples, cfg.options.threads, [&](int i) {
    Vector x(layout.total_dim());
    for (int k = 1; k <= K; ++k) {
      const auto pre = layout.prefix(k);
      const Condition z = k == 1 ? Condition::none() : Condition(x.head(pre.size()));
      const auto range = layout.index_range(k, k);
      try {
        x.segment(range.begin, range.size()) =
            sample_patch(*sources[k - 1], z, range.size(), cfg.schedule, cfg.seed, k, i, cfg.options);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string("ar_sample patch ") + std::to_string(k) + ": " + e.what());
      }
    }
    out.row(i) = x.transpose();
  });
  return out;
}

StageLaw target_stage_law(const Gaussian& joint, const PatchLayout& layout, int k) {
  const ConditionalFamily fam(GaussianMixture(joint), layout, k);
  return {fam.gain(0), fam.offset(0), fam.cond_cov(0)};
}

namespace {

// Propagates y = gain * z + offset + noise(cov) through all R steps.
StageLaw push_stage(const StageLaw& target, const TimeSchedule& schedule, int stage,
                    const std::optional<BiasSpec>& bias, ScoreGain gain_mode) {
  const auto d = target.cov.rows();
  const auto p = target.gain.cols();
  const Matrix eye = Matrix::Identity(d, d);
  StageLaw y{Matrix::Zero(d, p), Vector::Zero(d), eye};
  for (int r = 0; r < schedule.R; ++r) {
    const double tau = schedule.forward_time(r);
    const double alpha = std::exp(-tau);
    Matrix cov_t = alpha * alpha * target.cov;
    cov_t.diagonal().array() += -std::expm1(-2.0 * tau);
    const Eigen::LLT<Matrix> llt(cov_t);
    if (llt.info() != Eigen::Success) throw NumericalError("pushforward: diffused covariance not PD");
    const Matrix prec = llt.solve(eye);
    const auto step = AffineStep::for_step(schedule.eta_r[r], gain_mode);
    // s(y) = -prec (y - alpha (A z + b)) + bias
    const Matrix F = step.scale * eye - step.score_gain * prec;
    const Matrix G = step.score_gain * alpha * prec * target.gain;
    Vector h = step.score_gain * alpha * prec * target.offset;
    if (bias) {
      const double eps = bias->eps_for(stage);
      if (eps != 0.0)
        h += step.score_gain * eps * bias->direction_for(stage, r, static_cast<int>(d));
    }
    y.gain = F * y.gain + G;
    y.offset = F * y.offset + h;
    y.cov = F * y.cov * F.transpose();
    y.cov.diagonal().array() += step.noise_std * step.noise_std;
    y.cov = 0.5 * (y.cov + y.cov.transpose());
  }
  return y;
}

}  // namespace

PushforwardResult exact_pushforward(const Gaussian& joint, const PatchLayout& layout,
                                    const TimeSchedule& schedule, const std::optional<BiasSpec>& bias,
                                    ScoreGain gain) {
  require(joint.dim() == layout.total_dim(), "exact_pushforward: layout does not match target");
  const int K = layout.num_patches();
  const int n = layout.total_dim();
  std::vector<StageLaw> stages;
  Vector mean(n);
  Matrix cov = Matrix::Zero(n, n);
  for (int k = 1; k <= K; ++k) {
    const auto target = target_stage_law(joint, layout, k);
    auto law = push_stage(target, schedule, k, bias, gain);
    const auto pre = layout.prefix(k);
    const auto range = layout.index_range(k, k);
    const int p = pre.size();
    const int dk = range.size();
    if (p == 0) {
      mean.segment(range.begin, dk) = law.offset;
      cov.block(range.begin, range.begin, dk, dk) = law.cov;
    } else {
      const Matrix sxx = cov.topLeftCorner(p, p);
      const Matrix cross = law.gain * sxx;
      mean.segment(range.begin, dk) = law.gain * mean.head(p) + law.offset;
      cov.block(range.begin, 0, dk, p) = cross;
      cov.block(0, range.begin, p, dk) = cross.transpose();
      cov.block(range.begin, range.begin, dk, dk) = law.gain * sxx * law.gain.transpose() + law.cov;
    }
    stages.push_back(std::move(law));
  }
  cov = 0.5 * (cov + cov.transpose());
  Gaussian output(mean, cov);
  const double kl = kl_gaussian(joint, output);
  return {std::move(output), std::move(stages), kl};
}

PushforwardResult exact_pushforward(const GaussianMixture& joint, const PatchLayout& layout,
                                    const TimeSchedule& schedule, const std::optional<BiasSpec>& bias,
                                    ScoreGain gain) {
  require(joint.is_single(), "exact_pushforward needs a single-Gaussian target");
  return exact_pushforward(joint.component(0), layout, schedule, bias, gain);
}

double condition_averaged_kl(const StageLaw& p, const StageLaw& q,
                             const std::optional<Gaussian>& prefix_law, int nodes_per_dim) {
  const auto kl_at = [&](const Vector& x) {
    const Gaussian px(p.gain * x + p.offset, p.cov);
    const Gaussian qx(q.gain * x + q.offset, q.cov);
    return kl_gaussian(px, qx);
  };
  if (!prefix_law || p.gain.cols() == 0) return kl_at(Vector::Zero(0));
  return expect_gaussian(prefix_law->mean(), prefix_law->cov(), nodes_per_dim, kl_at);
}

std::vector<double> kl_chain_terms(const Gaussian& target, const PatchLayout& layout,
                                   const PushforwardResult& generated) {
  std::vector<double> terms;
  for (int k = 1; k <= layout.num_patches(); ++k) {
    const auto target_law = target_stage_law(target, layout, k);
    std::optional<Gaussian> prefix;
    if (k > 1) {
      const auto pre = layout.prefix(k);
      prefix.emplace(target.mean().head(pre.size()), target.cov().topLeftCorner(pre.size(), pre.size()));
    }
    terms.push_back(condition_averaged_kl(target_law, generated.stages[k - 1], prefix));
  }
  return terms;
}

}  // namespace ardiff
