#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ardiff/gauss.hpp"
#include "ardiff/oracle.hpp"
#include "ardiff/schedule.hpp"

namespace ardiff {

// Score weight in the integrator update. kDouble uses 2(e^eta - 1), the
// exact integral of the frozen drift y + 2s; kHalf uses (e^eta - 1) and is
// kept only for sensitivity runs.
enum class ScoreGain { kDouble, kHalf };

// Coefficients of y' = scale*y + score_gain*s + noise_std*xi for one step.
struct AffineStep {
  double scale = 1.0;
  double score_gain = 0.0;
  double noise_std = 0.0;

  static AffineStep for_step(double eta_r, ScoreGain gain = ScoreGain::kDouble);
};

Vector integrator_step(const Vector& y, const AffineStep& step, const Vector& s, const Vector& xi);

struct SamplerOptions {
  ScoreGain gain = ScoreGain::kDouble;
  int threads = 1;
};

// One reverse chain for patch `stage`: y_0 ~ N(0, I), then R integrator
// steps with the score frozen at (y_{t_r}, T - t_r, z). Noise for the initial
// draw and for step r comes from seed.child({stage, sample, 0}) and
// seed.child({stage, sample, r + 1}).
Vector sample_patch(const ScoreSource& source, const Condition& z, int patch_dim,
                    const TimeSchedule& schedule, const SeedPath& seed, int stage, int sample,
                    const SamplerOptions& opts = {});

// n chains for a fixed condition; one sample per row.
Matrix inner_sample(const ScoreSource& source, const Condition& z, int patch_dim,
                    const TimeSchedule& schedule, int n, const SeedPath& seed, int stage = 1,
                    const SamplerOptions& opts = {});

struct RunConfig {
  PatchLayout layout{std::vector<int>{1}};
  TimeSchedule schedule;
  // Patch index k (1-based) -> score source for that stage.
  std::function<ScoreSourcePtr(int)> source_factory;
  int n_samples = 1;
  SeedPath seed;
  SamplerOptions options;
};

// Autoregressive generation: patch 1 unconditionally, then each patch k
// conditioned on the generated prefix (identity conditioning map).
Matrix ar_sample(const RunConfig& cfg);

// Generated law of one stage: x_k | prefix ~ N(gain * prefix + offset, cov).
struct StageLaw {
  Matrix gain;
  Vector offset;
  Matrix cov;
};

struct PushforwardResult {
  Gaussian output;
  std::vector<StageLaw> stages;
  double kl = 0.0;  // KL(target || output)
};

// Closed-form law of ar_sample's output for a single-Gaussian target with the
// exact oracle (optionally plus a constant-bias perturbation). Every step is
// affine in (y, prefix), so the result is exactly Gaussian.
PushforwardResult exact_pushforward(const Gaussian& joint, const PatchLayout& layout,
                                    const TimeSchedule& schedule,
                                    const std::optional<BiasSpec>& bias = std::nullopt,
                                    ScoreGain gain = ScoreGain::kDouble);
PushforwardResult exact_pushforward(const GaussianMixture& joint, const PatchLayout& layout,
                                    const TimeSchedule& schedule,
                                    const std::optional<BiasSpec>& bias = std::nullopt,
                                    ScoreGain gain = ScoreGain::kDouble);

// Target conditional of patch k for a single Gaussian, in StageLaw form.
StageLaw target_stage_law(const Gaussian& joint, const PatchLayout& layout, int k);

// E_{x ~ prefix_law}[KL(N(A x + a, S) || N(B x + b, C))] by Gauss–Hermite.
// With an empty prefix this is the plain KL.
double condition_averaged_kl(const StageLaw& p, const StageLaw& q,
                             const std::optional<Gaussian>& prefix_law, int nodes_per_dim = 6);

// Per-stage terms of the KL chain rule; their sum is KL(target || output).
std::vector<double> kl_chain_terms(const Gaussian& target, const PatchLayout& layout,
                                   const PushforwardResult& generated);

}  // namespace ardiff
