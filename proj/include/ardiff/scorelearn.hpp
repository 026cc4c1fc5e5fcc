#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ardiff/oracle.hpp"
#include "ardiff/schedule.hpp"
#include "ardiff/scorenet.hpp"
#include "ardiff/trace.hpp"

namespace ardiff {

enum class TimeSampling { kUniform, kReweighted };

// Pr(r) proportional to 1 - e^{-2 (T - t_r)}, r = 0..R-1.
Vector time_distribution(const TimeSchedule& schedule);
// Uniform or reweighted probabilities over r.
Vector time_weights(const TimeSchedule& schedule, TimeSampling sampling);

// Source of training points x ~ p_*: an analytic mixture or a finite dataset.
using DataSampler = std::function<Vector(NoiseStream&)>;
DataSampler mixture_sampler(const GaussianMixture& target);
// Uniform draws from the rows of `data`.
DataSampler dataset_sampler(std::shared_ptr<const Matrix> data);

struct DsmSettings {
  int batch = 64;
  SeedPath seed;
  TimeSampling sampling = TimeSampling::kUniform;
};

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;
};

// Monte-Carlo estimate of (1/KR) sum_k sum_r E ||xi - eps_hat(y_{T-t_r} | T-t_r, x_[1:k-1])||^2
// with y_tau = e^{-tau} x_k + sqrt(1 - e^{-2 tau}) xi, and its parameter gradient.
LossAndGrad dsm_loss(const ScoreNet& model, const DataSampler& data, const PatchLayout& layout,
                     const TimeSchedule& schedule, const DsmSettings& settings);

// The same estimator for an arbitrary score source, using eps_hat = -sigma_tau * s.
double dsm_loss_source(const ScoreSource& source, const DataSampler& data,
                       const PatchLayout& layout, const TimeSchedule& schedule,
                       const DsmSettings& settings);

// Closed-form minimum of the DSM objective over all functions, for a
// single-Gaussian target: sum over (k, r) of w_r (d_k - sigma^2 tr(Sigma_{k,tau}^{-1})) / K.
double dsm_irreducible_constant(const Gaussian& target, const PatchLayout& layout,
                                const TimeSchedule& schedule,
                                TimeSampling sampling = TimeSampling::kUniform);

struct SmSettings {
  int batch = 256;
  SeedPath seed;
  // Multiply each slice by 1 - e^{-2 tau}; false gives the plain average.
  bool weighted = true;
};

// Monte-Carlo score-matching objective against the exact conditional scores.
double sm_loss(const ScoreSource& model, const std::vector<std::shared_ptr<OracleScore>>& oracles,
               const DataSampler& data, const PatchLayout& layout, const TimeSchedule& schedule,
               const SmSettings& settings);

// Linear score family s(y) = theta[0] * y + theta[1] on a 1-D Gaussian
// target N(mean, var), shared across the schedule's times.
struct LinearScoreProblem {
  double mean = 0.0;
  double var = 1.0;
  Eigen::Vector2d theta = Eigen::Vector2d::Zero();
};

struct QuadratureLosses {
  double dsm = 0.0;
  double sm = 0.0;
  Eigen::Vector2d grad_dsm = Eigen::Vector2d::Zero();
  Eigen::Vector2d grad_sm = Eigen::Vector2d::Zero();
};

// DSM and weighted SM losses and gradients by Gauss–Hermite quadrature, averaged
// uniformly over forward times T - t_r.
QuadratureLosses linear_family_losses(const LinearScoreProblem& problem,
                                      const TimeSchedule& schedule, int nodes = 64);

struct GradEquivalenceReport {
  QuadratureLosses losses;
  double max_abs_diff = 0.0;
};

GradEquivalenceReport grad_equivalence_check(const LinearScoreProblem& problem,
                                             const TimeSchedule& schedule, int nodes = 64);

// Minimizer of the quadrature-exact DSM at a single forward time tau.
Eigen::Vector2d dsm_linear_argmin(double mean, double var, double tau, int nodes = 64);

struct TrainConfig {
  double lr = 3e-4;
  int steps = 1000;
  int batch = 64;
  std::uint64_t seed = 0;
  TimeSampling sampling = TimeSampling::kUniform;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double divergence_threshold = 1e6;
};

// Thrown when the training loss exceeds the divergence threshold; carries
// the trace up to and including the offending step.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, LossTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const LossTrace& trace() const { return trace_; }

 private:
  LossTrace trace_;
};

// Adam on the DSM objective; model is updated in place. Step s uses batch
// seed SeedPath(seed).child(s).
LossTrace train(ScoreNet& model, const DataSampler& data, const PatchLayout& layout,
                const TimeSchedule& schedule, const TrainConfig& config);

}  // namespace ardiff
