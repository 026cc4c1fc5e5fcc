#pragma once

#include <vector>

#include "ardiff/common.hpp"

namespace ardiff {

// Reverse-time grid 0 = t_0 < ... < t_R = T with three regimes:
//   r <  M : uniform steps on [0, T-1]
//   M..N   : T - t_r = (1+eta)^{-(r-M)}, geometric approach to the data end
//   N..R   : uniform steps on the tail [T - delta', T]
// where delta' = (1+eta)^{-(N-M)} is the achieved tail width.
struct TimeSchedule {
  double T = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double delta_achieved = 0.0;
  std::vector<double> t;
  std::vector<double> eta_r;
  int M = 0;
  int N = 0;
  int R = 0;

  // 1, 2 or 3 for step r (0 <= r < R).
  int regime(int r) const;
  // Forward (noising) time T - t_r at which step r evaluates the score.
  double forward_time(int r) const { return T - t[static_cast<std::size_t>(r)]; }
  double max_step() const;
};

// Upper end of the admissible tail width: ln sqrt((4L)^{-2} + 1) + (4L)^{-1}.
double delta_admissible_max(double L);
// c = ln((sqrt(1/(4L^2) + 4) + 1/(2L)) / 2), the constant used by the
// hyperparameter requirements.
double step_constant(double L);

TimeSchedule build_schedule(double T, double eta, double delta, double L);

// Degenerate single-regime grid of R uniform steps on [0, T]; used for
// baselines and for R = 0 checks.
TimeSchedule uniform_schedule(double T, int R);

struct StepConditionReport {
  bool holds = true;
  // max over regime-2 steps of eta_r / (eta * min(1, T - t_{r+1}) * (1 + eta)).
  double worst_ratio = 0.0;
};

// Checks the regime-2 step-size condition eta_r <= eta * min(1, T - t_{r+1}) * (1 + eta).
StepConditionReport check_step_condition(const TimeSchedule& s);

struct BoundInputs {
  double L = 1.0;
  double m0 = 0.0;
  int d = 1;
  int K = 1;
  double eps_score = 0.0;
  double T = 0.0;
  double eta = 0.0;
  int R = 0;

  static BoundInputs from_schedule(const TimeSchedule& s, double L, double m0, int d, int K,
                                   double eps_score);
};

// 2 e^{-2T} L (m0 + d) + (L^2 R eta^2 + T eta) d + eta m0 + eta K R eps^2,
// with unit implied constant.
double kl_bound(const BoundInputs& b);

// Per-stage budget e^{-2T}(2 L d_k + E|y|^2) + eta * sum(loss) + d_k L^2 R eta^2
// + d_k T eta + eta E|y|^2.
double stage_bound(const BoundInputs& b, int patch_dim, double second_moment_cond,
                   double loss_partial_sum);

// e^{-2t} (2 L d + E|y|^2).
double init_error_bound(double L, int d, double second_moment, double t);

struct Hyperparams {
  double T = 0.0;
  double R_eta = 0.0;
  double eta = 0.0;
  int R = 0;
  double eps_score = 0.0;
  long long gradient_count = 0;  // K * R
  double c = 0.0;
};

Hyperparams hyperparams_for(double eps, double L, double m0, int d, int K);

struct GradientComplexity {
  // (K L^2 d / eps^2) ln(L (m0 + d) / eps)
  double formula = 0.0;
  // K (R eta)^2 4 L^2 d / eps^2, the expression before the logs are merged.
  double unsimplified = 0.0;
  // K * R from hyperparams_for.
  double exact = 0.0;
};

GradientComplexity gradient_complexity(int K, double L, int d, double eps, double m0);

}  // namespace ardiff
