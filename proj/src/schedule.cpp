#include "ardiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ardiff {

namespace {

// ceil that ignores rounding noise just above an integer.
int robust_ceil(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-12 * std::max(1.0, std::abs(x))) return static_cast<int>(nearest);
  return static_cast<int>(std::ceil(x));
}

void finish(TimeSchedule& s) {
  s.t.back() = s.T;
  s.R = static_cast<int>(s.t.size()) - 1;
  s.eta_r.resize(static_cast<std::size_t>(s.R));
  for (int r = 0; r < s.R; ++r) {
    s.eta_r[r] = s.t[r + 1] - s.t[r];
    if (!(s.eta_r[r] > 0.0)) throw NumericalError("schedule: non-increasing grid at r=" + std::to_string(r));
  }
}

}  // namespace

int TimeSchedule::regime(int r) const {
  if (r < M) return 1;
  if (r < N) return 2;
  return 3;
}

double TimeSchedule::max_step() const {
  return eta_r.empty() ? 0.0 : *std::max_element(eta_r.begin(), eta_r.end());
}

double delta_admissible_max(double L) {
  require(L > 0.0, "L must be positive");
  const double q = 1.0 / (4.0 * L);
  return std::log(std::sqrt(q * q + 1.0)) + q;
}

double step_constant(double L) {
  require(L > 0.0, "L must be positive");
  return std::log((std::sqrt(1.0 / (4.0 * L * L) + 4.0) + 1.0 / (2.0 * L)) / 2.0);
}

TimeSchedule build_schedule(double T, double eta, double delta, double L) {
  require(T > 1.0, "schedule error: T must exceed 1 (got " + std::to_string(T) + ")");
  require(eta > 0.0 && eta <= 1.0, "schedule error: eta must lie in (0, 1]");
  require(L > 0.0, "schedule error: L must be positive");
  const double dmax = delta_admissible_max(L);
  require(delta > 0.0 && delta <= dmax * (1.0 + 1e-12),
          "schedule error: delta=" + std::to_string(delta) +
              " outside admissible interval (0, ln sqrt((4L)^-2 + 1) + (4L)^-1 = " +
              std::to_string(dmax) + "]");

  TimeSchedule s;
  s.T = T;
  s.eta = eta;
  s.delta = delta;

  const int m = std::max(1, robust_ceil((T - 1.0) / eta));
  const double h1 = (T - 1.0) / m;
  for (int r = 0; r < m; ++r) s.t.push_back(r * h1);
  s.t.push_back(T - 1.0);
  s.M = m;

  const int n2 = std::max(0, robust_ceil(std::log(1.0 / delta) / std::log1p(eta)));
  for (int j = 1; j <= n2; ++j) s.t.push_back(T - std::pow(1.0 + eta, -j));
  s.N = m + n2;
  s.delta_achieved = std::pow(1.0 + eta, -n2);

  const int n3 = std::max(1, robust_ceil(s.delta_achieved / eta));
  const double h3 = s.delta_achieved / n3;
  const double tail_start = s.t.back();
  for (int j = 1; j <= n3; ++j) s.t.push_back(tail_start + j * h3);
  finish(s);
  return s;
}

TimeSchedule uniform_schedule(double T, int R) {
  require(T > 0.0, "uniform_schedule: T must be positive");
  require(R >= 0, "uniform_schedule: R must be >= 0");
  TimeSchedule s;
  s.T = T;
  s.eta = R > 0 ? T / R : 0.0;
  s.t.push_back(0.0);
  for (int r = 1; r <= R; ++r) s.t.push_back(T * r / R);
  if (R == 0) {
    s.R = 0;
    return s;
  }
  finish(s);
  s.M = s.N = s.R;
  return s;
}

StepConditionReport check_step_condition(const TimeSchedule& s) {
  StepConditionReport rep;
  for (int r = s.M; r < s.N; ++r) {
    const double remaining = s.T - s.t[r + 1];
    const double cap = s.eta * std::min(1.0, remaining) * (1.0 + s.eta);
    const double ratio = s.eta_r[r] / cap;
    rep.worst_ratio = std::max(rep.worst_ratio, ratio);
    if (ratio > 1.0 + 1e-9) rep.holds = false;
  }
  return rep;
}

BoundInputs BoundInputs::from_schedule(const TimeSchedule& s, double L, double m0, int d, int K,
                                       double eps_score) {
  return {L, m0, d, K, eps_score, s.T, s.eta, s.R};
}

double kl_bound(const BoundInputs& b) {
  const double d = b.d;
  return 2.0 * std::exp(-2.0 * b.T) * b.L * (b.m0 + d) +
         (b.L * b.L * b.R * b.eta * b.eta + b.T * b.eta) * d + b.eta * b.m0 +
         b.eta * b.K * b.R * b.eps_score * b.eps_score;
}

double stage_bound(const BoundInputs& b, int patch_dim, double second_moment_cond,
                   double loss_partial_sum) {
  const double dk = patch_dim;
  return std::exp(-2.0 * b.T) * (2.0 * b.L * dk + second_moment_cond) +
         b.eta * loss_partial_sum + dk * b.L * b.L * b.R * b.eta * b.eta + dk * b.T * b.eta +
         b.eta * second_moment_cond;
}

double init_error_bound(double L, int d, double second_moment, double t) {
  require(t >= 0.0, "init_error_bound: t must be >= 0");
  return std::exp(-2.0 * t) * (2.0 * L * d + second_moment);
}

Hyperparams hyperparams_for(double eps, double L, double m0, int d, int K) {
  require(eps > 0.0 && eps < 1.0, "hyperparams_for: eps must lie in (0, 1)");
  require(L >= 1.0, "hyperparams_for: L must be >= 1");
  require(d >= 1 && K >= 1 && m0 >= 0.0, "hyperparams_for: invalid d, K or m0");
  Hyperparams h;
  h.c = step_constant(L);
  h.T = std::log(8.0 * L * (m0 + d) / (eps * eps));
  h.R_eta = h.T + std::log(1.0 / h.c);
  h.eps_score = eps / (2.0 * std::sqrt(K * h.R_eta));
  h.eta = eps * eps / (4.0 * L * L * h.R_eta * d);
  h.R = static_cast<int>(std::ceil(h.R_eta / h.eta));
  h.gradient_count = static_cast<long long>(K) * h.R;
  return h;
}

GradientComplexity gradient_complexity(int K, double L, int d, double eps, double m0) {
  const auto h = hyperparams_for(eps, L, m0, d, K);
  GradientComplexity g;
  g.formula = K * L * L * d / (eps * eps) * std::log(L * (m0 + d) / eps);
  g.unsimplified = K * h.R_eta * h.R_eta * 4.0 * L * L * d / (eps * eps);
  g.exact = static_cast<double>(h.gradient_count);
  return g;
}

}  // namespace ardiff
