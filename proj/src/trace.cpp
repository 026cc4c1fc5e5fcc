#include "ardiff/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ardiff {

void write_trace_csv(std::ostream& out, const LossTrace& trace) {
  out << "step,loss\n";
  char buf[64];
  for (int s = 0; s < trace.steps(); ++s) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", s, trace.losses[s]);
    out << buf;
  }
}

LossTrace read_trace_csv(std::istream& in) {
  LossTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("trace CSV is empty");
  if (line.rfind("step,loss", 0) != 0) throw ValidationError("trace CSV must start with header step,loss");
  int expect = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("trace CSV: malformed row '" + line + "'");
    try {
      const int step = std::stoi(line.substr(0, comma));
      const double loss = std::stod(line.substr(comma + 1));
      if (step != expect) throw ValidationError("trace CSV: steps must be consecutive from 0");
      if (!std::isfinite(loss)) throw ValidationError("trace CSV: non-finite loss at step " + std::to_string(step));
      trace.losses.push_back(loss);
      ++expect;
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ValidationError*>(&e)) throw;
      throw ValidationError("trace CSV: malformed row '" + line + "'");
    }
  }
  if (trace.losses.empty()) throw ValidationError("trace CSV has no rows");
  return trace;
}

ConstantEstimate estimate_constant(const LossTrace& trace, int window, double var_threshold) {
  const int S = trace.steps();
  require(window >= 2 && window <= S, "estimate_constant: window must lie in [2, S]");
  require(var_threshold >= 0.0, "estimate_constant: threshold must be >= 0");
  // Prefix sums of shifted values keep the variance well conditioned.
  const double shift = trace.losses.back();
  std::vector<double> s1(S + 1, 0.0), s2(S + 1, 0.0);
  for (int i = 0; i < S; ++i) {
    const double v = trace.losses[i] - shift;
    s1[i + 1] = s1[i] + v;
    s2[i + 1] = s2[i] + v * v;
  }
  double min_var = std::numeric_limits<double>::infinity();
  for (int h = S - window; h >= 0; --h) {
    const double mean = (s1[h + window] - s1[h]) / window;
    const double var = std::max(0.0, (s2[h + window] - s2[h]) / window - mean * mean);
    min_var = std::min(min_var, var);
    if (var <= var_threshold) return {mean + shift, trace.losses.back(), h, var};
  }
  std::ostringstream msg;
  msg << "estimate_constant: no window of length " << window << " has variance <= " << var_threshold
      << " (minimum found " << min_var << ")";
  throw AnalysisError(msg.str(), min_var);
}

namespace {

std::vector<double> resample(const std::vector<double>& v, std::size_t n) {
  if (v.size() == n) return v;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = n == 1 ? 0.0 : static_cast<double>(i) * (v.size() - 1) / (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - lo;
    out[i] = (1.0 - frac) * v[lo] + frac * v[hi];
  }
  return out;
}

}  // namespace

LossComparison compare_losses(const LossTrace& ar, const LossTrace& ddpm, int K, double C_ar,
                              double C_ddpm) {
  require(K >= 1, "compare_losses: K must be >= 1");
  require(ar.K == 0 || ar.K == K, "compare_losses: AR trace metadata K=" + std::to_string(ar.K) +
                                      " does not match K=" + std::to_string(K));
  require(ddpm.K == 0 || ddpm.K == 1, "compare_losses: DDPM trace must have K=1");
  require(ar.steps() >= 1 && ddpm.steps() >= 1, "compare_losses: empty trace");
  const std::size_t n = std::min(ar.losses.size(), ddpm.losses.size());
  const auto a = resample(ar.losses, n);
  const auto b = resample(ddpm.losses, n);
  LossComparison out;
  out.delta.resize(n);
  std::size_t positive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err_ar = K * (a[i] - std::abs(C_ar));
    const double err_ddpm = b[i] - std::abs(C_ddpm);
    out.delta[i] = err_ddpm - err_ar;
    if (out.delta[i] > 0.0) ++positive;
  }
  out.fraction_positive = static_cast<double>(positive) / static_cast<double>(n);
  return out;
}

}  // namespace ardiff
