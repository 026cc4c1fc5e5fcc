#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ardiff/common.hpp"

namespace ardiff {

struct LossTrace {
  std::vector<double> losses;
  std::string model_id;
  int K = 0;  // 0 = unspecified
  std::string task_id;

  int steps() const { return static_cast<int>(losses.size()); }
};

// CSV with header "step,loss".
void write_trace_csv(std::ostream& out, const LossTrace& trace);
LossTrace read_trace_csv(std::istream& in);

// Raised when no window satisfies the variance threshold.
class AnalysisError : public NumericalError {
 public:
  AnalysisError(const std::string& what, double min_variance)
      : NumericalError(what), min_variance_(min_variance) {}
  double min_variance() const { return min_variance_; }

 private:
  double min_variance_;
};

struct ConstantEstimate {
  double C_mean = 0.0;   // mean loss over the selected window
  double C_final = 0.0;  // loss at the final step
  int window_start = 0;
  double window_variance = 0.0;
};

// Latest window [h, h + window) whose loss variance is <= var_threshold.
ConstantEstimate estimate_constant(const LossTrace& trace, int window, double var_threshold);

struct LossComparison {
  std::vector<double> delta;
  double fraction_positive = 0.0;
};

// delta_s = (L_ddpm - |C_ddpm|) - K (L_ar - |C_ar|). Traces of unequal
// length are linearly resampled onto the shorter one's step grid.
LossComparison compare_losses(const LossTrace& ar, const LossTrace& ddpm, int K, double C_ar,
                              double C_ddpm);

}  // namespace ardiff
