#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ardiff/rng.hpp"
#include "ardiff/trace.hpp"

using namespace ardiff;

namespace {
LossTrace make(std::vector<double> v) {
  LossTrace t;
  t.losses = std::move(v);
  return t;
}
}  // namespace

TEST(TraceCsv, RoundTrip) {
  NoiseStream rng(SeedPath(1));
  LossTrace t;
  for (int i = 0; i < 100; ++i) t.losses.push_back(rng.normal() * 1e-3 + 1.0 / (i + 1));
  std::stringstream ss;
  write_trace_csv(ss, t);
  EXPECT_EQ(read_trace_csv(ss).losses, t.losses);
}

TEST(TraceCsv, RejectsMalformedInput) {
  std::istringstream empty("");
  EXPECT_THROW(read_trace_csv(empty), ValidationError);
  std::istringstream header("foo,bar\n0,1\n");
  EXPECT_THROW(read_trace_csv(header), ValidationError);
  std::istringstream gap("step,loss\n0,1\n2,1\n");
  EXPECT_THROW(read_trace_csv(gap), ValidationError);
  std::istringstream junk("step,loss\n0,abc\n");
  EXPECT_THROW(read_trace_csv(junk), ValidationError);
  std::istringstream none("step,loss\n");
  EXPECT_THROW(read_trace_csv(none), ValidationError);
}

TEST(EstimateConstant, ConstantTrace) {
  const auto t = make(std::vector<double>(1200, 0.37));
  const auto c = estimate_constant(t, 500, 1e-4);
  EXPECT_EQ(c.C_mean, 0.37);
  EXPECT_EQ(c.C_final, 0.37);
  EXPECT_EQ(c.window_start, 700);
}

TEST(EstimateConstant, RecoversPlantedConstant) {
  NoiseStream rng(SeedPath(2));
  const double c = 0.52;
  LossTrace t;
  for (int s = 0; s < 5000; ++s) t.losses.push_back(c + 0.5 * std::exp(-s / 200.0) + 1e-3 * rng.normal());
  const auto est = estimate_constant(t, 500, 1e-4);
  EXPECT_NEAR(est.C_mean, c, 3 * 1e-3 / std::sqrt(500.0));
}

TEST(EstimateConstant, Errors) {
  NoiseStream rng(SeedPath(3));
  LossTrace noisy;
  for (int s = 0; s < 1000; ++s) noisy.losses.push_back(rng.normal());
  try {
    estimate_constant(noisy, 100, 1e-4);
    FAIL();
  } catch (const AnalysisError& e) {
    EXPECT_GT(e.min_variance(), 1e-4);
  }
  EXPECT_THROW(estimate_constant(make({1, 2, 3}), 10, 1.0), ValidationError);
}

TEST(CompareLosses, IdenticalTraces) {
  const auto t = make({0.5, 0.4, 0.45, 0.41});
  const auto cmp = compare_losses(t, t, 1, 0.3, 0.3);
  for (double d : cmp.delta) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(cmp.fraction_positive, 0.0);
}

TEST(CompareLosses, PlantedFractions) {
  for (double frac : {0.76, 0.12}) {
    const int n = 1000;
    const int pos = static_cast<int>(std::lround(frac * n));
    LossTrace ar, dd;
    for (int s = 0; s < n; ++s) {
      ar.losses.push_back(1.0 + 0.01);
      dd.losses.push_back(s < pos ? 1.0 + 0.05 : 1.0 + 0.01);
    }
    // K = 2 doubles the AR excess 0.01 -> 0.02
    const auto cmp = compare_losses(ar, dd, 2, 1.0, 1.0);
    EXPECT_EQ(cmp.fraction_positive, frac);
  }
}

TEST(CompareLosses, CommonScalingKeepsSignPattern) {
  NoiseStream rng(SeedPath(4));
  LossTrace ar, dd;
  for (int s = 0; s < 300; ++s) {
    ar.losses.push_back(0.5 + 0.02 * rng.uniform());
    dd.losses.push_back(0.5 + 0.05 * rng.uniform());
  }
  const auto a = compare_losses(ar, dd, 1, 0.5, 0.5);
  // shift every loss and both constants by the same amount
  LossTrace ar2 = ar, dd2 = dd;
  for (auto& v : ar2.losses) v += 3.0;
  for (auto& v : dd2.losses) v += 3.0;
  const auto b = compare_losses(ar2, dd2, 1, 3.5, 3.5);
  ASSERT_EQ(a.delta.size(), b.delta.size());
  for (std::size_t i = 0; i < a.delta.size(); ++i) EXPECT_EQ(a.delta[i] > 0, b.delta[i] > 0);
  EXPECT_EQ(a.fraction_positive, b.fraction_positive);
}

TEST(CompareLosses, ResamplesUnequalLengthsAndChecksK) {
  const auto cmp = compare_losses(make({1, 1, 1, 1}), make({2, 2}), 1, 0, 0);
  EXPECT_EQ(cmp.delta.size(), 2u);
  auto ar = make({1, 1});
  auto dd = make({1, 1});
  ar.K = 3;
  EXPECT_THROW(compare_losses(ar, dd, 2, 0, 0), ValidationError);
}
