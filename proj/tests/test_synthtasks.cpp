#include <gtest/gtest.h>

#include <sstream>

#include "ardiff/synthtasks.hpp"

using namespace ardiff;
using namespace ardiff::synth;

TEST(Render, Task1TruthExample) {
  const auto s = render_task1({.pole_x = 10, .l1 = 8, .h1 = 16, .h2 = 8});
  EXPECT_EQ(s.truth.l2, 4.0);
  EXPECT_EQ(s.target_ratio, 1.0);
  // pole column ends on the ground row, shadow on the ground row to the left
  EXPECT_EQ(s.image.at(10, 31), kPole);
  EXPECT_EQ(s.image.at(10, 24), kPole);
  EXPECT_EQ(s.image.at(10, 23), kBackground);
  EXPECT_EQ(s.image.at(9, 31), kShadow);
  EXPECT_EQ(s.image.at(6, 31), kShadow);
  EXPECT_EQ(s.image.at(5, 31), kBackground);
  EXPECT_EQ(s.image.at(18, 15), kSun);
}

TEST(Render, Task2TruthExample) {
  const auto s = render_task2({.upper_x = 2, .upper_y = 2, .l1 = 6, .lower_x = 4, .lower_y = 18});
  EXPECT_EQ(s.truth.l2, 9.0);
  EXPECT_EQ(s.target_ratio, 1.5);
}

TEST(Generate, TruthSatisfiesConstraintsAndIsDeterministic) {
  const auto a = gen_task1(200, 3);
  for (const auto& s : a) EXPECT_NEAR(s.truth.l1 / s.truth.h1, s.truth.l2 / s.truth.h2, 1e-12);
  const auto b = gen_task1(200, 3, {}, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].image, b[i].image);
  for (const auto& s : gen_task2(200, 4)) EXPECT_EQ(s.truth.l2 / s.truth.l1, 1.5);
}

TEST(Generate, RoundTripWithinQuantizationBound) {
  for (int task : {1, 2}) {
    const auto samples = task == 1 ? gen_task1(1000, 5) : gen_task2(1000, 6);
    for (const auto& s : samples) {
      const auto f = extract_features(s.image, task).features;
      double m = std::min(f.l1, f.l2);
      if (task == 1) m = std::min({m, f.h1, f.h2});
      ASSERT_LE(std::abs(feature_ratio(f, task) - s.target_ratio), 2.0 / m);
      ASSERT_LE(std::abs(f.l1 - s.truth.l1), 1.0);
      ASSERT_LE(std::abs(f.l2 - s.truth.l2), 1.0);
    }
  }
}

TEST(Generate, TrainingSetFitIsNearPerfect) {
  for (int task : {1, 2}) {
    const auto samples = task == 1 ? gen_task1(3000, 7) : gen_task2(3000, 8);
    std::vector<RasterImage> images;
    for (const auto& s : samples) images.push_back(s.image);
    EXPECT_GE(evaluate(images, task).r2, 0.99) << task;
  }
}

TEST(PatchOrder, TokenCounts) {
  const RasterImage img(32, 32);
  const auto t16 = patch_order(img, 16, PatchOrder::kRaster);
  ASSERT_EQ(t16.size(), 4u);
  EXPECT_EQ(t16[0].size(), 768);
  EXPECT_EQ(patch_order(img, 8, PatchOrder::kParallel).size(), 16u);
  EXPECT_THROW(patch_order(img, 10, PatchOrder::kRaster), ValidationError);
}

TEST(PatchOrder, ReassemblyIsIdentity) {
  const auto s = gen_task1(1, 9).front();
  for (int p : {8, 16})
    for (auto order : {PatchOrder::kRaster, PatchOrder::kParallel})
      EXPECT_EQ(reassemble(patch_order(s.image, p, order), 32, 32, p, order), s.image);
}

TEST(PatchOrder, ParallelIsColumnMajor) {
  RasterImage img(32, 32);
  img.set(16, 0, kSun);  // top-right patch
  const auto raster = patch_order(img, 16, PatchOrder::kRaster);
  const auto par = patch_order(img, 16, PatchOrder::kParallel);
  EXPECT_EQ(raster[1], par[2]);
  EXPECT_EQ(raster[2], par[1]);
  EXPECT_EQ(raster[0], par[0]);
}

TEST(Extract, Errors) {
  try {
    extract_features(RasterImage(32, 32), 1);
    FAIL();
  } catch (const ExtractionError& e) {
    EXPECT_EQ(e.element(), "sun");
  }
  auto s = render_task1({.pole_x = 10, .l1 = 8, .h1 = 16, .h2 = 8});
  for (int x = 0; x < 32; ++x)
    if (s.image.at(x, 31) == kShadow) s.image.set(x, 31, kBackground);
  try {
    extract_features(s.image, 1);
    FAIL();
  } catch (const ExtractionError& e) {
    EXPECT_EQ(e.element(), "shadow");
  }
  EXPECT_THROW(extract_features(s.image, 1, 200), ValidationError);
}

TEST(Evaluate, ExactRatios) {
  std::vector<Features> fs;
  for (int i = 0; i < 20; ++i) fs.push_back({2.0 + i, 0, 0, 1.5 * (2.0 + i)});
  const auto r = evaluate_features(fs, 2);
  EXPECT_NEAR(r.r2, 1.0, 1e-12);
  EXPECT_NEAR(r.slope, 1.5, 1e-12);
  EXPECT_EQ(r.fraction_within_10pct, 1.0);
  fs.resize(9);
  EXPECT_THROW(evaluate_features(fs, 2), ValidationError);
}

TEST(Evaluate, PlantedHalfMix) {
  std::vector<Features> fs;
  for (int i = 0; i < 400; ++i) {
    const double l1 = 2.0 + i % 9;
    fs.push_back({l1, 0, 0, (i % 2 ? 3.0 : 1.5) * l1});
  }
  const auto r = evaluate_features(fs, 2);
  EXPECT_NEAR(r.fraction_within_10pct, 0.5, 3 * std::sqrt(0.25 / 400));
  EXPECT_LE(static_cast<int>(r.ratios.size() - r.filtered_ratios.size()), static_cast<int>(0.1 * 400) + 2);
}

TEST(Evaluate, FilterRemovesAtMostTenPercentPlusTwo) {
  for (int n : {10, 37, 100, 1001}) {
    std::vector<Features> fs;
    for (int i = 0; i < n; ++i) fs.push_back({3.0, 0, 0, 1.0 + 0.37 * ((i * 7919) % n)});
    const auto r = evaluate_features(fs, 2);
    EXPECT_LE(static_cast<int>(r.ratios.size() - r.filtered_ratios.size()), n / 10 + 2) << n;
  }
}

TEST(Ppm, RoundTrip) {
  const auto s = gen_task2(1, 10).front();
  std::stringstream buf;
  write_ppm(buf, s.image);
  EXPECT_EQ(read_ppm(buf), s.image);
}
