#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ardiff/common.hpp"

namespace ardiff::synth {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kBackground{255, 255, 255};
inline constexpr Rgb kSun{255, 215, 0};
inline constexpr Rgb kPole{139, 69, 19};
inline constexpr Rgb kShadow{105, 105, 105};
inline constexpr Rgb kUpperSquare{220, 20, 60};
inline constexpr Rgb kLowerSquare{30, 144, 255};

// Row-major 8-bit RGB image.
class RasterImage {
 public:
  RasterImage(int width, int height, Rgb fill = kBackground);

  int width() const { return width_; }
  int height() const { return height_; }
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  const std::vector<std::uint8_t>& bytes() const { return pixels_; }
  std::vector<std::uint8_t>& bytes() { return pixels_; }
  bool operator==(const RasterImage&) const = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

// Task 1: l1 = horizontal sun offset from the pole base, h1 = sun height
// above the ground row, h2 = pole height, l2 = shadow length, with
// l1 / h1 = l2 / h2. Task 2: l1, l2 = side lengths of the upper and lower
// squares, l2 = 1.5 l1 (h1, h2 unused).
struct Features {
  double l1 = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  double l2 = 0.0;
};

struct TaskSample {
  RasterImage image;
  Features truth;
  double target_ratio = 1.0;
  int task = 1;
};

// Integer placement for Task 1; the sun is a disc of radius sun_radius.
struct Task1Params {
  int pole_x = 0;
  int l1 = 0;
  int h1 = 0;
  int h2 = 0;
  int sun_radius = 2;
};

struct Task1Bounds {
  int width = 32;
  int height = 32;
  int sun_radius = 2;
  int min_h2 = 4;
  int max_h2 = 24;
  int min_h1 = 6;
  int min_l1 = 4;
  int min_l2 = 2;
  int max_retries = 1000;
};

struct Task2Params {
  int upper_x = 0;
  int upper_y = 0;
  int l1 = 0;
  int lower_x = 0;
  int lower_y = 0;
  // Ratio used to size the lower square; 1.5 for well-formed samples.
  double ratio = 1.5;
};

struct Task2Bounds {
  int width = 32;
  int height = 32;
  int min_l1 = 2;
  int max_l1 = 10;
  double ratio = 1.5;
  int max_retries = 1000;
};

TaskSample render_task1(const Task1Params& p, int width = 32, int height = 32);
TaskSample render_task2(const Task2Params& p, int width = 32, int height = 32);

// Sample i depends only on (seed, i).
std::vector<TaskSample> gen_task1(int n, std::uint64_t seed, const Task1Bounds& bounds = {},
                                 int threads = 1);
std::vector<TaskSample> gen_task2(int n, std::uint64_t seed, const Task2Bounds& bounds = {},
                                 int threads = 1);

enum class PatchOrder { kRaster, kParallel };

// Flattened patches (row-major pixels, RGB interleaved, values 0..255).
// Raster visits patch rows top to bottom, left to right; parallel visits
// patch columns, emitting vertically aligned patches consecutively.
std::vector<Vector> patch_order(const RasterImage& image, int patch_size, PatchOrder order);
RasterImage reassemble(const std::vector<Vector>& tokens, int width, int height, int patch_size,
                       PatchOrder order);

class ExtractionError : public ValidationError {
 public:
  ExtractionError(const std::string& element)
      : ValidationError("extraction error: empty mask for " + element), element_(element) {}
  const std::string& element() const { return element_; }

 private:
  std::string element_;
};

struct Extraction {
  Features features;
  std::vector<int> mask_counts;  // Task 1: sun, pole, shadow; Task 2: upper, lower
};

Extraction extract_features(const RasterImage& image, int task, int tolerance = 0);

// Task 1: (l2 h1) / (l1 h2); Task 2: l2 / l1.
double feature_ratio(const Features& f, int task);
double target_ratio(int task);

struct EvalReport {
  int n_input = 0;
  int n_extracted = 0;
  std::vector<double> ratios;
  std::vector<double> filtered_ratios;
  double p05 = 0.0;
  double p95 = 0.0;
  // Least-squares slope of y = beta x through the origin; Task 1 pairs
  // (l1 h2, l2 h1), Task 2 pairs (l1, l2).
  double slope = 0.0;
  double r2 = 0.0;
  double slope_filtered = 0.0;
  double r2_filtered = 0.0;
  double fraction_within_10pct = 0.0;
};

EvalReport evaluate_features(const std::vector<Features>& features, int task);
EvalReport evaluate(const std::vector<RasterImage>& samples, int task, int tolerance = 0);

// Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

void write_ppm(std::ostream& out, const RasterImage& image);
RasterImage read_ppm(std::istream& in);

}  // namespace ardiff::synth
