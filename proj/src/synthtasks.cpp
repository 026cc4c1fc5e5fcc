#include "ardiff/synthtasks.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <cctype>

#include "ardiff/parallel.hpp"
#include "ardiff/rng.hpp"

namespace ardiff::synth {

RasterImage::RasterImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  require(width > 0 && height > 0, "image dimensions must be positive");
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill[0];
    pixels_[i + 1] = fill[1];
    pixels_[i + 2] = fill[2];
  }
}

Rgb RasterImage::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void RasterImage::set(int x, int y, Rgb c) {
  require(x >= 0 && x < width_ && y >= 0 && y < height_, "pixel outside the canvas");
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  pixels_[i] = c[0];
  pixels_[i + 1] = c[1];
  pixels_[i + 2] = c[2];
}

namespace {

int uniform_int(NoiseStream& rng, int lo, int hi) {
  // inclusive bounds
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng.next_u64() % span);
}

}  // namespace

TaskSample render_task1(const Task1Params& p, int width, int height) {
  require(p.l1 > 0 && p.h1 > 0 && p.h2 > 0, "task 1 lengths must be positive");
  const int ground = height - 1;
  const double l2 = static_cast<double>(p.l1) * p.h2 / p.h1;
  const int l2_px = static_cast<int>(std::nearbyint(l2));
  const int cx = p.pole_x + p.l1;
  const int cy = ground - p.h1;
  const int r = p.sun_radius;
  require(cx + r < width && cy - r >= 0 && cy + r < ground, "sun outside the canvas");
  require(p.h2 <= height, "pole taller than the canvas");
  require(p.pole_x - l2_px >= 0 && p.pole_x < width, "shadow outside the canvas");
  require(l2_px >= 1, "shadow shorter than one pixel");

  RasterImage img(width, height);
  for (int y = cy - r; y <= cy + r; ++y)
    for (int x = cx - r; x <= cx + r; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.set(x, y, kSun);
  for (int y = ground - p.h2 + 1; y <= ground; ++y) img.set(p.pole_x, y, kPole);
  // shadow falls away from the sun along the ground row
  for (int x = p.pole_x - l2_px; x < p.pole_x; ++x) img.set(x, ground, kShadow);

  TaskSample s{std::move(img), {}, 1.0, 1};
  s.truth = {static_cast<double>(p.l1), static_cast<double>(p.h1), static_cast<double>(p.h2), l2};
  return s;
}

TaskSample render_task2(const Task2Params& p, int width, int height) {
  require(p.l1 > 0, "task 2 side length must be positive");
  const double l2 = p.ratio * p.l1;
  const int l2_px = static_cast<int>(std::nearbyint(l2));
  const int half = height / 2;
  require(p.upper_x >= 0 && p.upper_x + p.l1 <= width && p.upper_y >= 0 &&
              p.upper_y + p.l1 <= half,
          "upper square outside the upper half");
  require(p.lower_x >= 0 && p.lower_x + l2_px <= width && p.lower_y >= half &&
              p.lower_y + l2_px <= height,
          "lower square outside the lower half");
  RasterImage img(width, height);
  for (int y = p.upper_y; y < p.upper_y + p.l1; ++y)
    for (int x = p.upper_x; x < p.upper_x + p.l1; ++x) img.set(x, y, kUpperSquare);
  for (int y = p.lower_y; y < p.lower_y + l2_px; ++y)
    for (int x = p.lower_x; x < p.lower_x + l2_px; ++x) img.set(x, y, kLowerSquare);
  TaskSample s{std::move(img), {}, 1.5, 2};
  s.truth = {static_cast<double>(p.l1), 0.0, 0.0, l2};
  return s;
}

namespace {

std::optional<Task1Params> draw_task1(NoiseStream& rng, const Task1Bounds& b) {
  const int ground = b.height - 1;
  Task1Params p;
  p.sun_radius = b.sun_radius;
  p.h2 = uniform_int(rng, b.min_h2, b.max_h2);
  p.h1 = uniform_int(rng, b.min_h1, ground - b.sun_radius);
  p.l1 = uniform_int(rng, b.min_l1, b.width - 1 - b.sun_radius - b.min_l2);
  const int l2_px = static_cast<int>(std::nearbyint(static_cast<double>(p.l1) * p.h2 / p.h1));
  if (l2_px < b.min_l2) return std::nullopt;
  const int hi = b.width - 1 - b.sun_radius - p.l1;
  if (hi < l2_px) return std::nullopt;
  p.pole_x = uniform_int(rng, l2_px, hi);
  return p;
}

std::optional<Task2Params> draw_task2(NoiseStream& rng, const Task2Bounds& b) {
  const int half = b.height / 2;
  Task2Params p;
  p.ratio = b.ratio;
  p.l1 = uniform_int(rng, b.min_l1, b.max_l1);
  const int l2_px = static_cast<int>(std::nearbyint(b.ratio * p.l1));
  if (p.l1 > half || p.l1 > b.width || l2_px > b.height - half || l2_px > b.width)
    return std::nullopt;
  p.upper_x = uniform_int(rng, 0, b.width - p.l1);
  p.upper_y = uniform_int(rng, 0, half - p.l1);
  p.lower_x = uniform_int(rng, 0, b.width - l2_px);
  p.lower_y = uniform_int(rng, half, b.height - l2_px);
  return p;
}

template <class Draw, class Render>
std::vector<TaskSample> generate(int n, std::uint64_t seed, int retries, int threads, Draw draw,
                                 Render render) {
  require(n >= 0, "sample count must be nonnegative");
  std::vector<std::optional<TaskSample>> out(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](int i) {
    NoiseStream rng(SeedPath(seed).child(static_cast<std::uint64_t>(i)));
    for (int attempt = 0; attempt < retries; ++attempt) {
      if (auto p = draw(rng)) {
        out[i].emplace(render(*p));
        return;
      }
    }
    throw ValidationError("geometry bounds admit no sample after " + std::to_string(retries) +
                          " retries");
  });
  std::vector<TaskSample> samples;
  samples.reserve(out.size());
  for (auto& s : out) samples.push_back(std::move(*s));
  return samples;
}

}  // namespace

std::vector<TaskSample> gen_task1(int n, std::uint64_t seed, const Task1Bounds& b, int threads) {
  require(b.min_h2 >= 1 && b.min_h2 <= b.max_h2 && b.max_h2 <= b.height, "bad pole bounds");
  require(b.min_h1 > b.sun_radius && b.min_h1 <= b.height - 1 - b.sun_radius, "bad sun bounds");
  require(b.min_l1 > b.sun_radius, "sun would overlap the pole");
  require(b.min_l2 >= 1, "shadow must be at least one pixel");
  return generate(
      n, seed, b.max_retries, threads, [&](NoiseStream& rng) { return draw_task1(rng, b); },
      [&](const Task1Params& p) { return render_task1(p, b.width, b.height); });
}

std::vector<TaskSample> gen_task2(int n, std::uint64_t seed, const Task2Bounds& b, int threads) {
  require(b.min_l1 >= 1 && b.min_l1 <= b.max_l1, "bad square bounds");
  return generate(
      n, seed, b.max_retries, threads, [&](NoiseStream& rng) { return draw_task2(rng, b); },
      [&](const Task2Params& p) { return render_task2(p, b.width, b.height); });
}

namespace {

struct PatchGrid {
  int rows;
  int cols;
};

PatchGrid check_grid(int width, int height, int ps) {
  require(ps > 0 && width % ps == 0 && height % ps == 0,
          "patch size must divide the image width and height");
  return {height / ps, width / ps};
}

// (patch row, patch col) of the i-th token
std::pair<int, int> token_position(int i, const PatchGrid& g, PatchOrder order) {
  if (order == PatchOrder::kRaster) return {i / g.cols, i % g.cols};
  return {i % g.rows, i / g.rows};
}

}  // namespace

std::vector<Vector> patch_order(const RasterImage& image, int ps, PatchOrder order) {
  const PatchGrid g = check_grid(image.width(), image.height(), ps);
  std::vector<Vector> tokens;
  tokens.reserve(static_cast<std::size_t>(g.rows * g.cols));
  for (int i = 0; i < g.rows * g.cols; ++i) {
    const auto [pr, pc] = token_position(i, g, order);
    Vector v(ps * ps * 3);
    int j = 0;
    for (int y = pr * ps; y < (pr + 1) * ps; ++y)
      for (int x = pc * ps; x < (pc + 1) * ps; ++x) {
        const Rgb c = image.at(x, y);
        for (int ch = 0; ch < 3; ++ch) v[j++] = c[ch];
      }
    tokens.push_back(std::move(v));
  }
  return tokens;
}

RasterImage reassemble(const std::vector<Vector>& tokens, int width, int height, int ps,
                       PatchOrder order) {
  const PatchGrid g = check_grid(width, height, ps);
  require(static_cast<int>(tokens.size()) == g.rows * g.cols, "wrong number of tokens");
  RasterImage img(width, height);
  for (int i = 0; i < g.rows * g.cols; ++i) {
    const Vector& v = tokens[i];
    require(v.size() == ps * ps * 3, "wrong token length");
    const auto [pr, pc] = token_position(i, g, order);
    int j = 0;
    for (int y = pr * ps; y < (pr + 1) * ps; ++y)
      for (int x = pc * ps; x < (pc + 1) * ps; ++x) {
        Rgb c;
        for (int ch = 0; ch < 3; ++ch)
          c[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v[j++]), 0L, 255L));
        img.set(x, y, c);
      }
  }
  return img;
}

namespace {

struct Mask {
  int count = 0;
  double sum_x = 0.0;
  double sum_y = 0.0;
  int min_x = std::numeric_limits<int>::max();
  int max_x = -1;
  int min_y = std::numeric_limits<int>::max();
  int max_y = -1;
  std::vector<bool> on;
};

Mask build_mask(const RasterImage& img, Rgb color, int tol, const std::string& name) {
  Mask m;
  m.on.assign(static_cast<std::size_t>(img.width()) * img.height(), false);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.at(x, y);
      bool hit = true;
      for (int ch = 0; ch < 3; ++ch) hit = hit && std::abs(int(c[ch]) - int(color[ch])) <= tol;
      if (!hit) continue;
      m.on[static_cast<std::size_t>(y) * img.width() + x] = true;
      ++m.count;
      m.sum_x += x;
      m.sum_y += y;
      m.min_x = std::min(m.min_x, x);
      m.max_x = std::max(m.max_x, x);
      m.min_y = std::min(m.min_y, y);
      m.max_y = std::max(m.max_y, y);
    }
  if (m.count == 0) throw ExtractionError(name);
  return m;
}

}  // namespace

Extraction extract_features(const RasterImage& img, int task, int tol) {
  require(task == 1 || task == 2, "task id must be 1 or 2");
  require(tol >= 0 && tol <= 128, "color tolerance must lie in [0, 128]");
  const int W = img.width();
  Extraction ex;
  if (task == 1) {
    const Mask sun = build_mask(img, kSun, tol, "sun");
    const Mask pole = build_mask(img, kPole, tol, "pole");
    const Mask shadow = build_mask(img, kShadow, tol, "shadow");
    // pole base column: the column holding most pole pixels
    int best_col = 0, best = -1;
    for (int x = pole.min_x; x <= pole.max_x; ++x) {
      int n = 0;
      for (int y = 0; y < img.height(); ++y) n += pole.on[static_cast<std::size_t>(y) * W + x];
      if (n > best) best = n, best_col = x;
    }
    int longest = 0;
    for (int y = shadow.min_y; y <= shadow.max_y; ++y) {
      int run = 0;
      for (int x = 0; x < W; ++x) {
        run = shadow.on[static_cast<std::size_t>(y) * W + x] ? run + 1 : 0;
        longest = std::max(longest, run);
      }
    }
    const double ground = img.height() - 1;
    ex.features.h1 = ground - sun.sum_y / sun.count;
    ex.features.l1 = std::abs(sun.sum_x / sun.count - best_col);
    ex.features.h2 = best;
    ex.features.l2 = longest;
    ex.mask_counts = {sun.count, pole.count, shadow.count};
  } else {
    const Mask up = build_mask(img, kUpperSquare, tol, "upper square");
    const Mask low = build_mask(img, kLowerSquare, tol, "lower square");
    ex.features.l1 = std::max(up.max_x - up.min_x, up.max_y - up.min_y) + 1;
    ex.features.l2 = std::max(low.max_x - low.min_x, low.max_y - low.min_y) + 1;
    ex.mask_counts = {up.count, low.count};
  }
  return ex;
}

double feature_ratio(const Features& f, int task) {
  if (task == 1) return (f.l2 * f.h1) / (f.l1 * f.h2);
  return f.l2 / f.l1;
}

double target_ratio(int task) { return task == 1 ? 1.0 : 1.5; }

double percentile(std::vector<double> v, double q) {
  require(!v.empty(), "percentile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

std::pair<double, double> fit_through_origin(const std::vector<double>& x,
                                             const std::vector<double>& y) {
  double sxy = 0.0, sxx = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    ybar += y[i];
  }
  ybar /= static_cast<double>(y.size());
  const double beta = sxy / sxx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += (y[i] - beta * x[i]) * (y[i] - beta * x[i]);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  double r2;
  if (ss_tot > 0.0)
    r2 = 1.0 - ss_res / ss_tot;
  else
    r2 = ss_res <= 1e-12 * std::max(1.0, sxx) ? 1.0 : 0.0;
  return {beta, r2};
}

}  // namespace

EvalReport evaluate_features(const std::vector<Features>& feats, int task) {
  require(task == 1 || task == 2, "task id must be 1 or 2");
  require(feats.size() >= 10, "too few extractable samples (need at least 10)");
  EvalReport rep;
  rep.n_input = rep.n_extracted = static_cast<int>(feats.size());
  std::vector<double> xs, ys;
  for (const auto& f : feats) {
    rep.ratios.push_back(feature_ratio(f, task));
    xs.push_back(task == 1 ? f.l1 * f.h2 : f.l1);
    ys.push_back(task == 1 ? f.l2 * f.h1 : f.l2);
  }
  rep.p05 = percentile(rep.ratios, 0.05);
  rep.p95 = percentile(rep.ratios, 0.95);
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (rep.ratios[i] < rep.p05 || rep.ratios[i] > rep.p95) continue;
    rep.filtered_ratios.push_back(rep.ratios[i]);
    fx.push_back(xs[i]);
    fy.push_back(ys[i]);
  }
  std::tie(rep.slope, rep.r2) = fit_through_origin(xs, ys);
  std::tie(rep.slope_filtered, rep.r2_filtered) = fit_through_origin(fx, fy);
  const double target = target_ratio(task);
  int within = 0;
  for (double r : rep.ratios) within += std::abs(r - target) <= 0.1 * target;
  rep.fraction_within_10pct = static_cast<double>(within) / static_cast<double>(feats.size());
  return rep;
}

EvalReport evaluate(const std::vector<RasterImage>& samples, int task, int tol) {
  std::vector<Features> feats;
  for (const auto& img : samples) {
    try {
      feats.push_back(extract_features(img, task, tol).features);
    } catch (const ExtractionError&) {
    }
  }
  require(feats.size() >= 10, "too few extractable samples: " + std::to_string(feats.size()) +
                                  " of " + std::to_string(samples.size()));
  EvalReport rep = evaluate_features(feats, task);
  rep.n_input = static_cast<int>(samples.size());
  return rep;
}

void write_ppm(std::ostream& out, const RasterImage& img) {
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.bytes().data()),
            static_cast<std::streamsize>(img.bytes().size()));
}

namespace {

int read_ppm_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    else
      in.get();
    c = in.peek();
  }
  int v = 0;
  if (!(in >> v)) throw ValidationError("malformed PPM header");
  return v;
}

}  // namespace

RasterImage read_ppm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') throw ValidationError("not a binary PPM (P6)");
  const int w = read_ppm_int(in);
  const int h = read_ppm_int(in);
  const int maxval = read_ppm_int(in);
  require(maxval == 255, "only maxval 255 PPM images are supported");
  in.get();  // single whitespace before the raster
  RasterImage img(w, h);
  in.read(reinterpret_cast<char*>(img.bytes().data()),
          static_cast<std::streamsize>(img.bytes().size()));
  if (!in) throw ValidationError("truncated PPM raster");
  return img;
}

}  // namespace ardiff::synth
