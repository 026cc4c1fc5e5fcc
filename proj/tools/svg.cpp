#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ardiff::svg {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double px0 = 0.0, px1 = 1.0;

  double map(double v) const {
    const double a = log ? std::log10(v) : v;
    const double l = log ? std::log10(lo) : lo;
    const double h = log ? std::log10(hi) : hi;
    return px0 + (a - l) / (h - l) * (px1 - px0);
  }

  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) t.push_back(v);
      }
      if (t.size() < 2) t = {lo, hi};
    } else {
      for (int i = 0; i <= 4; ++i) t.push_back(lo + (hi - lo) * i / 4.0);
    }
    return t;
  }
};

void fit_range(Axis& ax, std::vector<double> values) {
  if (ax.log) std::erase_if(values, [](double v) { return !(v > 0.0); });
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) {
    ax.lo = ax.log ? 1.0 : 0.0;
    ax.hi = ax.log ? 10.0 : 1.0;
    return;
  }
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  ax.lo = *mn;
  ax.hi = *mx;
  if (ax.log) {
    ax.lo /= 1.5;
    ax.hi *= 1.5;
  } else {
    const double pad = ax.hi > ax.lo ? 0.05 * (ax.hi - ax.lo) : std::max(1.0, std::abs(ax.lo)) * 0.5;
    ax.lo -= pad;
    ax.hi += pad;
  }
}

}  // namespace

std::string render(const Plot& p, int width, int height) {
  const double left = 80, right = 20, top = 40, bottom = 55;
  Axis ax{0, 1, p.logx, left, width - right};
  Axis ay{0, 1, p.logy, height - bottom, top};
  std::vector<double> xs, ys;
  for (const auto& s : p.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  fit_range(ax, xs);
  fit_range(ay, ys);

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(p.title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right
    << "\" height=\"" << height - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double x = ax.map(t);
    o << "<line x1=\"" << x << "\" y1=\"" << height - bottom << "\" x2=\"" << x << "\" y2=\""
      << height - bottom + 5 << "\" stroke=\"black\"/>"
      << "<text x=\"" << x << "\" y=\"" << height - bottom + 18 << "\" text-anchor=\"middle\">"
      << num(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double y = ay.map(t);
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
      << "\" stroke=\"black\"/>"
      << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(t)
      << "</text>\n";
  }
  o << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
    << "\" text-anchor=\"middle\">" << escape(p.xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (top + height - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (top + height - bottom) / 2 << ")\">" << escape(p.ylabel) << "</text>\n";

  int legend_row = 0;
  for (const auto& s : p.series) {
    std::ostringstream pts;
    double prev_y = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if ((p.logx && !(s.x[i] > 0)) || (p.logy && !(s.y[i] > 0))) continue;
      const double x = ax.map(s.x[i]);
      const double y = ay.map(s.y[i]);
      if (s.points) {
        o << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2\" fill=\"" << s.color
          << "\" fill-opacity=\"0.6\"/>\n";
        continue;
      }
      if (s.steps && std::isfinite(prev_y)) pts << x << ',' << prev_y << ' ';
      pts << x << ',' << y << ' ';
      prev_y = y;
    }
    if (!s.points)
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\""
        << pts.str() << "\"/>\n";
    if (!s.label.empty()) {
      const double ly = top + 16 + 16 * legend_row++;
      o << "<rect x=\"" << width - right - 150 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
        << s.color << "\"/><text x=\"" << width - right - 135 << "\" y=\"" << ly << "\">"
        << escape(s.label) << "</text>\n";
    }
  }
  for (std::size_t i = 0; i < p.notes.size(); ++i)
    o << "<text x=\"" << left + 10 << "\" y=\"" << top + 18 + 16 * i << "\">" << escape(p.notes[i])
      << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace ardiff::svg
