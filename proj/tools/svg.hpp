#pragma once

#include <string>
#include <vector>

namespace ardiff::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color = "#1f77b4";
  bool points = false;  // markers instead of a polyline
  bool steps = false;   // staircase polyline
};

struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<Series> series;
  std::vector<std::string> notes;  // printed in the top-left corner
};

std::string render(const Plot& plot, int width = 640, int height = 420);

}  // namespace ardiff::svg
