#pragma once

#include <string>
#include <vector>

namespace mgrpo {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 720;
  int height = 420;
};

/// Standalone SVG line chart: axes with ticks and labels, one polyline per
/// series, and a legend. Non-finite points are dropped.
std::string render_line_chart(const ChartSpec& spec, const std::vector<Series>& series);

/// Escapes &, <, >, " and ' for XML text and attributes.
std::string xml_escape(const std::string& text);

}  // namespace mgrpo
