#include "mgrpo/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace mgrpo {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double x, const char* format = "%.4g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

// Roughly `target` ticks at 1/2/5 multiples of a power of ten.
std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  double span = hi - lo;
  double raw = span / target;
  double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
  double step = magnitude;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * magnitude;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
  const double left = 70, right = 190, top = 40, bottom = 55;
  const double plot_w = spec.width - left - right;
  const double plot_h = spec.height - top - bottom;

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (!std::isfinite(x_min)) x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  if (x_max - x_min < 1e-12) x_max = x_min + 1;
  if (y_max - y_min < 1e-12) y_min -= 0.5, y_max += 0.5;
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
      << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << xml_escape(spec.title) << "</text>\n";

  out << "<g class=\"axes\" stroke=\"#333\" fill=\"none\">\n";
  out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\""
      << fmt(left + plot_w) << "\" y2=\"" << fmt(top + plot_h) << "\"/>\n";
  out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left)
      << "\" y2=\"" << fmt(top + plot_h) << "\"/>\n";
  out << "</g>\n";

  out << "<g class=\"ticks\" fill=\"#333\">\n";
  for (double t : nice_ticks(x_min, x_max)) {
    double x = px(t);
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(top + plot_h + 5) << "\" stroke=\"#333\"/>";
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << fmt(t, "%g") << "</text>\n";
  }
  for (double t : nice_ticks(y_min, y_max)) {
    double y = py(t);
    out << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#333\"/>";
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(left + plot_w) << "\" y2=\"" << fmt(y) << "\" stroke=\"#eee\"/>";
    out << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\">" << fmt(t, "%g") << "</text>\n";
  }
  out << "</g>\n";

  out << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"" << fmt(spec.height - 12.0)
      << "\" text-anchor=\"middle\">" << xml_escape(spec.x_label) << "</text>\n";
  out << "<text transform=\"translate(18 " << fmt(top + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(spec.y_label) << "</text>\n";

  out << "<g class=\"series\" fill=\"none\" stroke-width=\"1.8\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    out << "<polyline stroke=\"" << kPalette[s % std::size(kPalette)] << "\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
      if (!first) out << ' ';
      out << fmt(px(ser.x[i])) << ',' << fmt(py(ser.y[i]));
      first = false;
    }
    out << "\"><title>" << xml_escape(ser.label) << "</title></polyline>\n";
  }
  out << "</g>\n";

  out << "<g class=\"legend\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    double y = top + 10 + 18.0 * static_cast<double>(s);
    double x = left + plot_w + 15;
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 22)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"" << kPalette[s % std::size(kPalette)]
        << "\" stroke-width=\"2\"/>";
    out << "<text x=\"" << fmt(x + 28) << "\" y=\"" << fmt(y + 4) << "\">"
        << xml_escape(series[s].label) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace mgrpo
