#include "lps/core/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"

namespace lps {

namespace {
std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
}  // namespace

void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec) {
  LPS_CHECK(!spec.series.empty(), "write_svg_plot: no series");
  const int W = 640, H = 420;
  const double ml = 64, mr = 20, mt = 40, mb = 52;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : spec.series) {
    for (double x : s.xs) { xmin = std::min(xmin, x); xmax = std::max(xmax, x); }
    for (double y : s.ys) { ymin = std::min(ymin, y); ymax = std::max(ymax, y); }
  }
  if (!(xmax > xmin)) { xmin -= 0.5; xmax += 0.5; }
  if (!(ymax > ymin)) { ymin -= 0.5; ymax += 0.5; }
  const double ypad = 0.06 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<metadata>\n";
  for (const auto& [k, v] : spec.metadata) os << "  " << k << " = " << v << "\n";
  os << "</metadata>\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        "font-family=\"sans-serif\">" << spec.title << "</text>\n";

  // axes
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
     << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
     << "\" stroke=\"black\"/>\n";

  // x ticks at each distinct sample point of the first series
  std::vector<double> xticks = spec.series.front().xs;
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  for (double x : xticks) {
    os << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << mt + ph << "\" x2=\"" << fmt(px(x))
       << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(px(x)) << "\" y=\"" << mt + ph + 20
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
          "class=\"x-tick\">" << fmt(x) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(py(y) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(y)
       << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << spec.x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
        "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">" << spec.y_label << "</text>\n";

  for (size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const char* color = kColors[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < s.xs.size(); ++i) {
      os << fmt(px(s.xs[i])) << "," << fmt(py(s.ys[i])) << " ";
    }
    os << "\"/>\n";
    for (size_t i = 0; i < s.xs.size(); ++i) {
      os << "<circle cx=\"" << fmt(px(s.xs[i])) << "\" cy=\"" << fmt(py(s.ys[i]))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    os << "<text x=\"" << ml + pw - 8 << "\" y=\"" << mt + 16 + 16 * si
       << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << color
       << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  atomic_write_text(path, os.str());
}

}  // namespace lps
