#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lps {

struct PlotSeries {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  // Extra key/value pairs embedded as a <metadata> block (e.g. the swept
  // horizon values), so downstream checks can read the axis contents back.
  std::map<std::string, std::string> metadata;
};

// Dependency-free line plot writer. Output is deterministic text.
void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec);

}  // namespace lps
