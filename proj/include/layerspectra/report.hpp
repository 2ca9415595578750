#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layerspectra/records.hpp"

namespace layerspectra {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
  // Horizontal reference line, drawn dashed when set.
  std::optional<double> reference;
  std::string reference_label;
};

// Self-contained SVG line plot; output depends only on the inputs.
std::string render_svg(const PlotSpec& plot);

struct RenderedReport {
  std::string markdown;
  std::map<std::string, std::string> svgs;  // file name -> content
};

// Renders the stored records (run.json documents). Missing module blobs leave
// marked gaps rather than failing.
RenderedReport render_report(const std::vector<Json>& records);

// Writes report.md and the SVGs into dir.
void write_report(const RenderedReport& report, const std::filesystem::path& dir);

}  // namespace layerspectra
