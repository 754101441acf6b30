#pragma once

#include <string>

#include "arsid/harness.hpp"

namespace arsid {

enum class SeriesBy { config, p_student, lambda, estimator };

struct PlotOptions {
  XQuantity x = XQuantity::beta_over_gamma;
  SeriesBy series = SeriesBy::config;
  std::string title;
  bool reference_line = true;  // dashed error = gamma/beta guide
  int width = 760;
  int height = 520;
};

// Standalone SVG log-log scatter of error_frob_sq against beta/gamma, one
// color per series, optional gamma/beta reference line. Plots averaged rows
// when present, raw rows otherwise.
std::string render_plot_svg(const ResultTable& table, const PlotOptions& options);
void export_plot(const ResultTable& table, const std::string& path,
                 const PlotOptions& options);

}  // namespace arsid
