#include "arsid/plot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "arsid/io.hpp"

namespace arsid {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
constexpr int kPaletteSize = 10;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string series_key(const ResultRecord& r, SeriesBy by) {
  std::ostringstream key;
  switch (by) {
    case SeriesBy::config:
      key << "p=" << r.p << " d=" << r.d << " N=" << r.N;
      break;
    case SeriesBy::p_student:
      key << "p'=" << r.p_student;
      break;
    case SeriesBy::lambda:
      key << r.estimator;
      if (r.estimator == "group_nuclear_prox") key << " lambda=" << fmt(r.lambda);
      break;
    case SeriesBy::estimator:
      key << r.estimator;
      break;
  }
  return key.str();
}

struct Point {
  double x, y;
  int series;
};

}  // namespace

std::string render_plot_svg(const ResultTable& table, const PlotOptions& opt) {
  std::vector<const ResultRecord*> rows;
  for (const ResultRecord& rec : table.rows) {
    if (rec.status == "avg") rows.push_back(&rec);
  }
  if (rows.empty()) {
    for (const ResultRecord& rec : table.rows) {
      if (rec.status == "ok" || rec.status == "nonconv") rows.push_back(&rec);
    }
  }
  if (rows.empty()) throw std::invalid_argument("export_plot: table has no rows to plot");

  std::vector<std::string> series_names;
  std::map<std::string, int> series_ids;
  std::vector<Point> points;
  for (const ResultRecord* rec : rows) {
    const double x = opt.x == XQuantity::beta_over_gamma
                         ? static_cast<double>(rec->beta) / rec->gamma
                         : rec->beta_tilde / rec->gamma;
    if (!(x > 0.0) || !(rec->error_frob_sq > 0.0) || !std::isfinite(rec->error_frob_sq)) {
      continue;
    }
    const std::string name = series_key(*rec, opt.series);
    auto [it, inserted] = series_ids.try_emplace(name, static_cast<int>(series_names.size()));
    if (inserted) series_names.push_back(name);
    points.push_back({std::log10(x), std::log10(rec->error_frob_sq), it->second});
  }
  if (points.empty()) throw std::invalid_argument("export_plot: no positive finite points");

  double xmin = points[0].x, xmax = points[0].x;
  double ymin = points[0].y, ymax = points[0].y;
  for (const Point& pt : points) {
    xmin = std::min(xmin, pt.x);
    xmax = std::max(xmax, pt.x);
    ymin = std::min(ymin, pt.y);
    ymax = std::max(ymax, pt.y);
  }
  if (xmax - xmin < 0.5) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 0.5) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double xpad = 0.06 * (xmax - xmin), ypad = 0.08 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;

  const double ml = 70, mr = 160, mt = 40, mb = 55;
  const double pw = opt.width - ml - mr;
  const double ph = opt.height - mt - mb;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width << ' '
      << opt.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty()) {
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">"
        << opt.title << "</text>\n";
  }

  // frame and decade grid
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int e = static_cast<int>(std::ceil(xmin)); e <= static_cast<int>(std::floor(xmax)); ++e) {
    const double x = px(e);
    svg << "<line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\""
        << mt + ph << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">1e"
        << e << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(ymin)); e <= static_cast<int>(std::floor(ymax)); ++e) {
    const double y = py(e);
    svg << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw
        << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">1e" << e
        << "</text>\n";
  }
  const std::string xlabel =
      opt.x == XQuantity::beta_over_gamma ? "beta / gamma" : "beta_tilde / gamma";
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << xlabel << "</text>\n";
  svg << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << mt + ph / 2 << ")\">error_frob_sq</text>\n";

  // reference error = gamma/beta, a slope -1 line through (0, 0) in log10
  if (opt.reference_line) {
    double a = xmin, b = xmax;           // clip y = -x to the y window
    a = std::max(a, -ymax);
    b = std::min(b, -ymin);
    if (a < b) {
      svg << "<line x1=\"" << px(a) << "\" y1=\"" << py(-a) << "\" x2=\"" << px(b)
          << "\" y2=\"" << py(-b)
          << "\" stroke=\"#000\" stroke-dasharray=\"6 4\"/>\n";
      svg << "<text x=\"" << px(b) - 4 << "\" y=\"" << py(-b) - 6
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
             "font-size=\"11\">gamma/beta</text>\n";
    }
  }

  for (const Point& pt : points) {
    svg << "<circle cx=\"" << px(pt.x) << "\" cy=\"" << py(pt.y)
        << "\" r=\"3.5\" fill=\"" << kPalette[pt.series % kPaletteSize]
        << "\" fill-opacity=\"0.85\"/>\n";
  }

  // legend
  for (size_t s = 0; s < series_names.size(); ++s) {
    const double y = mt + 14 + 18 * static_cast<double>(s);
    svg << "<circle cx=\"" << ml + pw + 16 << "\" cy=\"" << y << "\" r=\"4\" fill=\""
        << kPalette[s % kPaletteSize] << "\"/>\n";
    svg << "<text x=\"" << ml + pw + 26 << "\" y=\"" << y + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << series_names[s]
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void export_plot(const ResultTable& table, const std::string& path,
                 const PlotOptions& options) {
  write_text_atomic(path, render_plot_svg(table, options));
}

}  // namespace arsid
