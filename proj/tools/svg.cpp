#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "jtanet/container.hpp"

namespace jtanet::cli {
namespace {

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                   "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

// Round tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 8.0) break;
  }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) t.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  return t;
}

}  // namespace

std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& opt) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series " + s.name + ": x and y differ in length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double y = s.y[i];
      if (opt.log_y) {
        if (y <= 0.0) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(y)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0) || !std::isfinite(y0)) throw std::invalid_argument("nothing to plot");
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 80, right = opt.width - 170.0, top = 40, bottom = opt.height - 60.0;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y0) / (y1 - y0) * (bottom - top); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << (left + right) / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(opt.title)
    << "</text>\n";
  for (double t : ticks(x0, x1)) {
    o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << top << "\" x2=\"" << num(px(t)) << "\" y2=\"" << bottom
      << "\" stroke=\"#e5e5e5\"/>\n";
    o << "<text x=\"" << num(px(t)) << "\" y=\"" << bottom + 18 << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(y0, y1)) {
    o << "<line x1=\"" << left << "\" y1=\"" << num(py(t)) << "\" x2=\"" << right << "\" y2=\"" << num(py(t))
      << "\" stroke=\"#e5e5e5\"/>\n";
    const std::string label = opt.log_y ? "1e" + num(t) : num(t);
    o << "<text x=\"" << left - 8 << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << (left + right) / 2 << "\" y=\"" << opt.height - 18 << "\" text-anchor=\"middle\">"
    << escape(opt.x_label) << "</text>\n";
  o << "<text transform=\"translate(20," << (top + bottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(opt.y_label) << (opt.log_y ? " (log10)" : "") << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    o << "<polyline class=\"series\" data-name=\"" << escape(s.name) << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double y = s.y[i];
      if (opt.log_y) {
        if (y <= 0.0) continue;
        y = std::log10(y);
      }
      o << num(px(s.x[i])) << "," << num(py(y)) << " ";
    }
    o << "\"/>\n";
    const double ly = top + 12 + 20.0 * static_cast<double>(k);
    o << "<line x1=\"" << right + 15 << "\" y1=\"" << ly << "\" x2=\"" << right + 40 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << right + 46 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace jtanet::cli
