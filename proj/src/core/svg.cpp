#include "core/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/config.hpp"
#include "core/error.hpp"

namespace pf {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

}  // namespace

std::string Plot::render(int width, int height) const {
  const double ml = 70, mr = 20, mt = 42, mb = 56;
  const double pw = width - ml - mr, ph = height - mt - mb;

  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  auto usable_x = [&](double v) { return std::isfinite(v) && (!log_x || v > 0.0); };
  auto usable_y = [&](double v) { return std::isfinite(v) && (!log_y || v > 0.0); };

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), Errc::invalid_argument, "plot series length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable_x(s.x[i]) || !usable_y(s.y[i])) continue;
      x_lo = std::min(x_lo, tx(s.x[i]));
      x_hi = std::max(x_hi, tx(s.x[i]));
      y_lo = std::min(y_lo, ty(s.y[i]));
      y_hi = std::max(y_hi, ty(s.y[i]));
    }
  }
  if (x_lo > x_hi) {
    x_lo = 0;
    x_hi = 1;
    y_lo = 0;
    y_hi = 1;
  }
  if (x_hi - x_lo < 1e-300) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi - y_lo < 1e-300) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  double x_pad = 0.04 * (x_hi - x_lo), y_pad = 0.06 * (y_hi - y_lo);
  x_lo -= x_pad;
  x_hi += x_pad;
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double v) { return ml + (tx(v) - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double v) { return mt + ph - (ty(v) - y_lo) / (y_hi - y_lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";

  // Embedded data table: every plotted point, one row per (series, x, y).
  os << "<metadata id=\"data-table\">\n";
  os << escape_xml("series,x,y\n");
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << escape_xml(s.label + "," + format_double(s.x[i]) + "," + format_double(s.y[i]) + "\n");
  os << "</metadata>\n";

  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << width / 2.0 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"15\">" << escape_xml(title) << "</text>\n";
  os << "<text x=\"" << ml + pw / 2.0 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(x_label)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + ph / 2.0
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
     << mt + ph / 2.0 << ")\">" << escape_xml(y_label) << "</text>\n";

  const int n_ticks = 5;
  for (int t = 0; t <= n_ticks; ++t) {
    double fr = static_cast<double>(t) / n_ticks;
    double xv = x_lo + fr * (x_hi - x_lo);
    double yv = y_lo + fr * (y_hi - y_lo);
    double xp = ml + fr * pw;
    double yp = mt + ph - fr * ph;
    os << "<line x1=\"" << fmt(xp, "%.2f") << "\" y1=\"" << mt + ph << "\" x2=\"" << fmt(xp, "%.2f")
       << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << fmt(xp, "%.2f") << "\" y=\"" << mt + ph + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
       << fmt(log_x ? std::pow(10.0, xv) : xv, "%.4g") << "</text>\n";
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << fmt(yp, "%.2f") << "\" x2=\"" << ml << "\" y2=\""
       << fmt(yp, "%.2f") << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(yp + 3.5, "%.2f")
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
       << fmt(log_y ? std::pow(10.0, yv) : yv, "%.4g") << "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::ostringstream pts;
    int plotted = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable_x(s.x[i]) || !usable_y(s.y[i])) continue;
      if (plotted) pts << ' ';
      pts << fmt(px(s.x[i]), "%.2f") << ',' << fmt(py(s.y[i]), "%.2f");
      ++plotted;
    }
    if (plotted > 1)
      os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.5\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable_x(s.x[i]) || !usable_y(s.y[i])) continue;
      os << "<circle cx=\"" << fmt(px(s.x[i]), "%.2f") << "\" cy=\"" << fmt(py(s.y[i]), "%.2f")
         << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    double ly = mt + 14 + 16 * static_cast<double>(si);
    os << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << fmt(ly - 4, "%.2f") << "\" x2=\""
       << ml + pw - 130 << "\" y2=\"" << fmt(ly - 4, "%.2f") << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw - 124 << "\" y=\"" << fmt(ly, "%.2f")
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(s.label) << "</text>\n";
  }

  os << "</svg>\n";
  return os.str();
}

}  // namespace pf
