#include "vmckit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace vmckit {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 60, kBottom = 50;
const char* const kColours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
  void widen() {
    if (!valid()) {
      lo = 0;
      hi = 1;
    } else if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0); }

}  // namespace

std::string render_svg(const Plot& plot) {
  Range xr, yr;
  for (const auto& s : plot.series)
    for (Index i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x(i), plot.logx) || !usable(s.y(i), plot.logy)) continue;
      xr.add(plot.logx ? std::log10(s.x(i)) : s.x(i));
      yr.add(plot.logy ? std::log10(s.y(i)) : s.y(i));
    }
  xr.widen();
  yr.widen();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth) << "\" height=\""
      << fixed(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fixed(kLeft) << "\" y=\"20\" font-size=\"15\">" << escape(plot.title) << "</text>\n";
  for (std::size_t i = 0; i < plot.notes.size(); ++i)
    out << "<text x=\"" << fixed(kLeft) << "\" y=\"" << fixed(36 + 14.0 * static_cast<double>(i)) << "\">"
        << escape(plot.notes[i]) << "</text>\n";
  out << "<rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\"" << fixed(pw)
      << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    out << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << fixed(kTop + ph + 16)
        << "\" text-anchor=\"middle\">" << tick_label(plot.logx ? std::pow(10.0, fx) : fx) << "</text>\n";
    out << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(py(fy) + 4)
        << "\" text-anchor=\"end\">" << tick_label(plot.logy ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  out << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 10)
      << "\" text-anchor=\"middle\">" << escape(plot.xlabel) << (plot.logx ? " (log)" : "") << "</text>\n";
  out << "<text x=\"16\" y=\"" << fixed(kTop + ph / 2) << "\" transform=\"rotate(-90 16 "
      << fixed(kTop + ph / 2) << ")\" text-anchor=\"middle\">" << escape(plot.ylabel)
      << (plot.logy ? " (log)" : "") << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* colour = kColours[k % (sizeof kColours / sizeof *kColours)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (Index i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x(i), plot.logx) || !usable(s.y(i), plot.logy)) continue;
      out << (first ? "" : " ") << fixed(px(plot.logx ? std::log10(s.x(i)) : s.x(i))) << ","
          << fixed(py(plot.logy ? std::log10(s.y(i)) : s.y(i)));
      first = false;
    }
    out << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
    out << "<line x1=\"" << fixed(kLeft + pw + 12) << "\" y1=\"" << fixed(ly - 4) << "\" x2=\""
        << fixed(kLeft + pw + 32) << "\" y2=\"" << fixed(ly - 4) << "\" stroke=\"" << colour
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fixed(kLeft + pw + 38) << "\" y=\"" << fixed(ly) << "\">" << escape(s.name)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace vmckit
