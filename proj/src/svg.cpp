#include "gaplab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gaplab::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
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

struct Frame {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool log_y = false;

  double ty(double y) const { return log_y ? std::log10(y) : y; }
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (ty(y) - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
  bool usable(double x, double y) const { return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0); }
};

Frame fit(const std::vector<Series>& series, bool log_y, bool zero_floor) {
  Frame f;
  f.log_y = log_y;
  double xa = std::numeric_limits<double>::infinity(), xb = -xa, ya = xa, yb = -xa;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!f.usable(s.x[i], s.y[i])) continue;
      xa = std::min(xa, s.x[i]);
      xb = std::max(xb, s.x[i]);
      ya = std::min(ya, f.ty(s.y[i]));
      yb = std::max(yb, f.ty(s.y[i]));
    }
  if (!(xa <= xb)) xa = 0, xb = 1, ya = 0, yb = 1;
  if (zero_floor && !log_y) ya = std::min(ya, 0.0);
  if (xa == xb) xa -= 0.5, xb += 0.5;
  if (ya == yb) ya -= 0.5, yb += 0.5;
  const double pad = 0.04 * (yb - ya);
  f.x0 = xa, f.x1 = xb, f.y0 = ya - (zero_floor && ya == 0.0 ? 0.0 : pad), f.y1 = yb + pad;
  return f;
}

void open(std::ostringstream& os, const Axes& axes, const Frame& f) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(axes.title)
     << "</text>\n";
  const double l = kLeft, r = kWidth - kRight, t = kTop, b = kHeight - kBottom;
  os << "<rect x=\"" << num(l) << "\" y=\"" << num(t) << "\" width=\"" << num(r - l) << "\" height=\"" << num(b - t)
     << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    const double yp = b - (b - t) * k / 4.0;
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(b + 16) << "\" text-anchor=\"middle\">" << tick(xv)
       << "</text>\n";
    os << "<text x=\"" << num(l - 6) << "\" y=\"" << num(yp + 4) << "\" text-anchor=\"end\">"
       << tick(f.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
    os << "<line x1=\"" << num(l) << "\" y1=\"" << num(yp) << "\" x2=\"" << num(r) << "\" y2=\"" << num(yp)
       << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << num((l + r) / 2) << "\" y=\"" << num(kHeight - 14) << "\" text-anchor=\"middle\">"
     << escape(axes.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << num((t + b) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(axes.y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<Series>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 12;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 8) << "\" width=\"12\" height=\"10\" fill=\""
       << kPalette[i % 8] << "\"/>\n";
    os << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 1) << "\">" << escape(series[i].label) << "</text>\n";
  }
}

}  // namespace

std::string line_plot(const Axes& axes, const std::vector<Series>& series) {
  const Frame f = fit(series, axes.log_y, false);
  std::ostringstream os;
  open(os, axes, f);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[k % 8] << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (f.usable(s.x[i], s.y[i])) os << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i])) << ' ';
    os << "\"/>\n";
  }
  legend(os, series);
  os << "</svg>\n";
  return os.str();
}

std::string scatter_plot(const Axes& axes, const std::vector<Series>& series) {
  const Frame f = fit(series, axes.log_y, false);
  std::ostringstream os;
  open(os, axes, f);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<g fill=\"" << kPalette[k % 8] << "\" fill-opacity=\"0.5\">\n";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (f.usable(s.x[i], s.y[i]))
        os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i])) << "\" r=\"1.8\"/>\n";
    os << "</g>\n";
  }
  legend(os, series);
  os << "</svg>\n";
  return os.str();
}

std::string histogram(const Axes& axes, const std::vector<Series>& series, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: need at least one bin");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series)
    for (double v : s.x)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(lo <= hi)) lo = 0, hi = 1;
  if (lo == hi) lo -= 0.5, hi += 0.5;
  const double width = (hi - lo) / bins;

  // Densities so series of different sizes share a scale.
  std::vector<Series> curves;
  for (const auto& s : series) {
    Series c{s.label, {}, {}};
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    std::size_t n = 0;
    for (double v : s.x) {
      if (!std::isfinite(v)) continue;
      auto b = static_cast<std::size_t>((v - lo) / width);
      counts[std::min(b, counts.size() - 1)] += 1.0;
      ++n;
    }
    for (int b = 0; b < bins; ++b) {
      const double density = n ? counts[static_cast<std::size_t>(b)] / (static_cast<double>(n) * width) : 0.0;
      c.x.push_back(lo + b * width);
      c.y.push_back(density);
      c.x.push_back(lo + (b + 1) * width);
      c.y.push_back(density);
    }
    curves.push_back(std::move(c));
  }
  Axes a = axes;
  a.log_y = false;
  const Frame f = fit(curves, false, true);
  std::ostringstream os;
  open(os, a, f);
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    os << "<polygon fill=\"" << kPalette[k % 8] << "\" fill-opacity=\"0.35\" stroke=\"" << kPalette[k % 8]
       << "\" points=\"" << num(f.px(c.x.front())) << ',' << num(f.py(0.0)) << ' ';
    for (std::size_t i = 0; i < c.x.size(); ++i) os << num(f.px(c.x[i])) << ',' << num(f.py(c.y[i])) << ' ';
    os << num(f.px(c.x.back())) << ',' << num(f.py(0.0)) << "\"/>\n";
  }
  legend(os, curves);
  os << "</svg>\n";
  return os.str();
}

}  // namespace gaplab::svg
