#include "homlab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace homlab {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double px0 = 0, px1 = 1;

  double map(double v) const {
    const double a = log ? std::log10(v) : v;
    const double l = log ? std::log10(lo) : lo;
    const double h = log ? std::log10(hi) : hi;
    return px0 + (a - l) / (h - l) * (px1 - px0);
  }
};

Axis fit_axis(std::vector<double> v, bool log, double px0, double px1) {
  Axis ax;
  ax.log = log;
  ax.px0 = px0;
  ax.px1 = px1;
  if (log) std::erase_if(v, [](double x) { return !(x > 0.0); });
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) {
    if (log) ax.lo = 0.1;  // no positive data: an empty decade
    return ax;
  }
  ax.lo = *std::min_element(v.begin(), v.end());
  ax.hi = *std::max_element(v.begin(), v.end());
  if (log) {
    ax.lo /= 1.25;
    ax.hi *= 1.25;
  } else {
    const double pad = ax.hi > ax.lo ? 0.08 * (ax.hi - ax.lo) : std::max(0.05 * std::abs(ax.hi), 0.05);
    ax.lo -= pad;
    ax.hi += pad;
  }
  if (ax.lo == ax.hi) ax.hi = ax.lo + 1;
  return ax;
}

std::vector<double> ticks(const Axis& ax) {
  std::vector<double> out;
  if (ax.log) {
    for (int e = static_cast<int>(std::floor(std::log10(ax.lo))); e <= std::ceil(std::log10(ax.hi)); ++e)
      for (double m : {1.0, 2.0, 5.0}) {
        const double v = m * std::pow(10.0, e);
        if (v >= ax.lo && v <= ax.hi) out.push_back(v);
      }
    return out;
  }
  const double span = ax.hi - ax.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  for (double v = std::ceil(ax.lo / step) * step; v <= ax.hi + 1e-12 * span; v += step) out.push_back(v);
  return out;
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
}

void frame(std::ostringstream& os, const Axis& x, const Axis& y, const std::string& xlabel,
           const std::string& ylabel, bool x_ticks) {
  os << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(kWidth - kLeft - kRight)
     << "\" height=\"" << fmt(kHeight - kTop - kBottom) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : ticks(y)) {
    const double py = y.map(v);
    os << "<line x1=\"" << fmt(kLeft - 4) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
       << fmt(py) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">" << tick_label(v)
       << "</text>\n";
  }
  if (x_ticks)
    for (double v : ticks(x)) {
      const double px = x.map(v);
      os << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(kHeight - kBottom) << "\" x2=\"" << fmt(px) << "\" y2=\""
         << fmt(kHeight - kBottom + 4) << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(kHeight - kBottom + 18) << "\" text-anchor=\"middle\">"
         << tick_label(v) << "</text>\n";
    }
  os << "<text x=\"" << fmt(kLeft + (kWidth - kLeft - kRight) / 2) << "\" y=\"" << fmt(kHeight - 10)
     << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fmt(kTop + (kHeight - kTop - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << fmt(kTop + (kHeight - kTop - kBottom) / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 10 + 18 * static_cast<double>(i);
    const double x = kWidth - kRight + 12;
    os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y - 8) << "\" width=\"12\" height=\"10\" fill=\""
       << kColors[i % 7] << "\"/>\n";
    os << "<text x=\"" << fmt(x + 18) << "\" y=\"" << fmt(y + 1) << "\">" << escape(labels[i]) << "</text>\n";
  }
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<PlotSeries>& series, bool log_x, bool log_y) {
  std::vector<double> xs, ys;
  for (const PlotSeries& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
    ys.insert(ys.end(), s.lo.begin(), s.lo.end());
    ys.insert(ys.end(), s.hi.begin(), s.hi.end());
  }
  const Axis x = fit_axis(xs, log_x, kLeft, kWidth - kRight);
  const Axis y = fit_axis(ys, log_y, kHeight - kBottom, kTop);

  std::ostringstream os;
  header(os, title);
  frame(os, x, y, xlabel, ylabel, true);
  auto ok = [&](double xv, double yv) {
    return std::isfinite(xv) && std::isfinite(yv) && (!log_x || xv > 0) && (!log_y || yv > 0);
  };
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    const char* color = kColors[k % 7];
    labels.push_back(s.label);
    if (s.lo.size() == s.y.size() && s.hi.size() == s.y.size() && !s.y.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (ok(s.x[i], s.hi[i])) pts += fmt(x.map(s.x[i])) + "," + fmt(y.map(s.hi[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;)
        if (ok(s.x[i], s.lo[i])) pts += fmt(x.map(s.x[i])) + "," + fmt(y.map(s.lo[i])) + " ";
      os << "<polygon points=\"" << pts << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (ok(s.x[i], s.y[i])) pts += fmt(x.map(s.x[i])) + "," + fmt(y.map(s.y[i])) + " ";
    os << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (ok(s.x[i], s.y[i]))
        os << "<circle cx=\"" << fmt(x.map(s.x[i])) << "\" cy=\"" << fmt(y.map(s.y[i])) << "\" r=\"3\" fill=\""
           << color << "\"/>\n";
  }
  legend(os, labels);
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart_svg(const std::string& title, const std::string& ylabel, const std::vector<BarGroup>& groups) {
  std::vector<double> ys{0.0};
  std::vector<std::string> names;
  for (const BarGroup& g : groups) {
    ys.insert(ys.end(), g.values.begin(), g.values.end());
    for (const std::string& b : g.bars)
      if (std::find(names.begin(), names.end(), b) == names.end()) names.push_back(b);
  }
  Axis y = fit_axis(ys, false, kHeight - kBottom, kTop);
  y.lo = std::min(0.0, y.lo);
  Axis x;
  x.px0 = kLeft;
  x.px1 = kWidth - kRight;

  std::ostringstream os;
  header(os, title);
  frame(os, x, y, "", ylabel, false);
  const double slot = (x.px1 - x.px0) / std::max<std::size_t>(1, groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const BarGroup& g = groups[gi];
    const double x0 = x.px0 + slot * static_cast<double>(gi);
    const double bw = 0.8 * slot / std::max<std::size_t>(1, g.values.size());
    for (std::size_t bi = 0; bi < g.values.size(); ++bi) {
      const auto ci = static_cast<std::size_t>(std::find(names.begin(), names.end(), g.bars[bi]) - names.begin());
      const double top = y.map(g.values[bi]), base = y.map(0.0);
      os << "<rect x=\"" << fmt(x0 + 0.1 * slot + bw * static_cast<double>(bi)) << "\" y=\"" << fmt(std::min(top, base))
         << "\" width=\"" << fmt(bw) << "\" height=\"" << fmt(std::abs(base - top)) << "\" fill=\"" << kColors[ci % 7]
         << "\"/>\n";
    }
    os << "<text x=\"" << fmt(x0 + slot / 2) << "\" y=\"" << fmt(kHeight - kBottom + 18)
       << "\" text-anchor=\"middle\">" << escape(g.label) << "</text>\n";
  }
  legend(os, names);
  os << "</svg>\n";
  return os.str();
}

}  // namespace homlab
