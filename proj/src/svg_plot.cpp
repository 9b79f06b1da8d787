#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "kcdiff/eval.hpp"

namespace kcdiff {

namespace {

constexpr double kWidth = 520;
constexpr double kHeight = 360;
constexpr double kLeft = 60;
constexpr double kRight = 150;
constexpr double kTop = 30;
constexpr double kBottom = 50;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string success_plot_svg(std::span<const BenchmarkRow> rows, int level) {
  std::vector<std::string> methods;
  int max_budget = 0;
  for (const BenchmarkRow& r : rows) {
    if (r.level != level) continue;
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    max_budget = std::max(max_budget, r.budget);
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const double xscale = max_budget > 0 ? pw / max_budget : 0.0;
  auto px = [&](double budget) { return kLeft + (max_budget > 0 ? budget * xscale : pw / 2); };
  auto py = [&](double rate) { return kTop + ph * (1.0 - rate); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"14\">Level " << level
    << ": success rate vs budget</text>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << py(0)
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft << "\" y2=\"" << py(1)
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double r = i / 4.0;
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(r) + 4) << "\" text-anchor=\"end\">"
      << static_cast<int>(r * 100) << "%</text>\n";
  }
  std::vector<int> ticks;
  for (const BenchmarkRow& r : rows) {
    if (r.level == level && std::find(ticks.begin(), ticks.end(), r.budget) == ticks.end()) {
      ticks.push_back(r.budget);
    }
  }
  for (int b : ticks) {
    s << "<text x=\"" << num(px(b)) << "\" y=\"" << num(py(0) + 16) << "\" text-anchor=\"middle\">" << b
      << "</text>\n";
  }
  s << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << kHeight - 10
    << "\" text-anchor=\"middle\">optimization iterations</text>\n";

  for (std::size_t m = 0; m < methods.size(); ++m) {
    const char* color = kColors[m % std::size(kColors)];
    std::vector<std::pair<int, double>> pts;
    for (const BenchmarkRow& r : rows) {
      if (r.level == level && r.method == methods[m]) pts.emplace_back(r.budget, r.success_rate);
    }
    std::sort(pts.begin(), pts.end());
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      s << (i ? " " : "") << num(px(pts[i].first)) << ',' << num(py(pts[i].second));
    }
    s << "\"/>\n";
    for (const auto& [b, r] : pts) {
      s << "<circle cx=\"" << num(px(b)) << "\" cy=\"" << num(py(r)) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * m;
    s << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 30
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kWidth - kRight + 35 << "\" y=\"" << ly + 4 << "\">" << methods[m] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace kcdiff
