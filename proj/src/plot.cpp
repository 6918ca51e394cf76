#include "anomamind/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace anomamind {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

constexpr int kMargin = 10;

}  // namespace

std::string render_svg_plot(const TimeSeries& series,
                            const std::vector<AnomalyVerdict>& verdicts,
                            const std::vector<int>* truth, const PlotOptions& options) {
  const std::size_t n = series.size();
  const double inner_w = options.width - 2.0 * kMargin;
  const double inner_h = options.height - 2.0 * kMargin;

  double lo = 0.0;
  double hi = 1.0;
  if (n > 0) {
    auto [min_it, max_it] = std::minmax_element(series.values.begin(), series.values.end());
    lo = *min_it;
    hi = *max_it;
    if (hi == lo) hi = lo + 1.0;
  }
  const auto x_of = [&](double i) {
    return kMargin + (n > 1 ? inner_w * i / (static_cast<double>(n) - 1.0) : inner_w / 2.0);
  };
  const auto y_of = [&](double v) { return kMargin + inner_h * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width
      << "\" height=\"" << options.height << "\" viewBox=\"0 0 " << options.width << ' '
      << options.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Truth bands first so verdict bands draw on top.
  if (truth != nullptr) {
    std::size_t i = 0;
    while (i < truth->size() && i < n) {
      if ((*truth)[i] != 0) {
        std::size_t j = i;
        while (j < truth->size() && j < n && (*truth)[j] != 0) ++j;
        const double x0 = x_of(static_cast<double>(i)) - 1.0;
        const double x1 = x_of(static_cast<double>(j) - 1.0) + 1.0;
        svg << "<rect class=\"truth\" x=\"" << fmt(x0) << "\" y=\"" << kMargin
            << "\" width=\"" << fmt(std::max(1.0, x1 - x0)) << "\" height=\"" << fmt(inner_h)
            << "\" fill=\"#f4a3a3\" fill-opacity=\"0.45\"/>\n";
        i = j;
      } else {
        ++i;
      }
    }
  }
  for (const auto& v : verdicts) {
    if (n == 0) break;
    const long lo_i = std::max(0L, v.start);
    const long hi_i = std::min(static_cast<long>(n) - 1, v.end);
    if (lo_i > hi_i) continue;
    const double x0 = x_of(static_cast<double>(lo_i)) - 1.0;
    const double x1 = x_of(static_cast<double>(hi_i)) + 1.0;
    svg << "<rect class=\"verdict\" x=\"" << fmt(x0) << "\" y=\"" << kMargin << "\" width=\""
        << fmt(std::max(1.0, x1 - x0)) << "\" height=\"" << fmt(inner_h)
        << "\" fill=\"#7aa6e8\" fill-opacity=\"0.45\"/>\n";
  }

  if (n > 0) {
    svg << "<polyline fill=\"none\" stroke=\"#222\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      if (i) svg << ' ';
      svg << fmt(x_of(static_cast<double>(i))) << ',' << fmt(y_of(series.values[i]));
    }
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace anomamind
