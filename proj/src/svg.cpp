#include "dvfsflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace dvfsflow::svg {

namespace {

std::string color_for(double v) {
  if (std::isnan(v)) return "#bbbbbb";
  v = std::clamp(v, -1.0, 1.0);
  int r = 255, g = 255, b = 255;
  if (v >= 0) {
    g = b = int(std::lround(255 * (1.0 - v)));
  } else {
    r = g = int(std::lround(255 * (1.0 + v)));
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

}  // namespace

std::string heatmap(const CorrelationMatrix& corr, const std::string& title) {
  const int d = int(corr.values.rows());
  const int cell = 36, left = 90, top = 40;
  const int width = left + d * cell + 20, height = top + d * cell + 90;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (int i = 0; i < d; ++i) {
    os << "<text x=\"" << left - 4 << "\" y=\"" << top + i * cell + cell / 2 + 3
       << "\" text-anchor=\"end\">" << escape(corr.labels[std::size_t(i)]) << "</text>\n";
    os << "<text transform=\"translate(" << left + i * cell + cell / 2 << "," << top + d * cell + 6
       << ") rotate(60)\">" << escape(corr.labels[std::size_t(i)]) << "</text>\n";
    for (int j = 0; j < d; ++j) {
      const double v = corr.values(i, j);
      os << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << color_for(v) << "\"/>";
      if (!std::isnan(v)) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + i * cell + cell / 2 + 3
           << "\" text-anchor=\"middle\" font-size=\"8\">" << buf << "</text>";
      }
      os << "\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string line_chart(const std::vector<Series>& series, const std::string& title,
                       const std::string& y_label) {
  const int width = 640, height = 360, left = 60, right = 140, top = 30, bottom = 40;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo = std::isfinite(lo) ? lo - 1.0 : 0.0;
    hi = lo + 2.0;
  }
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](std::size_t i) { return left + pw * double(i) / double(std::max<std::size_t>(1, n - 1)); };
  auto py = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\">" << escape(title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << hi << "</text>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << top + ph << "\" text-anchor=\"end\">" << lo << "</text>\n";
  os << "<text x=\"12\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 12 " << top + ph / 2
     << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">step</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(*kPalette))];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!std::isfinite(s.values[i])) continue;
      os << px(i) << "," << py(s.values[i]) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << width - right + 8 << "\" y=\"" << top + 14 * (k + 1) << "\" fill=\"" << color
       << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dvfsflow::svg
