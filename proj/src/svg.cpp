// Copyright (c) 2026 The bts-rppg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bts/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "bts/error.hpp"

namespace bts::app {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 150.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 48.0;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
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
  double x0, x1, y0, y1;
  double px(double x) const {
    return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& x_label,
          const std::string& y_label) {
  const double bx = kLeft, by = kHeight - kBottom;
  os << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\""
     << num(kWidth - kRight) << "\" y2=\"" << num(by) << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\"" << num(bx)
     << "\" y2=\"" << num(kTop) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << num(bx - 6) << "\" y=\"" << num(f.py(yv) + 4)
       << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    if (!x_label.empty()) {
      const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
      os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(by + 16)
         << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    }
  }
  os << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 10)
     << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n"
     << "<text x=\"16\" y=\"" << num((kTop + kHeight - kBottom) / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num((kTop + kHeight - kBottom) / 2) << ")\">" << escape(y_label) << "</text>\n";
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series) {
  Frame f{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
          std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
  for (const auto& s : series) {
    for (double x : s.x) f.x0 = std::min(f.x0, x), f.x1 = std::max(f.x1, x);
    for (double y : s.y) f.y0 = std::min(f.y0, y), f.y1 = std::max(f.y1, y);
  }
  if (f.x0 > f.x1) f = {0, 1, 0, 1};
  if (f.x1 == f.x0) f.x1 = f.x0 + 1;
  if (f.y1 == f.y0) f.y0 -= 0.5, f.y1 += 0.5;

  std::ostringstream os;
  header(os, title);
  axes(os, f, x_label, y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      os << (k ? " " : "") << num(f.px(s.x[k])) << "," << num(f.py(s.y[k]));
    }
    os << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(i) + 8;
    os << "<line x1=\"" << num(kWidth - kRight + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
       << num(kWidth - kRight + 30) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << num(kWidth - kRight + 36) << "\" y=\"" << num(ly + 4) << "\">"
       << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars) {
  double top = 0.0;
  for (const auto& b : bars) top = std::max(top, b.value + b.error);
  if (top <= 0.0) top = 1.0;
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(bars.size(), 1)), 0.0, top * 1.1};

  std::ostringstream os;
  header(os, title);
  axes(os, f, "", y_label);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double x0 = f.px(static_cast<double>(i) + 0.15);
    const double x1 = f.px(static_cast<double>(i) + 0.85);
    const double yb = f.py(0.0), yt = f.py(b.value);
    os << "<rect x=\"" << num(x0) << "\" y=\"" << num(yt) << "\" width=\"" << num(x1 - x0)
       << "\" height=\"" << num(yb - yt) << "\" fill=\"" << kPalette[i % std::size(kPalette)]
       << "\"/>\n";
    if (b.error > 0.0) {
      const double xm = (x0 + x1) / 2;
      os << "<line x1=\"" << num(xm) << "\" y1=\"" << num(f.py(b.value - b.error))
         << "\" x2=\"" << num(xm) << "\" y2=\"" << num(f.py(b.value + b.error))
         << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(yb + 16)
       << "\" text-anchor=\"middle\">" << escape(b.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace bts::app
