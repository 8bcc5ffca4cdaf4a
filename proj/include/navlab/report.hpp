#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace navlab {

// 17 significant digits round-trips IEEE754 doubles exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Write a whole file atomically: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open for writing: " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

// Minimal CSV emitter; cells are written verbatim.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header) {
    append_row(header);
  }

  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

  void save(const std::filesystem::path& path) const {
    write_file_atomic(path, text_);
  }

 private:
  std::string text_;
};

struct SvgSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<double> x;
  std::vector<double> y;
};

// Small hand-rolled SVG line chart, enough for the sweep curves and
// histogram outlines.
inline std::string render_line_chart(const std::vector<SvgSeries>& series,
                                     const std::string& title,
                                     const std::string& x_label,
                                     const std::string& y_label) {
  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_min = x_max = s.x[i];
        y_min = y_max = s.y[i];
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto px = [&](double x) {
    return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
         "\" height=\"" + num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-size=\"16\">" + title + "</text>\n";
  // axes
  svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(height - mb) + "\" x2=\"" +
         num(width - mr) + "\" y2=\"" + num(height - mb) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) +
         "\" y2=\"" + num(height - mb) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    const double yv = y_min + (y_max - y_min) * k / 4.0;
    svg += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(height - mb + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + num(xv) + "</text>\n";
    svg += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(py(yv) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + num(yv) + "</text>\n";
    svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" +
           num(width - mr) + "\" y2=\"" + num(py(yv)) +
           "\" stroke=\"#dddddd\"/>\n";
  }
  svg += "<text x=\"" + num((ml + width - mr) / 2) + "\" y=\"" +
         num(height - 12) + "\" text-anchor=\"middle\" font-size=\"13\">" +
         x_label + "</text>\n";
  svg += "<text x=\"18\" y=\"" + num((mt + height - mb) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
         num((mt + height - mb) / 2) + ")\">" + y_label + "</text>\n";

  double legend_y = mt + 6;
  for (const auto& s : series) {
    if (!s.x.empty()) {
      std::string points;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        points += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      }
      svg += "<polyline fill=\"none\" stroke=\"" + s.color +
             "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        svg += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) +
               "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
      }
    }
    svg += "<rect x=\"" + num(width - mr - 150) + "\" y=\"" + num(legend_y - 9) +
           "\" width=\"10\" height=\"10\" fill=\"" + s.color + "\"/>\n";
    svg += "<text x=\"" + num(width - mr - 135) + "\" y=\"" + num(legend_y) +
           "\" font-size=\"12\">" + s.label + "</text>\n";
    legend_y += 16;
  }
  svg += "</svg>\n";
  return svg;
}

struct SvgBar {
  double x_lo, x_hi, height;
};

inline std::string render_histogram(const std::vector<SvgBar>& bars,
                                    const std::string& title,
                                    const std::string& x_label,
                                    const std::string& y_label) {
  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  double x_min = 0, x_max = 1, y_max = 1;
  if (!bars.empty()) {
    x_min = bars.front().x_lo;
    x_max = bars.back().x_hi;
    y_max = 0;
    for (const auto& b : bars) y_max = std::max(y_max, b.height);
    if (y_max <= 0) y_max = 1;
  }
  auto px = [&](double x) {
    return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - y / (y_max * 1.05) * (height - mt - mb);
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
         "\" height=\"" + num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-size=\"16\">" + title + "</text>\n";
  svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(height - mb) + "\" x2=\"" +
         num(width - mr) + "\" y2=\"" + num(height - mb) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) +
         "\" y2=\"" + num(height - mb) + "\" stroke=\"black\"/>\n";
  if (bars.empty()) {
    svg += "<text x=\"" + num(width / 2) + "\" y=\"" + num(height / 2) +
           "\" text-anchor=\"middle\" font-size=\"14\" fill=\"#888888\">"
           "no collision trajectories</text>\n";
  }
  for (const auto& b : bars) {
    const double x0 = px(b.x_lo);
    const double x1 = px(b.x_hi);
    const double y0 = py(b.height);
    svg += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" +
           num(std::max(0.5, x1 - x0 - 1)) + "\" height=\"" +
           num(height - mb - y0) + "\" fill=\"#1f77b4\" opacity=\"0.8\"/>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    svg += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(height - mb + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + num(xv) + "</text>\n";
    const double yv = y_max * 1.05 * k / 4.0;
    svg += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(py(yv) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + num(yv) + "</text>\n";
  }
  svg += "<text x=\"" + num((ml + width - mr) / 2) + "\" y=\"" +
         num(height - 12) + "\" text-anchor=\"middle\" font-size=\"13\">" +
         x_label + "</text>\n";
  svg += "<text x=\"18\" y=\"" + num((mt + height - mb) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
         num((mt + height - mb) / 2) + ")\">" + y_label + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace navlab
