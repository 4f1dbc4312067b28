#include "mimic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mimic {

CCDFReport ccdf(const std::vector<double>& returns) {
  if (returns.empty()) {
    throw std::invalid_argument("survival curve needs at least one return");
  }
  CCDFReport rep;
  rep.thresholds = returns;
  rep.thresholds.push_back(0.0);
  std::sort(rep.thresholds.begin(), rep.thresholds.end());
  rep.thresholds.erase(std::unique(rep.thresholds.begin(), rep.thresholds.end()),
                       rep.thresholds.end());

  const double n = static_cast<double>(returns.size());
  rep.survival.reserve(rep.thresholds.size());
  for (double t : rep.thresholds) {
    int at_least = 0;
    for (double r : returns) {
      if (r >= t) ++at_least;
    }
    rep.survival.push_back(at_least / n);
  }
  rep.area = area_under_ccdf(rep);
  return rep;
}

double area_under_ccdf(const CCDFReport& report) {
  if (report.thresholds.size() != report.survival.size()) {
    throw std::invalid_argument("malformed survival curve");
  }
  // The survival function is a right-continuous step function that drops at
  // each threshold; between consecutive thresholds a < t <= b its value is
  // survival(b). Integrate over [0, max threshold] only.
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < report.thresholds.size(); ++i) {
    const double a = std::max(report.thresholds[i], 0.0);
    const double b = report.thresholds[i + 1];
    if (b > a) {
      area += (b - a) * report.survival[i + 1];
    }
  }
  return area;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  auto put_line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  put_line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::invalid_argument("csv row width does not match the header");
    }
    put_line(row);
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path);
  }
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.empty()) continue;
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) {
    throw std::runtime_error("csv file has no header: " + path);
  }
  return table;
}

// ---------------------------------------------------------------------------
// SVG plot

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series) {
  const int w = 640, h = 400, ml = 60, mr = 20, mt = 40, mb = 40;
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool seeded = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!seeded) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        seeded = true;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << ml - 8 << "\" y=\"" << py(ymin) << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << format_double(ymin) << "</text>\n";
  out << "<text x=\"" << ml - 8 << "\" y=\"" << py(ymax) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << format_double(ymax) << "</text>\n";
  out << "<text x=\"" << px(xmax) << "\" y=\"" << h - mb + 16 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << format_double(xmax) << "</text>\n";

  int ci = 0;
  for (const auto& s : series) {
    const char* color = colors[ci % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << w - mr - 4 << "\" y=\"" << mt + 14 * (ci + 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color
        << "\">" << s.name << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace mimic
