#pragma once

#include <string>
#include <vector>

namespace mimic {

// Empirical survival curve over a set of evaluation returns: for each
// threshold, the fraction of returns at or or above it. Thresholds are the
// sorted distinct return values with 0 included.
struct CCDFReport {
  std::vector<double> thresholds;
  std::vector<double> survival;
  double area = 0.0;  // integral of the survival step function over [0, max]
};

CCDFReport ccdf(const std::vector<double>& returns);  // throws on empty input
// Recomputes the step-function integral from the stored curve.
double area_under_ccdf(const CCDFReport& report);

// ---------------------------------------------------------------------------
// CSV files: comma-separated, one header line, '\n' line endings, numbers
// printed with round-trip precision so equal values re-read identically.

std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);  // throws on missing/empty file

// ---------------------------------------------------------------------------
// Self-contained vector plot of one or more named series (iteration on the x
// axis). Purely decorative; metrics live in the CSVs.
struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series);

}  // namespace mimic
