#pragma once

// Figures for evaluation output: MSE against D/r0 for several runs and
// per-coefficient comparisons. Every SVG has a CSV with the same numbers.

#include <filesystem>
#include <string>
#include <vector>

namespace tpsf::report {

struct RatioSeries {
  std::string label;
  double overall_mse = 0.0;
  std::vector<double> ratios;
  std::vector<double> mse;
};

struct CoefficientRow {
  std::size_t sample = 0;
  double d_over_r0 = 0.0;
  int q = 0;
  double actual = 0.0;
  double predicted = 0.0;
};

/// Reads eval_summary.csv from an eval output directory.
RatioSeries read_eval_summary(const std::filesystem::path& eval_dir, const std::string& label);
/// Reads eval_coefficients.csv as (q, mse) pairs.
std::vector<std::pair<int, double>> read_coefficient_mse(const std::filesystem::path& eval_dir);
std::vector<CoefficientRow> read_eval_samples(const std::filesystem::path& eval_dir);

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<std::string> names;
  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> ys;
};

struct BarPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // one row per name
};

std::string render_svg(const LinePlot& plot);
std::string render_svg(const BarPlot& plot);

/// Writes mse_vs_ratio.{csv,svg}, coefficient_mse.{csv,svg} and, from the
/// first run, coefficient_comparison.{csv,svg} for its largest D/r0 sample.
/// Returns the Spearman correlation of MSE with D/r0 for each run.
std::vector<double> write_report(const std::vector<std::filesystem::path>& eval_dirs,
                                 const std::vector<std::string>& labels, const std::filesystem::path& out_dir);

}  // namespace tpsf::report
