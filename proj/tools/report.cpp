#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "tpsf/errors.hpp"

namespace tpsf::report {
namespace fs = std::filesystem;

namespace {

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw FormatError(path.string() + ": expected header '" + header + "'", 0);
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (!line.empty()) rows.push_back(split_csv(line));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(path.string() + ": bad number '" + s + "'", 0);
}

std::string xml_escape(const std::string& s) {
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

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << (v == 0.0 ? 0.0 : v);
  return os.str();
}

// Round-number ticks covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) hi = lo + 1.0;
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> t;
  const auto first = static_cast<long>(std::floor(lo / step + 1e-9));
  const auto last = static_cast<long>(std::ceil(hi / step - 1e-9));
  for (long k = first; k <= last; ++k) t.push_back(k == 0 ? 0.0 : static_cast<double>(k) * step);
  return t;
}

struct Frame {
  double left = 80, right = 170, top = 40, bottom = 60, width = 720, height = 440;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void open_svg(std::ostringstream& os, const Frame& f, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
     << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& xl, const std::string& yl) {
  const double xa = f.left, xb = f.width - f.right, ya = f.height - f.bottom, yb = f.top;
  os << "<rect x=\"" << xa << "\" y=\"" << yb << "\" width=\"" << xb - xa << "\" height=\"" << ya - yb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (xa + xb) / 2 << "\" y=\"" << f.height - 18 << "\" text-anchor=\"middle\">" << xml_escape(xl)
     << "</text>\n";
  os << "<text transform=\"translate(18," << (ya + yb) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << xml_escape(yl) << "</text>\n";
}

void legend(std::ostringstream& os, const Frame& f, const std::vector<std::string>& names) {
  const double x = f.width - f.right + 15;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = f.top + 10 + 20.0 * static_cast<double>(i);
    os << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"14\" height=\"10\" fill=\"" << kColors[i % 8]
       << "\"/>\n<text x=\"" << x + 20 << "\" y=\"" << y << "\">" << xml_escape(names[i]) << "</text>\n";
  }
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw IoError("cannot write " + path.string());
}

}  // namespace

RatioSeries read_eval_summary(const fs::path& eval_dir, const std::string& label) {
  const fs::path path = eval_dir / "eval_summary.csv";
  RatioSeries s;
  s.label = label;
  bool overall = false;
  for (const auto& row : read_csv(path, "scope,d_over_r0,count,mse")) {
    if (row.size() != 4) throw FormatError(path.string() + ": expected 4 columns", 0);
    if (row[0] == "overall") {
      s.overall_mse = to_double(row[3], path);
      overall = true;
    } else if (row[0] == "ratio") {
      s.ratios.push_back(to_double(row[1], path));
      s.mse.push_back(to_double(row[3], path));
    }
  }
  if (!overall || s.ratios.empty()) throw FormatError(path.string() + ": no overall or per-ratio rows", 0);
  return s;
}

std::vector<std::pair<int, double>> read_coefficient_mse(const fs::path& eval_dir) {
  const fs::path path = eval_dir / "eval_coefficients.csv";
  std::vector<std::pair<int, double>> out;
  for (const auto& row : read_csv(path, "q,mse")) {
    if (row.size() != 2) throw FormatError(path.string() + ": expected 2 columns", 0);
    out.emplace_back(static_cast<int>(to_double(row[0], path)), to_double(row[1], path));
  }
  return out;
}

std::vector<CoefficientRow> read_eval_samples(const fs::path& eval_dir) {
  const fs::path path = eval_dir / "eval_samples.csv";
  std::vector<CoefficientRow> out;
  for (const auto& row : read_csv(path, "sample,d_over_r0,q,actual,predicted")) {
    if (row.size() != 5) throw FormatError(path.string() + ": expected 5 columns", 0);
    out.push_back({static_cast<std::size_t>(to_double(row[0], path)), to_double(row[1], path),
                   static_cast<int>(to_double(row[2], path)), to_double(row[3], path), to_double(row[4], path)});
  }
  return out;
}

std::string render_svg(const LinePlot& plot) {
  Frame f;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (std::size_t s = 0; s < plot.xs.size(); ++s) {
    for (std::size_t i = 0; i < plot.xs[s].size(); ++i) {
      const double y = plot.ys[s][i];
      if (plot.log_y && !(y > 0)) continue;
      xmin = std::min(xmin, plot.xs[s][i]);
      xmax = std::max(xmax, plot.xs[s][i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = plot.log_y ? 1e-3 : 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  auto ty = [&](double y) { return plot.log_y ? std::log10(y) : y; };
  std::vector<double> yticks;
  if (plot.log_y) {
    f.y0 = std::floor(std::log10(ymin));
    f.y1 = std::ceil(std::log10(ymax));
    if (f.y1 == f.y0) f.y1 += 1;
    for (double e = f.y0; e <= f.y1; e += 1) yticks.push_back(e);
  } else {
    yticks = nice_ticks(std::min(0.0, ymin), ymax == ymin ? ymin + 1 : ymax);
    f.y0 = yticks.front();
    f.y1 = yticks.back();
  }
  const auto xticks = nice_ticks(xmin, xmax, 8);
  f.x0 = std::min(xmin, xticks.front());
  f.x1 = std::max(xmax, xticks.back());

  std::ostringstream os;
  open_svg(os, f, plot.title);
  for (double t : yticks) {
    const double y = f.py(t);
    os << "<line x1=\"" << f.left << "\" x2=\"" << f.width - f.right << "\" y1=\"" << y << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n<text x=\"" << f.left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
       << (plot.log_y ? "1e" + fmt(t) : fmt(t)) << "</text>\n";
  }
  for (double t : xticks) {
    const double x = f.px(t);
    os << "<text x=\"" << x << "\" y=\"" << f.height - f.bottom + 16 << "\" text-anchor=\"middle\">" << fmt(t)
       << "</text>\n";
  }
  axes(os, f, plot.x_label, plot.y_label);
  for (std::size_t s = 0; s < plot.xs.size(); ++s) {
    const char* color = kColors[s % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < plot.xs[s].size(); ++i) {
      if (plot.log_y && !(plot.ys[s][i] > 0)) continue;
      os << f.px(plot.xs[s][i]) << "," << f.py(ty(plot.ys[s][i])) << " ";
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < plot.xs[s].size(); ++i) {
      if (plot.log_y && !(plot.ys[s][i] > 0)) continue;
      os << "<circle cx=\"" << f.px(plot.xs[s][i]) << "\" cy=\"" << f.py(ty(plot.ys[s][i])) << "\" r=\"3\" fill=\""
         << color << "\"/>\n";
    }
  }
  legend(os, f, plot.names);
  os << "</svg>\n";
  return os.str();
}

std::string render_svg(const BarPlot& plot) {
  Frame f;
  f.width = std::max(720.0, 60.0 + 28.0 * static_cast<double>(plot.categories.size() * std::max<std::size_t>(1, plot.names.size())));
  double lo = 0.0, hi = 0.0;
  for (const auto& row : plot.values) {
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const auto yticks = nice_ticks(lo, hi == lo ? lo + 1 : hi);
  f.y0 = yticks.front();
  f.y1 = yticks.back();
  f.x0 = 0;
  f.x1 = static_cast<double>(std::max<std::size_t>(1, plot.categories.size()));

  std::ostringstream os;
  open_svg(os, f, plot.title);
  for (double t : yticks) {
    const double y = f.py(t);
    os << "<line x1=\"" << f.left << "\" x2=\"" << f.width - f.right << "\" y1=\"" << y << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n<text x=\"" << f.left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
       << fmt(t) << "</text>\n";
  }
  const double slot = f.px(1) - f.px(0);
  const double bar = 0.8 * slot / static_cast<double>(std::max<std::size_t>(1, plot.names.size()));
  const double base = f.py(std::clamp(0.0, f.y0, f.y1));
  for (std::size_t c = 0; c < plot.categories.size(); ++c) {
    const double x = f.px(static_cast<double>(c));
    os << "<text x=\"" << x + slot / 2 << "\" y=\"" << f.height - f.bottom + 16 << "\" text-anchor=\"middle\">"
       << xml_escape(plot.categories[c]) << "</text>\n";
    for (std::size_t s = 0; s < plot.names.size(); ++s) {
      const double y = f.py(plot.values[s][c]);
      os << "<rect x=\"" << x + 0.1 * slot + bar * static_cast<double>(s) << "\" y=\"" << std::min(y, base)
         << "\" width=\"" << bar << "\" height=\"" << std::abs(base - y) << "\" fill=\"" << kColors[s % 8]
         << "\"/>\n";
    }
  }
  os << "<line x1=\"" << f.left << "\" x2=\"" << f.width - f.right << "\" y1=\"" << base << "\" y2=\"" << base
     << "\" stroke=\"black\"/>\n";
  axes(os, f, plot.x_label, plot.y_label);
  legend(os, f, plot.names);
  os << "</svg>\n";
  return os.str();
}

std::vector<double> write_report(const std::vector<fs::path>& eval_dirs, const std::vector<std::string>& labels,
                                 const fs::path& out_dir) {
  if (eval_dirs.empty()) throw ConfigError("report needs at least one eval directory");
  if (labels.size() != eval_dirs.size()) throw ConfigError("one label per eval directory is required");
  std::vector<RatioSeries> series;
  std::vector<std::vector<std::pair<int, double>>> coeff;
  for (std::size_t i = 0; i < eval_dirs.size(); ++i) {
    series.push_back(read_eval_summary(eval_dirs[i], labels[i]));
    coeff.push_back(read_coefficient_mse(eval_dirs[i]));
  }
  const auto samples = read_eval_samples(eval_dirs.front());
  fs::create_directories(out_dir);

  std::vector<double> rho;
  LinePlot lp{"MSE against D/r0", "D/r0", "MSE", false, {}, {}, {}};
  std::ostringstream csv;
  csv << std::setprecision(17) << "label,d_over_r0,mse\n";
  for (const auto& s : series) {
    lp.names.push_back(s.label);
    lp.xs.push_back(s.ratios);
    lp.ys.push_back(s.mse);
    for (std::size_t i = 0; i < s.ratios.size(); ++i) csv << s.label << "," << s.ratios[i] << "," << s.mse[i] << "\n";
    rho.push_back(spearman(s.ratios, s.mse));
  }
  write_text(out_dir / "mse_vs_ratio.csv", csv.str());
  write_text(out_dir / "mse_vs_ratio.svg", render_svg(lp));

  BarPlot cp{"MSE per coefficient", "Zernike index q", "MSE", {}, {}, {}};
  std::ostringstream ccsv;
  ccsv << std::setprecision(17) << "label,q,mse\n";
  for (const auto& [q, m] : coeff.front()) cp.categories.push_back(std::to_string(q));
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (coeff[s].size() != coeff.front().size()) throw FormatError("coefficient counts differ between eval directories", 0);
    cp.names.push_back(series[s].label);
    cp.values.emplace_back();
    for (const auto& [q, m] : coeff[s]) {
      cp.values.back().push_back(m);
      ccsv << series[s].label << "," << q << "," << m << "\n";
    }
  }
  write_text(out_dir / "coefficient_mse.csv", ccsv.str());
  write_text(out_dir / "coefficient_mse.svg", render_svg(cp));

  // Actual against predicted for the largest-D/r0 sample of the first run.
  if (!samples.empty()) {
    double worst = -1.0;
    for (const auto& r : samples) worst = std::max(worst, r.d_over_r0);
    std::size_t pick = 0;
    for (const auto& r : samples) {
      if (r.d_over_r0 == worst) {
        pick = r.sample;
        break;
      }
    }
    BarPlot bp{"Coefficients, " + labels.front() + ", D/r0 = " + fmt(worst), "Zernike index q", "coefficient", {}, {"actual", "predicted"},
               {{}, {}}};
    std::ostringstream scsv;
    scsv << std::setprecision(17) << "sample,d_over_r0,q,actual,predicted\n";
    for (const auto& r : samples) {
      if (r.sample != pick) continue;
      bp.categories.push_back(std::to_string(r.q));
      bp.values[0].push_back(r.actual);
      bp.values[1].push_back(r.predicted);
      scsv << r.sample << "," << r.d_over_r0 << "," << r.q << "," << r.actual << "," << r.predicted << "\n";
    }
    write_text(out_dir / "coefficient_comparison.csv", scsv.str());
    write_text(out_dir / "coefficient_comparison.svg", render_svg(bp));
  }
  return rho;
}

}  // namespace tpsf::report
