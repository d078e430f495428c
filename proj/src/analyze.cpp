#include "ratstab/analyze.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "ratstab/error.hpp"
#include "ratstab/simd/kernels.hpp"

namespace ratstab {
namespace {

struct LineFit {
  double slope = 0.0;
  double r_squared = 0.0;
};

LineFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double ss_res = std::max(0.0, syy - f.slope * sxy);
  // Flat data is fitted perfectly by the zero-slope line.
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return f;
}

std::string format_value(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

DecayReport verify_decay(std::span<const double> series, double h, double rate, double tol) {
  if (series.size() < 3) throw ContractViolation("verify_decay needs at least 3 samples");
  if (!(h > 0.0)) throw ContractViolation("verify_decay needs a positive step");
  if (!(rate >= 0.0)) throw ContractViolation("decay rate must be >= 0");
  const simd::DecayScan scan = simd::decay_scan(series, 1.0 / h, rate, tol);
  DecayReport r;
  r.checked = series.size() - 1;
  r.violations = scan.violations;
  r.violation_fraction = static_cast<double>(r.violations) / static_cast<double>(r.checked);
  r.max_violation = std::max(0.0, scan.worst_excess);
  return r;
}

DecayFit fit_envelope(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw ContractViolation("times and values differ in length");
  if (values.size() < 10) throw ContractViolation("fit_envelope needs at least 10 samples");
  Vector ts, log_t, log_y;
  ts.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i]))
      throw ContractViolation("fit_envelope needs strictly positive samples");
    if (!(times[i] > -1.0)) throw ContractViolation("fit_envelope needs t > -1");
    ts.push_back(times[i]);
    log_t.push_back(std::log1p(times[i]));
    log_y.push_back(std::log(values[i]));
  }
  const LineFit e = least_squares(ts, log_y);
  const LineFit r = least_squares(log_t, log_y);
  DecayFit fit;
  fit.exp_rate = -e.slope;
  fit.exp_r_squared = e.r_squared;
  fit.rational_exponent = -r.slope;
  fit.rational_r_squared = r.r_squared;
  fit.preferred = r.r_squared > e.r_squared ? EnvelopeModel::Rational : EnvelopeModel::Exponential;
  return fit;
}

bool bound_check(const Trajectory& traj, const StabilityParams& params, double tol) {
  const double phi = traj.initial_sup_norm();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double nx = traj.norm_x[i];
    if (phi == 0.0) {
      if (nx != 0.0) return false;
      continue;
    }
    if (nx > rational_bound(params, phi, traj.times[i]) * (1.0 + tol)) return false;
  }
  return true;
}

StabilityParams linear_envelope_params(const Matrix& m, double theta, double tau, double norm_phi) {
  if (!(theta > 1.0)) throw PreconditionViolated("linear envelope needs theta > 1");
  if (!(norm_phi > 0.0)) throw PreconditionViolated("linear envelope needs |phi| > 0");
  const FunctionalSpec spec{m, theta, tau};
  const SandwichBounds sb = functional_bounds(spec);
  const double n = static_cast<double>(m.dim());
  const double lambda1 = sb.lower * std::pow(theta, -2.0 * (n - 1.0));
  const double rate = std::log(theta) / (2.0 * tau);
  // Exponential decay V' <= -rate V with V <= lambda2 |phi|^2 implies
  // V' <= -rate / (lambda2 |phi|^2) V^2.
  const double lambda3 = rate / (sb.upper * norm_phi * norm_phi);
  return StabilityParams::from_sandwich(lambda1, sb.upper, lambda3, 2.0, 2.0, 1.0);
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ContractViolation("no column named '" + std::string(name) + "'");
}

Vector Table::column_values(std::string_view name) const {
  const std::size_t c = column(name);
  Vector out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(c));
  return out;
}

Table trajectory_table(const Trajectory& traj) {
  Table t;
  const std::size_t n = traj.n;
  t.header.push_back("t");
  for (std::size_t i = 1; i <= n; ++i) t.header.push_back("x" + std::to_string(i));
  if (traj.has_observer())
    for (std::size_t i = 1; i <= n; ++i) t.header.push_back("xh" + std::to_string(i));
  if (traj.has_control()) t.header.push_back("u");
  t.header.push_back("norm_x");
  t.header.push_back("norm_err");
  t.rows.reserve(traj.size());
  for (std::size_t r = 0; r < traj.size(); ++r) {
    std::vector<double> row;
    row.reserve(t.header.size());
    row.push_back(traj.times[r]);
    for (std::size_t i = 0; i < n; ++i) row.push_back(traj.x[r * n + i]);
    if (traj.has_observer())
      for (std::size_t i = 0; i < n; ++i) row.push_back(traj.xhat[r * n + i]);
    if (traj.has_control()) row.push_back(traj.u[r]);
    row.push_back(traj.norm_x[r]);
    row.push_back(traj.norm_err[r]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  std::string buf;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) buf += ',';
    buf += table.header[i];
  }
  buf += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) buf += ',';
      buf += format_value(row[i]);
    }
    buf += '\n';
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed", path.string());
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV file", path.string());
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + end, v);
      if (ec != std::errc() || ptr != line.data() + end)
        throw IoError("malformed number on line " + std::to_string(lineno), path.string());
      row.push_back(v);
      start = end + 1;
    }
    if (row.size() != t.header.size())
      throw IoError("wrong field count on line " + std::to_string(lineno), path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

void emit_csv(const Trajectory& traj, const std::filesystem::path& path) {
  write_csv(trajectory_table(traj), path);
}

std::string render_svg(std::span<const PlotSeries> series, const PlotOptions& opts) {
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  double ymin = tmin, ymax = -tmin;
  std::size_t points = 0;
  const auto ytrans = [&](double y) { return opts.log_y ? std::log10(y) : y; };
  for (const PlotSeries& s : series) {
    for (std::size_t i = 0; i < std::min(s.t.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i]) || (opts.log_y && !(s.y[i] > 0.0))) continue;
      tmin = std::min(tmin, s.t[i]);
      tmax = std::max(tmax, s.t[i]);
      ymin = std::min(ymin, ytrans(s.y[i]));
      ymax = std::max(ymax, ytrans(s.y[i]));
      ++points;
    }
  }
  if (points == 0) throw ContractViolation("plot has no data");
  if (tmax == tmin) tmax = tmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const double left = 70, right = 20, top = 40, bottom = 50;
  const double pw = opts.width - left - right, ph = opts.height - top - bottom;
  const auto px = [&](double t) { return left + (t - tmin) / (tmax - tmin) * pw; };
  const auto py = [&](double y) { return top + (1.0 - (ytrans(y) - ymin) / (ymax - ymin)) * ph; };

  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b"};
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\">\n",
      opts.width, opts.height, opts.width, opts.height);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
                     opts.width, opts.height);
  svg += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      left, top, pw, ph);
  if (!opts.title.empty())
    svg += fmt::format("<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
                       "text-anchor=\"middle\">{}</text>\n",
                       opts.width / 2, opts.title);
  for (int k = 0; k <= 4; ++k) {
    const double frac = k / 4.0;
    const double tv = tmin + frac * (tmax - tmin);
    const double yv = ymin + frac * (ymax - ymin);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" "
                       "font-size=\"11\" text-anchor=\"middle\">{:.3g}</text>\n",
                       left + frac * pw, top + ph + 18, tv);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" "
                       "font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                       left - 6, top + (1.0 - frac) * ph + 4,
                       opts.log_y ? fmt::format("1e{:.2g}", yv) : fmt::format("{:.3g}", yv));
  }
  std::size_t idx = 0;
  for (const PlotSeries& s : series) {
    const char* color = kColors[idx % std::size(kColors)];
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"", color);
    bool first = true;
    for (std::size_t i = 0; i < std::min(s.t.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i]) || (opts.log_y && !(s.y[i] > 0.0))) continue;
      svg += fmt::format("{}{:.2f},{:.2f}", first ? "" : " ", px(s.t[i]), py(s.y[i]));
      first = false;
    }
    svg += "\"/>\n";
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" "
                       "fill=\"{}\">{}</text>\n",
                       left + pw - 150, top + 16 + 16 * static_cast<double>(idx), color, s.label);
    ++idx;
  }
  svg += "</svg>\n";
  return svg;
}

void emit_plot(std::span<const PlotSeries> series, const std::filesystem::path& path,
               const PlotOptions& opts) {
  const std::string svg = render_svg(series, opts);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out << svg;
  if (!out) throw IoError("write failed", path.string());
}

}  // namespace ratstab
