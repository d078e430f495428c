#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ratstab/certify.hpp"
#include "ratstab/ddesim.hpp"

namespace ratstab {

struct DecayReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double violation_fraction = 0.0;
  double max_violation = 0.0;  // largest positive excess, 0 when none
};

/// Flags i where (V[i+1] - V[i]) / h + rate (V[i] + V[i+1]) / 2 > tol (1 + V[i]).
/// Throws ContractViolation for fewer than 3 samples or rate < 0.
DecayReport verify_decay(std::span<const double> series, double h, double rate, double tol);

enum class EnvelopeModel { Exponential, Rational };

struct DecayFit {
  double exp_rate = 0.0;           // y ~ C exp(-rate t)
  double exp_r_squared = 0.0;
  double rational_exponent = 0.0;  // y ~ C (1 + t)^(-p)
  double rational_r_squared = 0.0;
  EnvelopeModel preferred = EnvelopeModel::Exponential;
};

/// Least squares of log y against t and against log(1 + t). Needs at least 10
/// strictly positive samples; throws ContractViolation otherwise.
DecayFit fit_envelope(std::span<const double> times, std::span<const double> values);

/// |x(t_i)| <= rational_bound(params, |phi|_inf, t_i) (1 + tol) at every node.
bool bound_check(const Trajectory& traj, const StabilityParams& params, double tol);

/// Envelope constants for a certified linear loop (f = 0) from the functional
/// built on `m` in Delta_theta coordinates: lambda1 = lambda_min(m) theta^(-2(n-1)),
/// lambda2 = lambda_max(m) + theta tau / 2, r1 = r2 = 2, k = 1, and
/// lambda3 = rate / (lambda2 |phi|^2) with rate = ln(theta) / (2 tau).
/// Needs theta > 1.
StabilityParams linear_envelope_params(const Matrix& m, double theta, double tau, double norm_phi);

/// Plain numeric table as written to and read from CSV.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws ContractViolation if absent.
  std::size_t column(std::string_view name) const;
  Vector column_values(std::string_view name) const;
};

/// Header t,x1..xn[,xh1..xhn][,u],norm_x,norm_err.
Table trajectory_table(const Trajectory& traj);

/// 17 significant digits, ',' separator, LF line endings.
void write_csv(const Table& table, const std::filesystem::path& path);
Table read_csv(const std::filesystem::path& path);
void emit_csv(const Trajectory& traj, const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  Vector t;
  Vector y;
};

struct PlotOptions {
  std::string title;
  bool log_y = false;
  int width = 800;
  int height = 480;
};

/// Self-contained SVG polyline chart. Throws ContractViolation when there is
/// nothing to draw.
std::string render_svg(std::span<const PlotSeries> series, const PlotOptions& opts);
void emit_plot(std::span<const PlotSeries> series, const std::filesystem::path& path,
               const PlotOptions& opts);

}  // namespace ratstab
