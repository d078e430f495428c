#include "ratstab/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ratstab/error.hpp"
#include "ratstab/simd/kernels.hpp"

namespace ratstab {
namespace {

MarginPair margins(double theta, double tau, double norm, double k) {
  return {theta / 2.0 - norm * std::log(theta) / (2.0 * tau) - 3.0 * k * norm,
          std::sqrt(theta) / 2.0 - k * norm};
}

bool all_pass(double theta, double tau, double norm_p, double norm_s, double k) {
  const MarginPair ab = observer_conditions(theta, tau, norm_p, k);
  const MarginPair cd = feedback_conditions(theta, tau, norm_s, k);
  return ab.first > 0.0 && ab.second > 0.0 && cd.first > 0.0 && cd.second > 0.0;
}

std::size_t delay_steps(double tau, double h) {
  const double ratio = tau / h;
  const double m = std::round(ratio);
  if (!(h > 0.0) || m < 1.0 || std::fabs(ratio - m) > 1e-9 * ratio)
    throw ContractViolation("tau must be an integer multiple of the grid step");
  return static_cast<std::size_t>(m);
}

// Trapezoid weights times theta^((s - t)/(2 tau)), s = t - tau + j h.
Vector integral_weights(double theta, double tau, double h, std::size_t m) {
  Vector w(m + 1);
  const double log_theta = std::log(theta);
  for (std::size_t j = 0; j <= m; ++j) {
    const double offset = -static_cast<double>(m - j) * h;  // s - t
    const double trap = (j == 0 || j == m) ? 0.5 : 1.0;
    w[j] = trap * std::exp(log_theta * offset / (2.0 * tau));
  }
  return w;
}

void check_functional(const FunctionalSpec& spec) {
  const std::size_t n = spec.matrix.dim();
  if (n == 0) throw ContractViolation("functional matrix is empty");
  if (!(spec.theta > 0.0) || !(spec.tau > 0.0))
    throw ContractViolation("functional needs theta > 0 and tau > 0");
  if (!spec.matrix.is_symmetric(1e-9)) throw ContractViolation("functional matrix is not symmetric");
  if (!(symmetric_eigenvalues(spec.matrix).front() > 0.0))
    throw ContractViolation("functional matrix is not positive definite");
}

double quadratic(const Matrix& m, std::span<const double> z) {
  const std::size_t n = m.dim();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += m(i, j) * z[j];
    s += z[i] * row;
  }
  return s;
}

}  // namespace

MarginPair observer_conditions(double theta, double tau, double norm_p, double k) {
  return margins(theta, tau, norm_p, k);
}

MarginPair feedback_conditions(double theta, double tau, double norm_s, double k) {
  return margins(theta, tau, norm_s, k);
}

double output_feedback_condition(double theta, double tau, double norm_s, double k) {
  return margins(theta, tau, norm_s, k).first;
}

ConditionReport evaluate_conditions(double theta, double tau, double norm_p, double norm_s,
                                    double k) {
  ConditionReport r;
  r.theta = theta;
  r.tau = tau;
  r.norm_p = norm_p;
  r.norm_s = norm_s;
  r.k = k;
  const MarginPair ab = observer_conditions(theta, tau, norm_p, k);
  const MarginPair cd = feedback_conditions(theta, tau, norm_s, k);
  r.a = ab.first;
  r.b = ab.second;
  r.c = cd.first;
  r.d = cd.second;
  r.of_margin = output_feedback_condition(theta, tau, norm_s, k);
  r.a_ok = r.a > 0.0;
  r.b_ok = r.b > 0.0;
  r.c_ok = r.c > 0.0;
  r.d_ok = r.d > 0.0;
  r.of_ok = r.of_margin > 0.0;
  return r;
}

double find_theta_min(double tau, double norm_p, double norm_s, double k, double theta_max,
                      double tol) {
  if (!(theta_max > 1.0)) throw ConfigError("theta_max must exceed 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  constexpr double kStep = 0.1;
  if (all_pass(1.0, tau, norm_p, norm_s, k)) return 1.0;
  double prev = 1.0;
  for (std::size_t i = 1;; ++i) {
    const double theta = std::min(1.0 + kStep * static_cast<double>(i), theta_max);
    if (all_pass(theta, tau, norm_p, norm_s, k)) {
      double lo = prev, hi = theta;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (all_pass(mid, tau, norm_p, norm_s, k) ? hi : lo) = mid;
      }
      return hi;
    }
    if (theta >= theta_max) break;
    prev = theta;
  }
  throw NoFeasibleTheta("no theta in [1, " + std::to_string(theta_max) +
                        "] satisfies all four margins");
}

AlphaChoice select_alpha_observer_based(double theta, double a, double c, double norm_s,
                                        double norm_k, double margin) {
  if (!(a > 0.0) || !(c > 0.0))
    throw ConditionsNotSatisfied("observer-based alpha needs a(theta) > 0 and c(theta) > 0");
  if (!(margin > 0.0)) throw ConfigError("alpha margin must be positive");
  AlphaChoice out;
  out.threshold = 2.0 * theta * theta * norm_s * norm_s * norm_k * norm_k / (a * c);
  out.alpha = out.threshold > 0.0 ? (1.0 + margin) * out.threshold : margin;
  return out;
}

AlphaChoice select_alpha_output_feedback(double c, double d, double k, double norm_p,
                                         double margin) {
  if (!(margin > 0.0 && margin < 1.0)) throw ConfigError("alpha margin must lie in (0, 1)");
  AlphaChoice out;
  if (k == 0.0) {
    out.unconstrained = true;
    out.threshold = std::numeric_limits<double>::infinity();
    out.alpha = 1.0;
    return out;
  }
  if (!(c > 0.0) || !(d > 0.0) || !(k > 0.0) || !(norm_p > 0.0))
    throw ConditionsNotSatisfied("output-feedback alpha needs c, d, k, ||P|| > 0");
  out.threshold = std::min(c, d) / (k * norm_p);
  out.alpha = out.threshold * (1.0 - margin);
  return out;
}

StabilityParams StabilityParams::from_sandwich(double lambda1, double lambda2, double lambda3,
                                               double r1, double r2, double k) {
  if (!(lambda1 > 0.0 && lambda2 > 0.0 && lambda3 > 0.0 && r1 > 0.0 && r2 > 0.0 && k > 0.0))
    throw PreconditionViolated("stability constants must all be positive");
  StabilityParams p;
  p.lambda1 = lambda1;
  p.lambda2 = lambda2;
  p.lambda3 = lambda3;
  p.r1 = r1;
  p.r2 = r2;
  p.k = k;
  p.e = r2 / r1;
  p.M = std::pow(lambda1, -1.0 / r1) * std::pow(lambda2, 1.0 / r1);
  return p;
}

StabilityParams StabilityParams::from_corollary(double lambda1, double lambda2, double lambda3,
                                                double r1, double r2, double r3) {
  const double k = corollary_k(r2, r3);
  StabilityParams p =
      from_sandwich(lambda1, lambda2, lambda3 / std::pow(lambda2, r3 / r2), r1, r2, k);
  p.r3 = r3;
  return p;
}

double rational_bound(const StabilityParams& p, double norm_phi, double t) {
  if (norm_phi == 0.0) return 0.0;
  if (!(norm_phi > 0.0) || !(t >= 0.0)) throw PreconditionViolated("need ||phi|| > 0, t >= 0");
  const double base =
      std::pow(p.lambda2, -p.k) * std::pow(norm_phi, -p.r2 * p.k) + p.lambda3 * p.k * t;
  return std::pow(p.lambda1, -1.0 / p.r1) * std::pow(base, -1.0 / (p.k * p.r1));
}

double corollary_k(double r2, double r3) {
  if (!(r2 > 0.0) || !(r2 < r3)) throw PreconditionViolated("corollary requires 0 < r2 < r3");
  return (r3 - r2) / r2;
}

SandwichBounds functional_bounds(const FunctionalSpec& spec) {
  const Vector eig = symmetric_eigenvalues(spec.matrix);
  return {eig.front(), eig.back() + spec.theta * spec.tau / 2.0};
}

double krasovskii_value(const FunctionalSpec& spec, std::span<const double> history, double h) {
  check_functional(spec);
  const std::size_t n = spec.matrix.dim();
  const std::size_t m = delay_steps(spec.tau, h);
  if (history.size() != (m + 1) * n)
    throw ContractViolation("history must cover [t - tau, t] with " + std::to_string(m + 1) +
                            " samples");
  for (double v : history)
    if (!std::isfinite(v)) throw ContractViolation("history has missing (non-finite) samples");

  const Vector w = integral_weights(spec.theta, spec.tau, h, m);
  Vector q(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    const auto row = history.subspan(j * n, n);
    q[j] = simd::dot(row, row);
  }
  const double integral = h * simd::dot(w, q);
  return quadratic(spec.matrix, history.subspan(m * n, n)) + spec.theta / 2.0 * integral;
}

Vector krasovskii_series(const FunctionalSpec& spec, std::span<const double> series,
                         std::size_t n, double h) {
  check_functional(spec);
  if (n != spec.matrix.dim() || series.size() % n != 0)
    throw ContractViolation("series row length does not match the functional matrix");
  const std::size_t m = delay_steps(spec.tau, h);
  const std::size_t rows = series.size() / n;
  if (rows < m + 1) return {};

  Vector q(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = series.subspan(i * n, n);
    for (double v : row)
      if (!std::isfinite(v)) throw ContractViolation("series has missing (non-finite) samples");
    q[i] = simd::dot(row, row);
  }
  const Vector w = integral_weights(spec.theta, spec.tau, h, m);
  const auto& kern = simd::active();
  Vector out(rows - m);
  for (std::size_t i = m; i < rows; ++i) {
    const double integral = h * kern.dot(w.data(), q.data() + (i - m), m + 1);
    out[i - m] = quadratic(spec.matrix, series.subspan(i * n, n)) + spec.theta / 2.0 * integral;
  }
  return out;
}

}  // namespace ratstab
