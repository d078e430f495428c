#pragma once

// Delay-dependent margins for the high-gain observer and state feedback,
// theta synthesis, composite-functional weights, the explicit rational decay
// bound, and Lyapunov-Krasovskii functional evaluation.

#include <optional>
#include <span>

#include "ratstab/matops.hpp"

namespace ratstab {

struct MarginPair {
  double first = 0.0;   // theta/2 - norm*ln(theta)/(2 tau) - 3 k norm
  double second = 0.0;  // sqrt(theta)/2 - k norm
};

/// a(theta), b(theta) for the observer, using ||P||.
MarginPair observer_conditions(double theta, double tau, double norm_p, double k);
/// c(theta), d(theta) for state feedback, using ||S||. Same formula as the observer pair.
MarginPair feedback_conditions(double theta, double tau, double norm_s, double k);
/// Output-feedback margin theta/2 - ||S|| ln(theta)/(2 tau) - 3 k ||S||.
double output_feedback_condition(double theta, double tau, double norm_s, double k);

struct ConditionReport {
  double theta = 0.0;
  double tau = 0.0;
  double norm_p = 0.0;
  double norm_s = 0.0;
  double k = 0.0;
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  double of_margin = 0.0;
  bool a_ok = false, b_ok = false, c_ok = false, d_ok = false, of_ok = false;

  bool observer_ok() const noexcept { return a_ok && b_ok; }
  bool feedback_ok() const noexcept { return c_ok && d_ok; }
  bool all_four_ok() const noexcept { return observer_ok() && feedback_ok(); }
};

ConditionReport evaluate_conditions(double theta, double tau, double norm_p, double norm_s,
                                    double k);

/// Smallest theta in [1, theta_max] where a, b, c, d are all strictly
/// positive: scan with step 0.1, then bisect the fail->pass bracket to `tol`.
/// Throws NoFeasibleTheta when no grid point passes.
double find_theta_min(double tau, double norm_p, double norm_s, double k, double theta_max,
                      double tol);

struct AlphaChoice {
  double alpha = 0.0;
  double threshold = 0.0;  // alpha must exceed (observer-based) or stay below (output feedback)
  bool unconstrained = false;
};

/// alpha * a - 2 theta^2 ||S||^2 ||K||^2 / c > 0. Returns alpha = (1 + margin) * threshold,
/// or alpha = margin when the threshold is zero.
AlphaChoice select_alpha_observer_based(double theta, double a, double c, double norm_s,
                                        double norm_k, double margin);

/// alpha < min(c, d) / (k ||P||), returned as that bound times (1 - margin).
/// k = 0 gives an unconstrained choice.
AlphaChoice select_alpha_output_feedback(double c, double d, double k, double norm_p,
                                         double margin);

/// Constants of the rational envelope ||x(t)|| <= M ||phi||^e / (1 + ...)^(1/k).
struct StabilityParams {
  double lambda1 = 1.0, lambda2 = 1.0, lambda3 = 1.0;
  double r1 = 2.0, r2 = 2.0;
  std::optional<double> r3;
  double k = 1.0;
  double M = 1.0;
  double e = 1.0;
  double sigma = 0.0;  // 0 means global

  /// Fills M and e from the sandwich constants: e = r2/r1, M = lambda1^(-1/r1) lambda2^(1/r1).
  static StabilityParams from_sandwich(double lambda1, double lambda2, double lambda3, double r1,
                                       double r2, double k);

  /// Sandwich plus V' <= -lambda3 ||x_t||^r3 with r2 < r3: converts to the
  /// V' <= -lambda3 / lambda2^(r3/r2) V^(1+k) form, k = (r3 - r2)/r2.
  static StabilityParams from_corollary(double lambda1, double lambda2, double lambda3, double r1,
                                        double r2, double r3);
};

/// lambda1^(-1/r1) (lambda2^(-k) ||phi||^(-r2 k) + lambda3 k t)^(-1/(k r1)); 0 for ||phi|| = 0.
double rational_bound(const StabilityParams& p, double norm_phi, double t);

/// (r3 - r2) / r2. Throws PreconditionViolated unless 0 < r2 < r3.
double corollary_k(double r2, double r3);

struct FunctionalSpec {
  Matrix matrix;  // P or S
  double theta = 1.0;
  double tau = 1.0;
};

/// z(t)^T M z(t) + (theta/2) int_{t-tau}^{t} theta^((s-t)/(2 tau)) |z(s)|^2 ds.
/// `history` holds samples at t - tau, t - tau + h, ..., t (m + 1 rows of
/// length n, row-major); the integral is the trapezoid rule on that grid.
double krasovskii_value(const FunctionalSpec& spec, std::span<const double> history, double h);

/// Same functional evaluated at every grid time t_i >= t_0 + tau of a uniform
/// series (rows of length n starting at t_0). Result i corresponds to row
/// i + m, where m = tau / h.
Vector krasovskii_series(const FunctionalSpec& spec, std::span<const double> series,
                         std::size_t n, double h);

/// lambda_min / lambda_max + theta tau / 2 bounds for the functional.
struct SandwichBounds {
  double lower = 0.0;  // lambda_min(M)
  double upper = 0.0;  // lambda_max(M) + theta tau / 2
};
SandwichBounds functional_bounds(const FunctionalSpec& spec);

}  // namespace ratstab
