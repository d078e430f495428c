#pragma once

// Constant-delay DDE integration by the method of steps with classical RK4,
// and closed-loop wiring of the plant/observer/controller configurations.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ratstab/matops.hpp"
#include "ratstab/sysmodel.hpp"

namespace ratstab {

/// dx/dt = rhs(t, x(t), x(t - tau))
using DelayRhs = std::function<void(double t, std::span<const double> x,
                                    std::span<const double> x_delayed, std::span<double> dx)>;

/// Initial function on [-tau, 0] and its derivative.
struct InitialHistory {
  std::function<void(double s, std::span<double> out)> value;
  std::function<void(double s, std::span<double> out)> derivative;

  static InitialHistory constant(Vector x0);
  /// Derivative by fourth-order central differences of `value`.
  static InitialHistory from_function(std::function<void(double, std::span<double>)> value);
};

/// Uniform-grid solution of a DDE. Rows of length `dim`.
struct StateSeries {
  std::size_t dim = 0;
  double h = 0.0;
  std::size_t delay_steps = 0;  // m = tau / h
  Vector times;                 // t_i = i h, i = 0..N
  Vector states;                // N + 1 rows
  Vector history;               // m + 1 rows on [-tau, 0]

  std::size_t size() const noexcept { return times.size(); }
  std::span<const double> state(std::size_t i) const { return {states.data() + i * dim, dim}; }
};

/// Node storage for delayed lookups: states and right-hand-side values at
/// every grid node from -tau on. The derivative at t = 0 is kept twice (left
/// limit from the initial function, right limit from the dynamics).
class HistoryBuffer {
 public:
  HistoryBuffer(std::size_t dim, double h, std::size_t delay_steps, const InitialHistory& phi);

  std::size_t dim() const noexcept { return dim_; }
  double step() const noexcept { return h_; }
  std::size_t delay_steps() const noexcept { return m_; }
  /// Number of solution nodes stored at t >= 0.
  std::size_t solution_nodes() const noexcept { return deriv_.size() / dim_; }

  /// State at global node g (g = 0 is t = -tau, g = m is t = 0).
  std::span<const double> node(std::size_t g) const { return {states_.data() + g * dim_, dim_}; }
  /// Cubic Hermite value at the midpoint of [node g, node g + 1].
  void midpoint(std::size_t g, std::span<double> out) const;

  void push(std::span<const double> x, std::span<const double> dx);
  void set_initial_derivative(std::span<const double> dx);

  std::span<const double> all_states() const noexcept { return states_; }

 private:
  std::span<const double> derivative_at(std::size_t g, bool right_interval) const;

  std::size_t dim_;
  double h_;
  std::size_t m_;
  Vector states_;       // global nodes 0..m+N
  Vector hist_deriv_;   // phi' at nodes 0..m
  Vector deriv_;        // f at solution nodes (t >= 0)
};

/// Validates tau = m h with integer m >= 2 and T = N h, returns (m, N).
std::pair<std::size_t, std::size_t> grid_steps(double tau, double h, double horizon);

/// Classical RK4 with delayed stage values from the history buffer. Throws
/// ConfigError on step/delay incompatibility and Diverged when the state
/// becomes non-finite or exceeds 1e12 in norm.
StateSeries integrate(const DelayRhs& rhs, std::size_t dim, const InitialHistory& phi,
                      double tau, double h, double horizon);

enum class ScenarioMode { OpenLoop, StateFeedback, ObserverOnly, ObserverBased, OutputFeedback };

std::string_view mode_name(ScenarioMode m) noexcept;
ScenarioMode mode_from_name(std::string_view name);  // throws ConfigError
bool has_observer(ScenarioMode m) noexcept;
bool has_control(ScenarioMode m) noexcept;

struct Scenario {
  ScenarioMode mode = ScenarioMode::ObserverBased;
  /// Input for ObserverOnly; ignored otherwise. Defaults to u = 0.
  std::function<double(double t)> external_input;
};

/// Closed-loop simulation result, all series on one grid starting at t = 0.
struct Trajectory {
  ScenarioMode mode = ScenarioMode::OpenLoop;
  std::size_t n = 0;
  double h = 0.0;
  double tau = 0.0;
  double theta = 1.0;
  Vector times;
  Vector x;         // rows of n
  Vector xhat;      // rows of n, empty without observer
  Vector u;         // one per node, empty without control
  Vector norm_x;
  Vector norm_err;  // |xhat - x|, zeros without observer
  Vector eta;       // Delta_theta (xhat - x), rows of n
  Vector chi;       // Delta_theta x, rows of n
  Vector history_x;     // plant initial function on [-tau, 0], m + 1 rows
  Vector history_xhat;  // observer initial function, empty without observer

  std::size_t size() const noexcept { return times.size(); }
  bool has_observer() const noexcept { return !xhat.empty(); }
  bool has_control() const noexcept { return !u.empty(); }
  std::size_t delay_steps() const noexcept { return history_x.size() / (n ? n : 1) - 1; }

  /// Transformed series with the initial segment prepended (rows from -tau),
  /// as consumed by krasovskii_series.
  Vector eta_with_history() const;
  Vector chi_with_history() const;
  /// sup of |phi(s)| over the stored initial grid.
  double initial_sup_norm() const;
};

Trajectory run_scenario(const SystemSpec& sys, const GainSet& gains, const Scenario& sc,
                        const InitialHistory& phi, const InitialHistory& phi_hat, double h,
                        double horizon);

struct ScenarioJob {
  const SystemSpec* sys;
  const GainSet* gains;
  Scenario scenario;
  InitialHistory phi;
  InitialHistory phi_hat;
  double h;
  double horizon;
};

/// Runs independent jobs on worker threads; results are indexed like `jobs`.
/// The first exception (by job index) is rethrown after all jobs finish.
std::vector<Trajectory> run_scenarios_parallel(std::span<const ScenarioJob> jobs);

}  // namespace ratstab
