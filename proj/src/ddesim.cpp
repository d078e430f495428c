#include "ratstab/ddesim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <future>
#include <string>

#include "ratstab/error.hpp"

namespace ratstab {
namespace {

constexpr double kDivergenceNorm = 1e12;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool bounded(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return false;
    s += x * x;
  }
  return std::sqrt(s) <= kDivergenceNorm;
}

}  // namespace

InitialHistory InitialHistory::constant(Vector x0) {
  InitialHistory h;
  h.value = [x0](double, std::span<double> out) { std::copy(x0.begin(), x0.end(), out.begin()); };
  h.derivative = [](double, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  return h;
}

InitialHistory InitialHistory::from_function(std::function<void(double, std::span<double>)> value) {
  InitialHistory h;
  h.value = value;
  h.derivative = [value](double s, std::span<double> out) {
    constexpr double d = 1e-4;
    const std::size_t n = out.size();
    std::array<double, 2 * kMaxDim> p2{}, p1{}, m1{}, m2{};
    value(s + 2 * d, std::span<double>(p2.data(), n));
    value(s + d, std::span<double>(p1.data(), n));
    value(s - d, std::span<double>(m1.data(), n));
    value(s - 2 * d, std::span<double>(m2.data(), n));
    for (std::size_t i = 0; i < n; ++i)
      out[i] = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * d);
  };
  return h;
}

HistoryBuffer::HistoryBuffer(std::size_t dim, double h, std::size_t delay_steps,
                             const InitialHistory& phi)
    : dim_(dim), h_(h), m_(delay_steps), states_((delay_steps + 1) * dim),
      hist_deriv_((delay_steps + 1) * dim) {
  if (dim_ == 0) throw ConfigError("state dimension must be positive");
  if (m_ < 2) throw ConfigError("tau must span at least two grid steps");
  for (std::size_t g = 0; g <= m_; ++g) {
    // s = -tau + g h, computed so that g = m lands exactly on 0.
    const double s = -static_cast<double>(m_ - g) * h_;
    phi.value(s, std::span<double>(states_.data() + g * dim_, dim_));
    phi.derivative(s, std::span<double>(hist_deriv_.data() + g * dim_, dim_));
  }
  for (double v : states_)
    if (!std::isfinite(v)) throw ConfigError("initial history has non-finite values");
}

void HistoryBuffer::set_initial_derivative(std::span<const double> dx) {
  deriv_.assign(dx.begin(), dx.end());
}

void HistoryBuffer::push(std::span<const double> x, std::span<const double> dx) {
  states_.insert(states_.end(), x.begin(), x.end());
  deriv_.insert(deriv_.end(), dx.begin(), dx.end());
}

std::span<const double> HistoryBuffer::derivative_at(std::size_t g, bool right_interval) const {
  // Intervals entirely inside [-tau, 0] use the initial function's derivative;
  // everything after t = 0 uses the dynamics.
  if (!right_interval) return {hist_deriv_.data() + g * dim_, dim_};
  return {deriv_.data() + (g - m_) * dim_, dim_};
}

void HistoryBuffer::midpoint(std::size_t g, std::span<double> out) const {
  const bool right = g >= m_;
  const auto y0 = node(g);
  const auto y1 = node(g + 1);
  const auto d0 = derivative_at(g, right);
  const auto d1 = derivative_at(g + 1, right);
  for (std::size_t i = 0; i < dim_; ++i)
    out[i] = 0.5 * (y0[i] + y1[i]) + h_ / 8.0 * (d0[i] - d1[i]);
}

std::pair<std::size_t, std::size_t> grid_steps(double tau, double h, double horizon) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("step h must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("delay tau must be positive");
  if (!(horizon >= h) || !std::isfinite(horizon)) throw ConfigError("horizon T must be >= h");
  const double mr = tau / h;
  const double m = std::round(mr);
  if (std::fabs(mr - m) > 1e-9 * mr || m < 2.0)
    throw ConfigError("tau must be an integer multiple m >= 2 of the step h");
  const double nr = horizon / h;
  const double n = std::round(nr);
  if (std::fabs(nr - n) > 1e-9 * nr) throw ConfigError("horizon T must be a multiple of h");
  return {static_cast<std::size_t>(m), static_cast<std::size_t>(n)};
}

StateSeries integrate(const DelayRhs& rhs, std::size_t dim, const InitialHistory& phi,
                      double tau, double h, double horizon) {
  const auto [m, steps] = grid_steps(tau, h, horizon);
  HistoryBuffer buf(dim, h, m, phi);

  Vector x(buf.node(m).begin(), buf.node(m).end());
  Vector k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim), mid(dim), dx(dim);

  rhs(0.0, x, buf.node(0), k1);
  if (!bounded(k1)) throw Diverged(0.0);
  buf.set_initial_derivative(k1);

  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * h;
    const std::size_t g = i;  // global index of the node at t - tau
    buf.midpoint(g, mid);
    // k1 is f(t_i, x_i, x(t_i - tau)), already stored for this node.
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
    rhs(t + 0.5 * h, tmp, mid, k2);
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
    rhs(t + 0.5 * h, tmp, mid, k3);
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = x[j] + h * k3[j];
    rhs(t + h, tmp, buf.node(g + 1), k4);
    for (std::size_t j = 0; j < dim; ++j)
      x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

    const double t_next = static_cast<double>(i + 1) * h;
    if (!bounded(x)) throw Diverged(t_next);
    rhs(t_next, x, buf.node(g + 1), dx);
    if (!bounded(dx)) throw Diverged(t_next);
    buf.push(x, dx);
    k1 = dx;
  }

  StateSeries out;
  out.dim = dim;
  out.h = h;
  out.delay_steps = m;
  out.times.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) out.times[i] = static_cast<double>(i) * h;
  const auto all = buf.all_states();
  out.history.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>((m + 1) * dim));
  out.states.assign(all.begin() + static_cast<std::ptrdiff_t>(m * dim), all.end());
  return out;
}

std::string_view mode_name(ScenarioMode m) noexcept {
  switch (m) {
    case ScenarioMode::OpenLoop:
      return "open_loop";
    case ScenarioMode::StateFeedback:
      return "state_feedback";
    case ScenarioMode::ObserverOnly:
      return "observer";
    case ScenarioMode::ObserverBased:
      return "observer_based";
    case ScenarioMode::OutputFeedback:
      return "output_feedback";
  }
  return "unknown";
}

ScenarioMode mode_from_name(std::string_view name) {
  for (ScenarioMode m : {ScenarioMode::OpenLoop, ScenarioMode::StateFeedback,
                         ScenarioMode::ObserverOnly, ScenarioMode::ObserverBased,
                         ScenarioMode::OutputFeedback})
    if (mode_name(m) == name) return m;
  throw ConfigError("unknown scenario mode '" + std::string(name) + "'");
}

bool has_observer(ScenarioMode m) noexcept {
  return m == ScenarioMode::ObserverOnly || m == ScenarioMode::ObserverBased ||
         m == ScenarioMode::OutputFeedback;
}

bool has_control(ScenarioMode m) noexcept { return m != ScenarioMode::OpenLoop; }

namespace {

Vector with_history(std::span<const double> hist, std::span<const double> series, std::size_t n) {
  // The last history row and the first series row are both t = 0.
  Vector out(hist.begin(), hist.end());
  out.insert(out.end(), series.begin() + static_cast<std::ptrdiff_t>(n), series.end());
  return out;
}

Vector scaled_rows(std::span<const double> rows, const Vector& scale) {
  const std::size_t n = scale.size();
  Vector out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = scale[i % n] * rows[i];
  return out;
}

}  // namespace

Vector Trajectory::eta_with_history() const {
  if (!has_observer()) return {};
  Vector scale(n);
  for (std::size_t i = 0; i < n; ++i) scale[i] = std::pow(theta, -static_cast<double>(i));
  Vector err(history_x.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = history_xhat[i] - history_x[i];
  return with_history(scaled_rows(err, scale), eta, n);
}

Vector Trajectory::chi_with_history() const {
  Vector scale(n);
  for (std::size_t i = 0; i < n; ++i) scale[i] = std::pow(theta, -static_cast<double>(i));
  return with_history(scaled_rows(history_x, scale), chi, n);
}

double Trajectory::initial_sup_norm() const {
  double sup = 0.0;
  for (std::size_t r = 0; r * n < history_x.size(); ++r)
    sup = std::max(sup, norm2(std::span<const double>(history_x.data() + r * n, n)));
  return sup;
}

Trajectory run_scenario(const SystemSpec& sys, const GainSet& gains, const Scenario& sc,
                        const InitialHistory& phi, const InitialHistory& phi_hat, double h,
                        double horizon) {
  const std::size_t n = sys.dim();
  if (gains.dim() != n)
    throw ConfigError("gain length " + std::to_string(gains.dim()) +
                      " does not match system dimension " + std::to_string(n));
  const bool observer = has_observer(sc.mode);
  const std::size_t dim = observer ? 2 * n : n;
  const Vector Ls = gains.L_scaled();
  const Vector Ks = gains.K_scaled();
  const Nonlinearity f = sys.f();
  const ScenarioMode mode = sc.mode;
  const auto external = sc.external_input;

  const auto control = [=](double t, std::span<const double> z) -> double {
    switch (mode) {
      case ScenarioMode::OpenLoop:
        return 0.0;
      case ScenarioMode::StateFeedback: {
        double u = 0.0;
        for (std::size_t i = 0; i < n; ++i) u += Ks[i] * z[i];
        return u;
      }
      case ScenarioMode::ObserverOnly:
        return external ? external(t) : 0.0;
      case ScenarioMode::ObserverBased:
      case ScenarioMode::OutputFeedback: {
        double u = 0.0;
        for (std::size_t i = 0; i < n; ++i) u += Ks[i] * z[n + i];
        return u;
      }
    }
    return 0.0;
  };

  // Companion structure: (A z)_i = z_{i+1}, (B u)_{n-1} = u, C z = z_0.
  const DelayRhs rhs = [=](double t, std::span<const double> z, std::span<const double> zd,
                           std::span<double> dz) {
    const double u = control(t, z);
    std::array<double, kMaxDim> fx{};
    const auto x = z.subspan(0, n);
    f(x, zd.subspan(0, n), u, std::span<double>(fx.data(), n));
    for (std::size_t i = 0; i + 1 < n; ++i) dz[i] = x[i + 1] + fx[i];
    dz[n - 1] = u + fx[n - 1];
    if (!observer) return;

    const auto xh = z.subspan(n, n);
    const double innovation = xh[0] - x[0];  // C xhat - y
    std::array<double, kMaxDim> fh{};
    if (mode != ScenarioMode::OutputFeedback)
      f(xh, zd.subspan(n, n), u, std::span<double>(fh.data(), n));
    for (std::size_t i = 0; i + 1 < n; ++i) dz[n + i] = xh[i + 1] + fh[i] + Ls[i] * innovation;
    dz[2 * n - 1] = u + fh[n - 1] + Ls[n - 1] * innovation;
  };

  InitialHistory stacked;
  if (observer) {
    stacked.value = [&phi, &phi_hat, n](double s, std::span<double> out) {
      phi.value(s, out.subspan(0, n));
      phi_hat.value(s, out.subspan(n, n));
    };
    stacked.derivative = [&phi, &phi_hat, n](double s, std::span<double> out) {
      phi.derivative(s, out.subspan(0, n));
      phi_hat.derivative(s, out.subspan(n, n));
    };
  } else {
    stacked = phi;
  }

  const StateSeries sol = integrate(rhs, dim, stacked, sys.tau(), h, horizon);

  Trajectory tr;
  tr.mode = sc.mode;
  tr.n = n;
  tr.h = h;
  tr.tau = sys.tau();
  tr.theta = gains.theta();
  tr.times = sol.times;
  const std::size_t rows = sol.size();
  const std::size_t hist_rows = sol.delay_steps + 1;
  Vector scale(n);
  for (std::size_t i = 0; i < n; ++i) scale[i] = std::pow(gains.theta(), -static_cast<double>(i));

  tr.x.resize(rows * n);
  tr.chi.resize(rows * n);
  tr.norm_x.resize(rows);
  tr.norm_err.assign(rows, 0.0);
  if (observer) {
    tr.xhat.resize(rows * n);
    tr.eta.resize(rows * n);
  }
  if (has_control(sc.mode)) tr.u.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto z = sol.state(r);
    double nx = 0.0, ne = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      tr.x[r * n + i] = z[i];
      tr.chi[r * n + i] = scale[i] * z[i];
      nx += z[i] * z[i];
      if (observer) {
        const double e = z[n + i] - z[i];
        tr.xhat[r * n + i] = z[n + i];
        tr.eta[r * n + i] = scale[i] * e;
        ne += e * e;
      }
    }
    tr.norm_x[r] = std::sqrt(nx);
    if (observer) tr.norm_err[r] = std::sqrt(ne);
    if (!tr.u.empty()) tr.u[r] = control(sol.times[r], z);
  }
  tr.history_x.resize(hist_rows * n);
  if (observer) tr.history_xhat.resize(hist_rows * n);
  for (std::size_t r = 0; r < hist_rows; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      tr.history_x[r * n + i] = sol.history[r * dim + i];
      if (observer) tr.history_xhat[r * n + i] = sol.history[r * dim + n + i];
    }
  return tr;
}

std::vector<Trajectory> run_scenarios_parallel(std::span<const ScenarioJob> jobs) {
  std::vector<std::future<Trajectory>> futures;
  futures.reserve(jobs.size());
  for (const ScenarioJob& job : jobs)
    futures.push_back(std::async(std::launch::async, [&job] {
      return run_scenario(*job.sys, *job.gains, job.scenario, job.phi, job.phi_hat, job.h,
                          job.horizon);
    }));
  std::vector<Trajectory> out(jobs.size());
  std::exception_ptr first;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    try {
      out[i] = futures[i].get();
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
  return out;
}

}  // namespace ratstab
