#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "ratstab/analyze.hpp"
#include "ratstab/cli.hpp"
#include "ratstab/error.hpp"
#include "ratstab/expr.hpp"

namespace ratstab::cli {
namespace {

using nlohmann::json;

// Lyapunov solutions as printed for the reference example.
const Matrix kPrintedP{{0.0377, 0.0278}, {0.0278, 1.0675}};
const Matrix kPrintedS{{0.5172, -0.5000}, {-0.5000, 0.5167}};
constexpr double kPrintedNormP = 1.0682;
constexpr double kPrintedNormS = 1.0169;

struct Overrides {
  std::string config;
  std::string out;
  std::optional<double> step, horizon, theta;
  std::optional<std::uint64_t> seed;
  double theta_max = 100.0;
  double tol = 1e-4;
  std::string input;
  std::string column = "norm_x";
  double trim = 0.0;
};

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string fmt_matrix(const Matrix& m) {
  std::string s = "[";
  for (std::size_t i = 0; i < m.dim(); ++i) {
    s += i ? ", [" : "[";
    for (std::size_t j = 0; j < m.dim(); ++j) s += fmt::format("{}{:.6f}", j ? ", " : "", m(i, j));
    s += "]";
  }
  return s + "]";
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

double lyapunov_residual(const Matrix& a, const Matrix& x, bool transposed) {
  const Matrix lhs = transposed ? a * x + x * a.transpose() : a.transpose() * x + x * a;
  return (lhs + Matrix::identity(a.dim())).frobenius();
}

RunConfig load_with_overrides(const Overrides& o) {
  RunConfig cfg = load_config(o.config);
  if (o.step) cfg.sim.h = *o.step;
  if (o.horizon) cfg.sim.T = *o.horizon;
  if (o.theta) cfg.gains.theta = *o.theta;
  if (o.seed) cfg.sim.seed = *o.seed;
  if (!o.out.empty()) cfg.output.directory = o.out;
  validate(cfg);
  return cfg;
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory", dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing", path.string());
  f << text;
  if (!f) throw IoError("write failed", path.string());
}

InitialHistory history_from(const std::vector<std::string>& exprs, const Vector& constant) {
  if (exprs.empty()) return InitialHistory::constant(constant);
  std::vector<expr::Program> progs;
  for (const std::string& text : exprs) {
    const expr::Expr e = expr::parse(text);
    progs.push_back(expr::Program::compile(e, [](std::string_view name) -> std::optional<std::size_t> {
      if (name == "t") return 0;
      return std::nullopt;
    }));
  }
  return InitialHistory::from_function([progs](double s, std::span<double> out) {
    const double slot[1] = {s};
    for (std::size_t i = 0; i < progs.size(); ++i) out[i] = progs[i].run(slot);
  });
}

Scenario scenario_from(const RunConfig& cfg) {
  Scenario sc;
  sc.mode = cfg.mode;
  if (cfg.sim.input) {
    const expr::Expr e = expr::parse(*cfg.sim.input);
    const auto prog = expr::Program::compile(e, [](std::string_view name) -> std::optional<std::size_t> {
      if (name == "t") return 0;
      return std::nullopt;
    });
    sc.external_input = [prog](double t) {
      const double slot[1] = {t};
      return prog.run(slot);
    };
  }
  return sc;
}

void print_certification(std::ostream& out, const Certification& c, ScenarioMode mode) {
  const ConditionReport& r = c.report;
  out << fmt::format("mode            {}\n", mode_name(mode));
  out << fmt::format("theta           {:.6g}\ntau             {:.6g}\nk               {:.6g}\n", r.theta,
                     r.tau, r.k);
  out << fmt::format("P (observer)    {}  |P| = {:.6f}  residual {:.2e}\n",
                     fmt_matrix(c.observer.solution), r.norm_p, c.observer.residual);
  out << fmt::format("S (feedback)    {}  |S| = {:.6f}  residual {:.2e}\n",
                     fmt_matrix(c.feedback.solution), r.norm_s, c.feedback.residual);
  const auto line = [&](std::string_view name, double v, bool ok) {
    const bool req = std::find(c.required.begin(), c.required.end(), name) != c.required.end();
    out << fmt::format("margin {:<8} {:>14.8f}  {:<4} {}\n", name, v, ok ? "ok" : "FAIL",
                       req ? "required" : "");
  };
  line("a", r.a, r.a_ok);
  line("b", r.b, r.b_ok);
  line("c", r.c, r.c_ok);
  line("d", r.d, r.d_ok);
  line("of", r.of_margin, r.of_ok);
  if (c.alpha_observer_based)
    out << fmt::format("alpha (observer-based)   > {:.6g}, chosen {:.6g}\n",
                       c.alpha_observer_based->threshold, c.alpha_observer_based->alpha);
  if (c.alpha_output_feedback) {
    if (c.alpha_output_feedback->unconstrained)
      out << "alpha (output feedback)  unconstrained (k = 0)\n";
    else
      out << fmt::format("alpha (output feedback)  < {:.6g}, chosen {:.6g}\n",
                         c.alpha_output_feedback->threshold, c.alpha_output_feedback->alpha);
  }
  out << fmt::format("result          {}\n", c.pass ? "PASS" : "FAIL");
}

json certification_json(const Certification& c, ScenarioMode mode) {
  const ConditionReport& r = c.report;
  json j;
  j["mode"] = std::string(mode_name(mode));
  j["theta"] = r.theta;
  j["tau"] = r.tau;
  j["lipschitz_k"] = r.k;
  j["P"] = {{"matrix", matrix_json(c.observer.solution)},
            {"norm", r.norm_p},
            {"residual", c.observer.residual}};
  j["S"] = {{"matrix", matrix_json(c.feedback.solution)},
            {"norm", r.norm_s},
            {"residual", c.feedback.residual}};
  j["margins"] = {{"a", r.a}, {"b", r.b}, {"c", r.c}, {"d", r.d}, {"of", r.of_margin}};
  j["ok"] = {{"a", r.a_ok}, {"b", r.b_ok}, {"c", r.c_ok}, {"d", r.d_ok}, {"of", r.of_ok}};
  j["required"] = c.required;
  if (c.alpha_observer_based)
    j["alpha_observer_based"] = {{"threshold", c.alpha_observer_based->threshold},
                                 {"alpha", c.alpha_observer_based->alpha}};
  if (c.alpha_output_feedback) {
    if (c.alpha_output_feedback->unconstrained)
      j["alpha_output_feedback"] = {{"unconstrained", true}};
    else
      j["alpha_output_feedback"] = {{"threshold", c.alpha_output_feedback->threshold},
                                    {"alpha", c.alpha_output_feedback->alpha}};
  }
  j["pass"] = c.pass;
  return j;
}

struct SimulationOutcome {
  Trajectory traj;
  std::filesystem::path csv;
  std::optional<std::filesystem::path> svg;
};

SimulationOutcome simulate_and_write(const RunConfig& cfg, std::ostream& out) {
  const SystemSpec sys = build_system(cfg);
  const GainSet gains = build_gains(cfg);
  const InitialHistory phi = history_from(cfg.sim.history_x, cfg.sim.x0);
  const InitialHistory phi_hat = history_from(cfg.sim.history_xhat, cfg.sim.xhat0);
  SimulationOutcome res{run_scenario(sys, gains, scenario_from(cfg), phi, phi_hat, cfg.sim.h, cfg.sim.T),
                        {}, std::nullopt};
  const Trajectory& tr = res.traj;
  const auto dir = ensure_dir(cfg.output.directory);
  res.csv = dir / "trajectory.csv";
  emit_csv(tr, res.csv);
  if (cfg.output.emit_plots) {
    std::vector<PlotSeries> series{{"|x|", tr.times, tr.norm_x}};
    if (tr.has_observer()) series.push_back({"|xhat - x|", tr.times, tr.norm_err});
    PlotOptions opts;
    opts.title = fmt::format("{} (theta = {:g}, tau = {:g})", mode_name(tr.mode), tr.theta, tr.tau);
    opts.log_y = true;
    try {
      res.svg = dir / "trajectory.svg";
      emit_plot(series, *res.svg, opts);
    } catch (const ContractViolation&) {
      // identically zero norms have nothing to draw on a log axis
      opts.log_y = false;
      emit_plot(series, *res.svg, opts);
    }
  }

  const std::size_t last = tr.size() - 1;
  out << fmt::format("steps           {}\n", last);
  out << fmt::format("|x(0)|          {:.6e}\n|x(T)|          {:.6e}\n", tr.norm_x.front(),
                     tr.norm_x[last]);
  if (tr.has_observer())
    out << fmt::format("|e(0)|          {:.6e}\n|e(T)|          {:.6e}\n", tr.norm_err.front(),
                       tr.norm_err[last]);
  Vector ft, fy;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (tr.times[i] >= tr.tau && tr.norm_x[i] > 0.0) {
      ft.push_back(tr.times[i]);
      fy.push_back(tr.norm_x[i]);
    }
  if (fy.size() >= 10) {
    const DecayFit fit = fit_envelope(ft, fy);
    out << fmt::format("fit |x| t>=tau  exp rate {:.4g} (r2 {:.4f}), rational exponent {:.4g} (r2 {:.4f}), "
                       "preferred {}\n",
                       fit.exp_rate, fit.exp_r_squared, fit.rational_exponent, fit.rational_r_squared,
                       fit.preferred == EnvelopeModel::Rational ? "rational" : "exponential");
  } else {
    out << "fit |x| t>=tau  skipped (fewer than 10 positive samples)\n";
  }
  out << fmt::format("csv             {}\n", res.csv.string());
  if (res.svg) out << fmt::format("svg             {}\n", res.svg->string());
  return res;
}

int cmd_certify(const Overrides& o, std::ostream& out) {
  const RunConfig cfg = load_with_overrides(o);
  const SystemSpec sys = build_system(cfg);
  const GainSet gains = build_gains(cfg);
  const Certification c = certify(sys, gains, cfg.mode);
  print_certification(out, c, cfg.mode);
  const auto path = ensure_dir(cfg.output.directory) / "certificate.json";
  write_text(path, certification_json(c, cfg.mode).dump(2) + "\n");
  out << fmt::format("certificate     {}\n", path.string());
  return c.pass ? 0 : 1;
}

int cmd_synthesize(const Overrides& o, std::ostream& out) {
  const RunConfig cfg = load_with_overrides(o);
  const SystemSpec sys = build_system(cfg);
  // Norms depend only on the unscaled gains, so theta is not needed here.
  const GainSet gains(cfg.gains.L, cfg.gains.K, 1.0);
  const LyapunovCertificate p = solve_lyapunov(gains.A_L());
  const LyapunovCertificate s = solve_lyapunov(gains.A_K());
  out << fmt::format("|P| = {:.8f}  |S| = {:.8f}  tau = {:g}  k = {:g}\n", p.spectral_norm,
                     s.spectral_norm, sys.tau(), sys.lipschitz_k());
  const double theta =
      find_theta_min(sys.tau(), p.spectral_norm, s.spectral_norm, sys.lipschitz_k(), o.theta_max, o.tol);
  const ConditionReport r =
      evaluate_conditions(theta, sys.tau(), p.spectral_norm, s.spectral_norm, sys.lipschitz_k());
  out << fmt::format("theta* = {:.6f}\n", theta);
  out << fmt::format("a = {:.8f}  b = {:.8f}  c = {:.8f}  d = {:.8f}\n", r.a, r.b, r.c, r.d);
  return 0;
}

int cmd_simulate(const Overrides& o, std::ostream& out) {
  const RunConfig cfg = load_with_overrides(o);
  out << fmt::format("mode            {}\n", mode_name(cfg.mode));
  simulate_and_write(cfg, out);
  return 0;
}

int cmd_fit(const Overrides& o, std::ostream& out) {
  if (o.input.empty()) throw ConfigError("fit needs --input CSV");
  const Table t = read_csv(o.input);
  const Vector times = t.column_values("t");
  const Vector ys = t.column_values(o.column);
  Vector ft, fy;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] >= o.trim && ys[i] > 0.0) {
      ft.push_back(times[i]);
      fy.push_back(ys[i]);
    }
  const DecayFit fit = fit_envelope(ft, fy);
  out << fmt::format("column              {}\nsamples             {}\n", o.column, fy.size());
  out << fmt::format("exp rate            {:.6g}  r2 {:.6f}\n", fit.exp_rate, fit.exp_r_squared);
  out << fmt::format("rational exponent   {:.6g}  r2 {:.6f}\n", fit.rational_exponent,
                     fit.rational_r_squared);
  out << fmt::format("preferred           {}\n",
                     fit.preferred == EnvelopeModel::Rational ? "rational" : "exponential");
  return 0;
}

void print_matrix_check(std::ostream& out, std::string_view name, const PrintedMatrixCheck& c,
                        std::string_view gain) {
  out << fmt::format("{} for A + {}:\n", name, gain);
  out << fmt::format("  printed   {}  |{}| = {:.4f} (stated)\n", fmt_matrix(c.printed), name,
                     c.printed_norm);
  out << fmt::format("  solver    {}  |{}| = {:.6f}\n", fmt_matrix(c.solved), name, c.solved_norm);
  out << fmt::format("  printed matrix residual: A^T X + X A + I -> {:.4g},  A X + X A^T + I -> {:.4g}\n",
                     c.residual_standard, c.residual_transposed);
  if (c.norm_matches) {
    out << fmt::format("  norm      MATCH (|difference| = {:.2e})\n",
                       std::fabs(c.solved_norm - c.printed_norm));
  } else {
    out << fmt::format("  norm      DISCREPANCY: solver {:.6f} vs stated {:.4f} (difference {:.4f})\n",
                       c.solved_norm, c.printed_norm, c.solved_norm - c.printed_norm);
  }
  if (c.residual_transposed < 1e-2 && c.residual_standard > 1.0)
    out << "  note      printed matrix solves the transposed equation A X + X A^T = -I (to 4 printed digits)\n";
  else if (c.residual_transposed > 1e-2 && c.residual_standard > 1e-2)
    out << "  note      printed matrix solves neither A^T X + X A = -I nor A X + X A^T = -I\n";
}

int cmd_repro(const Overrides& o, std::ostream& out) {
  RunConfig cfg = paper_config();
  if (o.step) cfg.sim.h = *o.step;
  if (o.horizon) cfg.sim.T = *o.horizon;
  if (!o.out.empty()) cfg.output.directory = o.out;
  validate(cfg);
  const auto started = std::chrono::steady_clock::now();

  out << "== reference example: n = 2, tau = 1, theta = 8, L = [-14, -28], K = [-30, -30] ==\n\n";
  out << "-- Lyapunov solutions: printed vs solver --\n";
  const PaperComparison cmp = compare_with_printed();
  print_matrix_check(out, "P", cmp.p, "LC");
  print_matrix_check(out, "S", cmp.s, "BK");
  out << fmt::format("summary: |S| {}, |P| {}\n\n", cmp.s.norm_matches ? "reproduced" : "DISCREPANCY",
                     cmp.p.norm_matches ? "reproduced" : "DISCREPANCY (documented; solver value used)");

  const SystemSpec sys = build_system(cfg);
  const GainSet gains = build_gains(cfg);
  out << "-- certification (solver norms, k = 0.5 on |x1| <= 30) --\n";
  const Certification c = certify(sys, gains, cfg.mode);
  print_certification(out, c, cfg.mode);
  const ConditionReport printed =
      evaluate_conditions(8.0, 1.0, kPrintedNormP, kPrintedNormS, cfg.system.lipschitz_k);
  out << fmt::format("margins with stated norms: a = {:.5f}  b = {:.5f}  c = {:.5f}  d = {:.5f}\n",
                     printed.a, printed.b, printed.c, printed.d);
  const double k_est = estimate_lipschitz(sys.f(), sys.box(), 20000, cfg.sim.seed);
  out << fmt::format(
      "advisory Lipschitz estimate over the box: {:.4f} (certification uses k = {:g}; the margin "
      "test is region-dependent and does not hold for the sampled constant)\n\n",
      k_est, cfg.system.lipschitz_k);

  const auto dir = ensure_dir(cfg.output.directory);
  write_text(dir / "certificate.json", certification_json(c, cfg.mode).dump(2) + "\n");
  out << "-- simulation (observer-based, constant initial histories) --\n";
  const SimulationOutcome sim = simulate_and_write(cfg, out);
  const Trajectory& tr = sim.traj;
  const std::size_t last = tr.size() - 1;
  const bool x_conv = tr.norm_x[last] <= 1e-2 * tr.norm_x.front();
  const bool e_conv = tr.norm_err[last] <= 1e-2 * tr.norm_err.front();
  out << fmt::format("convergence     |x(T)|/|x(0)| = {:.3e} ({}), |e(T)|/|e(0)| = {:.3e} ({})\n",
                     tr.norm_x[last] / tr.norm_x.front(), x_conv ? "ok" : "FAIL",
                     tr.norm_err[last] / tr.norm_err.front(), e_conv ? "ok" : "FAIL");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  out << fmt::format("elapsed         {:.3f} s\n", secs);
  return 0;
}

}  // namespace

std::vector<std::string> required_margins(ScenarioMode mode) {
  switch (mode) {
    case ScenarioMode::ObserverOnly:
      return {"a", "b"};
    case ScenarioMode::StateFeedback:
      return {"c", "d"};
    case ScenarioMode::OutputFeedback:
      return {"c", "d", "of"};
    case ScenarioMode::ObserverBased:
    case ScenarioMode::OpenLoop:
      break;
  }
  return {"a", "b", "c", "d"};
}

Certification certify(const SystemSpec& sys, const GainSet& gains, ScenarioMode mode) {
  Certification c{solve_lyapunov(gains.A_L()), solve_lyapunov(gains.A_K()), {}, {}, {}, {}, false};
  c.report = evaluate_conditions(gains.theta(), sys.tau(), c.observer.spectral_norm,
                                 c.feedback.spectral_norm, sys.lipschitz_k());
  const ConditionReport& r = c.report;
  if (r.a_ok && r.c_ok)
    c.alpha_observer_based = select_alpha_observer_based(r.theta, r.a, r.c, r.norm_s,
                                                         norm2(gains.K()), 0.1);
  if (r.k == 0.0 || (r.c_ok && r.d_ok))
    c.alpha_output_feedback = select_alpha_output_feedback(r.c, r.d, r.k, r.norm_p, 0.1);
  c.required = required_margins(mode);
  c.pass = true;
  for (const std::string& m : c.required) {
    const bool ok = m == "a" ? r.a_ok : m == "b" ? r.b_ok : m == "c" ? r.c_ok : m == "d" ? r.d_ok : r.of_ok;
    c.pass = c.pass && ok;
  }
  return c;
}

PaperComparison compare_with_printed() {
  const RunConfig cfg = paper_config();
  const GainSet gains(cfg.gains.L, cfg.gains.K, *cfg.gains.theta);
  const auto check = [](const Matrix& a, const Matrix& printed, double stated) {
    const LyapunovCertificate sol = solve_lyapunov(a);
    PrintedMatrixCheck c;
    c.printed = printed;
    c.printed_norm = stated;
    c.solved = sol.solution;
    c.solved_norm = sol.spectral_norm;
    c.residual_standard = lyapunov_residual(a, printed, false);
    c.residual_transposed = lyapunov_residual(a, printed, true);
    c.norm_matches = std::fabs(sol.spectral_norm - stated) <= 1e-3;
    return c;
  };
  return {check(gains.A_L(), kPrintedP, kPrintedNormP), check(gains.A_K(), kPrintedS, kPrintedNormS)};
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rational stability toolkit for triangular nonlinear time-delay systems", "ratstab"};
  app.require_subcommand(1);
  Overrides o;

  const auto add_common = [&o](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", o.config, "JSON run configuration");
    if (needs_config) cfg->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--step", o.step, "integration step h");
    sub->add_option("--horizon", o.horizon, "simulation horizon T");
    sub->add_option("--theta", o.theta, "override gains.theta");
    sub->add_option("--theta-max", o.theta_max, "upper end of the theta search");
    sub->add_option("--tol", o.tol, "bisection tolerance for theta");
    sub->add_option("--seed", o.seed, "seed for randomized sampling");
  };
  auto* certify_cmd = app.add_subcommand("certify", "check margins and write certificate.json");
  auto* synth_cmd = app.add_subcommand("synthesize", "smallest theta satisfying all margins");
  auto* sim_cmd = app.add_subcommand("simulate", "run the configured closed loop");
  auto* fit_cmd = app.add_subcommand("fit", "fit exponential and rational envelopes to a CSV column");
  auto* repro_cmd = app.add_subcommand("repro-paper", "certify and simulate the built-in reference example");
  add_common(certify_cmd, true);
  add_common(synth_cmd, true);
  add_common(sim_cmd, true);
  add_common(repro_cmd, false);
  fit_cmd->add_option("--input", o.input, "trajectory CSV")->required();
  fit_cmd->add_option("--column", o.column, "column to fit (default norm_x)");
  fit_cmd->add_option("--trim", o.trim, "drop samples with t below this value");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (certify_cmd->parsed()) return cmd_certify(o, out);
    if (synth_cmd->parsed()) return cmd_synthesize(o, out);
    if (sim_cmd->parsed()) return cmd_simulate(o, out);
    if (fit_cmd->parsed()) return cmd_fit(o, out);
    if (repro_cmd->parsed()) return cmd_repro(o, out);
  } catch (const Diverged& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NoFeasibleTheta& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConditionsNotSatisfied& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace ratstab::cli
