#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ratstab/certify.hpp"
#include "ratstab/ddesim.hpp"
#include "ratstab/sysmodel.hpp"

namespace ratstab::cli {

struct SystemSection {
  std::size_t n = 0;
  double tau = 0.0;
  double lipschitz_k = 0.0;
  std::string f_registry;              // used when f_expressions is empty
  std::vector<std::string> f_expressions;
  std::optional<DomainBox> box;
};

struct GainsSection {
  Vector L;
  Vector K;
  std::optional<double> theta;
};

struct SimSection {
  double h = 0.001;
  double T = 10.0;
  Vector x0;
  Vector xhat0;
  // Expressions in t on [-tau, 0]; empty means constant histories x0 / xhat0.
  std::vector<std::string> history_x;
  std::vector<std::string> history_xhat;
  std::optional<std::string> input;  // u(t) for the observer-only mode
  std::uint64_t seed = 0;
};

struct OutputSection {
  std::string directory = "ratstab_out";
  bool emit_plots = true;
};

struct RunConfig {
  SystemSection system;
  GainsSection gains;
  SimSection sim;
  ScenarioMode mode = ScenarioMode::ObserverBased;
  OutputSection output;
};

/// Strict JSON schema: unknown keys, wrong types, non-finite numbers and
/// length mismatches raise ConfigError naming the key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Re-checks cross-field constraints (tau = m h, T = N h, theta > 0).
void validate(const RunConfig& cfg);

/// Built-in two-dimensional network example with k = 0.5 over |x1| <= 30.
RunConfig paper_config();

SystemSpec build_system(const RunConfig& cfg);
/// Throws ConfigError when theta is absent.
GainSet build_gains(const RunConfig& cfg);

/// Margins that must pass for a mode to be certified ("a", "b", "c", "d", "of").
std::vector<std::string> required_margins(ScenarioMode mode);

struct Certification {
  LyapunovCertificate observer;  // P for A + LC
  LyapunovCertificate feedback;  // S for A + BK
  ConditionReport report;
  std::optional<AlphaChoice> alpha_observer_based;
  std::optional<AlphaChoice> alpha_output_feedback;
  std::vector<std::string> required;
  bool pass = false;
};

Certification certify(const SystemSpec& sys, const GainSet& gains, ScenarioMode mode);

/// Printed Lyapunov solutions of the reference example against the solver.
struct PrintedMatrixCheck {
  Matrix printed;
  double printed_norm = 0.0;        // norm stated in the text
  Matrix solved;
  double solved_norm = 0.0;
  double residual_standard = 0.0;   // |A^T X + X A + I|_F with X printed
  double residual_transposed = 0.0; // |A X + X A^T + I|_F with X printed
  bool norm_matches = false;        // |solved_norm - printed_norm| <= 1e-3
};

struct PaperComparison {
  PrintedMatrixCheck p;
  PrintedMatrixCheck s;
};

PaperComparison compare_with_printed();

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns 0 pass/complete, 1 condition failure or divergence,
/// 2 input error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ratstab::cli
