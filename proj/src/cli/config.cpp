#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ratstab/cli.hpp"
#include "ratstab/error.hpp"

namespace ratstab::cli {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::string_view where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
  const std::set<std::string_view> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key))
      throw ConfigError(fmt::format("unknown key '{}' in '{}'", key, where));
}

double number(const json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError(fmt::format("'{}' must be a number", name));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(fmt::format("'{}' must be finite", name));
  return d;
}

Vector number_list(const json& v, const std::string& name) {
  if (!v.is_array()) throw ConfigError(fmt::format("'{}' must be an array of numbers", name));
  Vector out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], fmt::format("{}[{}]", name, i)));
  return out;
}

std::vector<std::string> string_list(const json& v, const std::string& name) {
  if (!v.is_array()) throw ConfigError(fmt::format("'{}' must be an array of strings", name));
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError(fmt::format("'{}' must contain only strings", name));
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::pair<double, double> bounds(const json& v, const std::string& name) {
  const Vector b = number_list(v, name);
  if (b.size() != 2) throw ConfigError(fmt::format("'{}' must be [lo, hi]", name));
  if (!(b[0] < b[1])) throw ConfigError(fmt::format("'{}' is empty or inverted", name));
  return {b[0], b[1]};
}

void parse_system(const json& j, SystemSection& s) {
  reject_unknown(j, "system", {"n", "tau", "lipschitz_k", "f", "domain_box"});
  for (const char* req : {"n", "tau", "f"})
    if (!j.contains(req)) throw ConfigError(fmt::format("missing key 'system.{}'", req));
  if (!j["n"].is_number_integer() || j["n"].get<long long>() < 1 ||
      j["n"].get<long long>() > static_cast<long long>(kMaxDim))
    throw ConfigError(fmt::format("'system.n' must be an integer in [1, {}]", kMaxDim));
  s.n = j["n"].get<std::size_t>();
  s.tau = number(j["tau"], "system.tau");
  if (j.contains("lipschitz_k")) s.lipschitz_k = number(j["lipschitz_k"], "system.lipschitz_k");
  const json& f = j["f"];
  if (f.is_string()) {
    s.f_registry = f.get<std::string>();
  } else {
    s.f_expressions = string_list(f, "system.f");
  }
  if (j.contains("domain_box")) {
    const json& b = j["domain_box"];
    reject_unknown(b, "system.domain_box", {"x", "u"});
    DomainBox box;
    if (!b.contains("x")) throw ConfigError("missing key 'system.domain_box.x'");
    if (!b["x"].is_array()) throw ConfigError("'system.domain_box.x' must be an array");
    for (std::size_t i = 0; i < b["x"].size(); ++i)
      box.x.push_back(bounds(b["x"][i], fmt::format("system.domain_box.x[{}]", i)));
    if (b.contains("u")) box.u = bounds(b["u"], "system.domain_box.u");
    s.box = std::move(box);
  }
}

void parse_gains(const json& j, GainsSection& g) {
  reject_unknown(j, "gains", {"L", "K", "theta"});
  for (const char* req : {"L", "K"})
    if (!j.contains(req)) throw ConfigError(fmt::format("missing key 'gains.{}'", req));
  g.L = number_list(j["L"], "gains.L");
  g.K = number_list(j["K"], "gains.K");
  if (j.contains("theta")) g.theta = number(j["theta"], "gains.theta");
}

void parse_sim(const json& j, SimSection& s) {
  reject_unknown(j, "sim", {"h", "T", "x0", "xhat0", "history", "input", "seed"});
  if (j.contains("h")) s.h = number(j["h"], "sim.h");
  if (j.contains("T")) s.T = number(j["T"], "sim.T");
  if (j.contains("x0")) s.x0 = number_list(j["x0"], "sim.x0");
  if (j.contains("xhat0")) s.xhat0 = number_list(j["xhat0"], "sim.xhat0");
  if (j.contains("history")) {
    const json& h = j["history"];
    if (h.is_string()) {
      if (h.get<std::string>() != "constant")
        throw ConfigError("'sim.history' must be \"constant\" or an object of expressions");
    } else {
      reject_unknown(h, "sim.history", {"x", "xhat"});
      if (h.contains("x")) s.history_x = string_list(h["x"], "sim.history.x");
      if (h.contains("xhat")) s.history_xhat = string_list(h["xhat"], "sim.history.xhat");
    }
  }
  if (j.contains("input")) {
    if (!j["input"].is_string()) throw ConfigError("'sim.input' must be an expression string");
    s.input = j["input"].get<std::string>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("'sim.seed' must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  reject_unknown(root, "<root>", {"system", "gains", "sim", "scenario", "output"});
  for (const char* req : {"system", "gains"})
    if (!root.contains(req)) throw ConfigError(fmt::format("missing section '{}'", req));

  RunConfig cfg;
  parse_system(root["system"], cfg.system);
  parse_gains(root["gains"], cfg.gains);
  if (root.contains("sim")) parse_sim(root["sim"], cfg.sim);
  if (root.contains("scenario")) {
    const json& sc = root["scenario"];
    reject_unknown(sc, "scenario", {"mode"});
    if (sc.contains("mode")) {
      if (!sc["mode"].is_string()) throw ConfigError("'scenario.mode' must be a string");
      cfg.mode = mode_from_name(sc["mode"].get<std::string>());
    }
  }
  if (root.contains("output")) {
    const json& o = root["output"];
    reject_unknown(o, "output", {"directory", "emit_plots"});
    if (o.contains("directory")) {
      if (!o["directory"].is_string()) throw ConfigError("'output.directory' must be a string");
      cfg.output.directory = o["directory"].get<std::string>();
    }
    if (o.contains("emit_plots")) {
      if (!o["emit_plots"].is_boolean()) throw ConfigError("'output.emit_plots' must be a boolean");
      cfg.output.emit_plots = o["emit_plots"].get<bool>();
    }
  }
  if (cfg.sim.x0.empty()) cfg.sim.x0.assign(cfg.system.n, 0.0);
  if (cfg.sim.xhat0.empty()) cfg.sim.xhat0.assign(cfg.system.n, 0.0);
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const RunConfig& cfg) {
  const std::size_t n = cfg.system.n;
  const auto check_len = [n](std::size_t len, std::string_view name) {
    if (len != n) throw ConfigError(fmt::format("'{}' has length {}, expected n = {}", name, len, n));
  };
  if (!(cfg.system.tau > 0.0)) throw ConfigError("'system.tau' must be positive");
  if (!(cfg.system.lipschitz_k >= 0.0)) throw ConfigError("'system.lipschitz_k' must be >= 0");
  if (!cfg.system.f_expressions.empty()) check_len(cfg.system.f_expressions.size(), "system.f");
  if (cfg.system.box) check_len(cfg.system.box->x.size(), "system.domain_box.x");
  check_len(cfg.gains.L.size(), "gains.L");
  check_len(cfg.gains.K.size(), "gains.K");
  if (cfg.gains.theta && !(*cfg.gains.theta > 0.0))
    throw ConfigError("'gains.theta' must be positive");
  check_len(cfg.sim.x0.size(), "sim.x0");
  check_len(cfg.sim.xhat0.size(), "sim.xhat0");
  if (!cfg.sim.history_x.empty()) check_len(cfg.sim.history_x.size(), "sim.history.x");
  if (!cfg.sim.history_xhat.empty()) check_len(cfg.sim.history_xhat.size(), "sim.history.xhat");
  if (!(cfg.sim.h > 0.0)) throw ConfigError("'sim.h' must be positive");
  if (!(cfg.sim.T > 0.0)) throw ConfigError("'sim.T' must be positive");
  grid_steps(cfg.system.tau, cfg.sim.h, cfg.sim.T);
}

RunConfig paper_config() {
  RunConfig cfg;
  cfg.system.n = 2;
  cfg.system.tau = 1.0;
  cfg.system.lipschitz_k = 0.5;
  cfg.system.f_registry = "paper_example";
  cfg.system.box = DomainBox::symmetric(2, 30.0);
  cfg.gains.L = {-14.0, -28.0};
  cfg.gains.K = {-30.0, -30.0};
  cfg.gains.theta = 8.0;
  cfg.sim.h = 0.001;
  cfg.sim.T = 10.0;
  cfg.sim.x0 = {-20.0, -10.0};
  cfg.sim.xhat0 = {10.0, 10.0};
  cfg.mode = ScenarioMode::ObserverBased;
  cfg.output.directory = "repro_out";
  return cfg;
}

SystemSpec build_system(const RunConfig& cfg) {
  const SystemSection& s = cfg.system;
  Nonlinearity f = s.f_expressions.empty() ? make_nonlinearity(s.f_registry, s.n)
                                           : make_nonlinearity(s.f_expressions);
  return SystemSpec(s.n, s.tau, std::move(f), s.lipschitz_k, s.box.value_or(DomainBox{}));
}

GainSet build_gains(const RunConfig& cfg) {
  if (!cfg.gains.theta) throw ConfigError("missing key 'gains.theta'");
  return GainSet(cfg.gains.L, cfg.gains.K, *cfg.gains.theta);
}

}  // namespace ratstab::cli
