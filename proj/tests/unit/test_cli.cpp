#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ratstab/analyze.hpp"
#include "ratstab/cli.hpp"
#include "ratstab/error.hpp"

using namespace ratstab;
using namespace ratstab::cli;
using nlohmann::json;

namespace {

const std::filesystem::path kRoot = std::filesystem::temp_directory_path() / "ratstab_test_cli";

json paper_json() {
  std::ifstream in(std::filesystem::path(RATSTAB_CONFIG_DIR) / "paper_example.json");
  return json::parse(in);
}

std::string write_config(const std::string& name, const json& j) {
  std::filesystem::create_directories(kRoot);
  const auto p = kRoot / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p.string();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string out_dir(const std::string& name) { return (kRoot / name).string(); }

}  // namespace

TEST_CASE("certify exit codes", "[cli]") {
  const json base = paper_json();
  const Run ok = run({"certify", "--config", write_config("cert_ok", base), "--out", out_dir("cert_ok")});
  INFO(ok.out << ok.err);
  CHECK(ok.code == 0);
  CHECK(ok.out.find("result          PASS") != std::string::npos);
  std::ifstream cert(kRoot / "cert_ok" / "certificate.json");
  const json c = json::parse(cert);
  CHECK(c["pass"] == true);
  CHECK(c["margins"]["a"].get<double>() > 0);

  json k2 = base;
  k2["system"]["lipschitz_k"] = 2.0;
  const Run fail = run({"certify", "--config", write_config("cert_k2", k2), "--out", out_dir("cert_k2")});
  CHECK(fail.code == 1);
  CHECK(fail.out.find("margin a") != std::string::npos);

  json nilpotent = base;
  nilpotent["gains"]["K"] = {0, 0};
  const Run bad = run({"certify", "--config", write_config("cert_k00", nilpotent), "--out", out_dir("x")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("Hurwitz") != std::string::npos);
}

TEST_CASE("synthesize exit codes", "[cli]") {
  json j = paper_json();
  j["system"]["lipschitz_k"] = 0.0;
  Run r = run({"synthesize", "--config", write_config("syn0", j)});
  CHECK(r.code == 0);
  CHECK(r.out.find("theta* = 1.000000") != std::string::npos);

  j["system"]["lipschitz_k"] = 0.5;
  r = run({"synthesize", "--config", write_config("syn05", j), "--tol", "1e-6"});
  CHECK(r.code == 0);
  CHECK(r.out.find("theta* = 6.2") != std::string::npos);

  j["system"]["lipschitz_k"] = 5.0;
  r = run({"synthesize", "--config", write_config("syn5", j), "--theta-max", "100"});
  CHECK(r.code == 1);
}

TEST_CASE("simulate exit codes and artifacts", "[cli]") {
  json j = paper_json();
  const Run ok = run({"simulate", "--config", write_config("sim", j), "--out", out_dir("sim")});
  INFO(ok.err);
  REQUIRE(ok.code == 0);
  CHECK(std::filesystem::exists(kRoot / "sim" / "trajectory.csv"));
  CHECK(std::filesystem::exists(kRoot / "sim" / "trajectory.svg"));
  const Table t = read_csv(kRoot / "sim" / "trajectory.csv");
  CHECK(t.rows.size() == 10001);
  CHECK(t.column_values("norm_x").back() <= 1e-2 * t.column_values("norm_x").front());

  json zero = j;
  zero["sim"]["x0"] = {0, 0};
  zero["sim"]["xhat0"] = {0, 0};
  zero["sim"]["T"] = 2;
  const Run z = run({"simulate", "--config", write_config("sim_zero", zero), "--out", out_dir("sim_zero")});
  REQUIRE(z.code == 0);
  const Table tz = read_csv(kRoot / "sim_zero" / "trajectory.csv");
  for (const auto& row : tz.rows)
    for (std::size_t c = 1; c < row.size(); ++c) REQUIRE(row[c] == 0.0);

  json theta0 = j;
  theta0["gains"]["theta"] = 0;
  CHECK(run({"simulate", "--config", write_config("theta0", theta0), "--out", out_dir("t0")}).code == 2);
  CHECK(run({"simulate", "--config", write_config("sim", j), "--theta", "0"}).code == 2);
  CHECK(run({"simulate", "--config", write_config("sim", j), "--step", "0.3"}).code == 2);

  json blowup;
  blowup["system"] = {{"n", 2}, {"tau", 0.5}, {"f", {"x1*x1", "0"}}};
  blowup["gains"] = {{"L", {-14, -28}}, {"K", {-30, -30}}, {"theta", 2}};
  blowup["sim"] = {{"h", 0.01}, {"T", 5}, {"x0", {1, 0}}};
  blowup["scenario"] = {{"mode", "open_loop"}};
  const Run d = run({"simulate", "--config", write_config("blowup", blowup), "--out", out_dir("blowup")});
  CHECK(d.code == 1);
  CHECK(d.err.find("diverged") != std::string::npos);
}

TEST_CASE("strict schema echoes the offending key", "[cli]") {
  json j = paper_json();
  j["gains"]["thetta"] = 8;
  const Run r = run({"certify", "--config", write_config("typo", j)});
  CHECK(r.code == 2);
  CHECK(r.err.find("thetta") != std::string::npos);

  json top = paper_json();
  top["extra"] = 1;
  CHECK(run({"certify", "--config", write_config("top", top)}).code == 2);

  json len = paper_json();
  len["sim"]["x0"] = {1, 2, 3};
  const Run l = run({"simulate", "--config", write_config("len", len)});
  CHECK(l.code == 2);
  CHECK(l.err.find("sim.x0") != std::string::npos);

  CHECK(run({"certify", "--config", (kRoot / "missing.json").string()}).code == 2);
  std::ofstream(kRoot / "broken.json") << "{ not json";
  CHECK(run({"certify", "--config", (kRoot / "broken.json").string()}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"certify"}).code == 2);
}

TEST_CASE("config parsing details", "[cli]") {
  const RunConfig cfg = load_config(std::filesystem::path(RATSTAB_CONFIG_DIR) / "paper_example.json");
  CHECK(cfg.system.n == 2);
  CHECK(cfg.system.f_registry == "paper_example");
  CHECK(cfg.mode == ScenarioMode::ObserverBased);
  CHECK(cfg.gains.theta.value() == 8.0);
  const RunConfig lin = load_config(std::filesystem::path(RATSTAB_CONFIG_DIR) / "linear_state_feedback.json");
  CHECK(lin.sim.history_x.size() == 3);
  CHECK(lin.sim.xhat0 == Vector{0, 0, 0});
  CHECK_THROWS_AS(parse_config(R"({"system": {"n": 2, "tau": 1, "f": "zero"}, "gains": {"L": [1e999, 0], "K": [0, 0]}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"system": {"n": 0, "tau": 1, "f": "zero"}, "gains": {"L": [], "K": []}})"),
                  ConfigError);
  CHECK(required_margins(ScenarioMode::OutputFeedback) == std::vector<std::string>{"c", "d", "of"});
}

TEST_CASE("every sample config runs", "[cli]") {
  for (const auto& entry : std::filesystem::directory_iterator(RATSTAB_CONFIG_DIR)) {
    const std::string name = entry.path().stem().string();
    const Run c = run({"certify", "--config", entry.path().string(), "--out", out_dir("samples/" + name)});
    INFO(name << "\n" << c.out << c.err);
    CHECK(c.code == 0);
    const Run s = run({"simulate", "--config", entry.path().string(), "--out", out_dir("samples/" + name)});
    CHECK(s.code == 0);
  }
}

TEST_CASE("fit subcommand", "[cli]") {
  const json j = paper_json();
  REQUIRE(run({"simulate", "--config", write_config("fit_src", j), "--out", out_dir("fit_src")}).code == 0);
  const std::string csv = (kRoot / "fit_src" / "trajectory.csv").string();
  const Run r = run({"fit", "--input", csv, "--trim", "1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("exp rate") != std::string::npos);
  CHECK(run({"fit", "--input", csv, "--column", "nope"}).code == 2);
  CHECK(run({"fit", "--input", (kRoot / "none.csv").string()}).code == 2);
}

TEST_CASE("repro-paper reports the printed-matrix discrepancy", "[cli]") {
  const Run r = run({"repro-paper", "--out", out_dir("repro")});
  INFO(r.out << r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("DISCREPANCY: solver 1.285970 vs stated 1.0682") != std::string::npos);
  CHECK(r.out.find("|S| reproduced") != std::string::npos);
  CHECK(r.out.find("transposed equation") != std::string::npos);
  CHECK(r.out.find("advisory Lipschitz estimate") != std::string::npos);
  CHECK(std::filesystem::exists(kRoot / "repro" / "certificate.json"));
  CHECK(std::filesystem::exists(kRoot / "repro" / "trajectory.csv"));
  CHECK(std::filesystem::exists(kRoot / "repro" / "trajectory.svg"));

  const PaperComparison cmp = compare_with_printed();
  CHECK(cmp.s.norm_matches);
  CHECK_FALSE(cmp.p.norm_matches);
  CHECK(cmp.s.residual_transposed < 1e-2);
  CHECK(cmp.p.residual_transposed > 0.5);
  CHECK(cmp.p.residual_standard > 40);

  // Deterministic apart from the timing line.
  const Run again = run({"repro-paper", "--out", out_dir("repro")});
  const auto strip = [](const std::string& s) { return s.substr(0, s.find("elapsed")); };
  CHECK(strip(again.out) == strip(r.out));
}
