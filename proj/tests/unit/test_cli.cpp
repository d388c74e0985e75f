#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvsde/cli.hpp"
#include "mvsde/error.hpp"

using namespace mvsde;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mvsde_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string summary_value(const CommandResult& r, const std::string& key) {
  for (const auto& [k, v] : r.summary) {
    if (k == key) return v;
  }
  return {};
}

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text, "t.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "mvsde");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return rc;
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 5e-324, 1.7976931348623157e308}) {
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config_text(
      "# rate study\n"
      "experiment = rate\n"
      "model.id = osgood   # trailing comment\n"
      "model.beta = 0.5\n"
      "sim.levels = 2, 3, 4\n"
      "sim.L = 9\n"
      "sim.seed = 18446744073709551615\n"
      "init.law = gaussian\n"
      "init.cov = 0.5\n"
      "\n"
      "record.interpolate = true\n");
  CHECK(c.experiment == "rate");
  CHECK(c.model_id == "osgood");
  CHECK(c.model_params.at("beta") == 0.5);
  CHECK(c.levels == std::vector<unsigned>{2, 3, 4});
  CHECK(c.finest_level == 9);
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK(c.record_interpolate);
  CHECK(c.law().covariance == std::vector{0.5});
  CHECK_NOTHROW(validate_config(c, "rate"));

  CHECK(config_error("sim.N = 10\nsim.bogus = 3\n").find("t.cfg:2") != std::string::npos);
  CHECK(config_error("sim.N = 10\nsim.bogus = 3\n").find("sim.bogus") != std::string::npos);
  CHECK(config_error("sim.N = ten\n").find("t.cfg:1") != std::string::npos);
  CHECK(config_error("sim.N = 1\nsim.N = 2\n").find("duplicate") != std::string::npos);
  CHECK(config_error("just words\n").find("t.cfg:1") != std::string::npos);
  CHECK(config_error("sim.T =\n").find("empty") != std::string::npos);
  CHECK(config_error("sim.streaming = maybe\n").find("true or false") != std::string::npos);
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  c.model_params["gamma"] = 1.0;
  CHECK_THROWS_AS(validate_config(c, "run"), ConfigError);
  c.model_params.clear();
  c.model_id = "nope";
  CHECK_THROWS_AS(validate_config(c, "run"), ConfigError);
  c.model_id = "mf-ou";
  CHECK_NOTHROW(validate_config(c, "run"));

  c.levels = {3, 5, 4};
  CHECK_THROWS_AS(validate_config(c, "rate"), ConfigError);
  c.levels = {3, 4, 9};
  c.finest_level = 12;
  CHECK_THROWS_AS(validate_config(c, "rate"), ConfigError);
  c.levels = {3, 4, 8};
  CHECK_NOTHROW(validate_config(c, "rate"));
  c.levels = {3, 4};
  CHECK_THROWS_AS(validate_config(c, "rate"), ConfigError);

  ExperimentConfig law;
  law.init_law = "gaussian";
  law.init_cov = {1.0, 2.0, 2.0, 1.0};
  law.dimension = 2;
  CHECK_THROWS_AS(validate_config(law, "run"), ConfigError);
  law.init_law = "cauchy";
  CHECK_THROWS_AS(validate_config(law, "run"), ConfigError);

  ExperimentConfig kind;
  kind.experiment = "rate";
  CHECK_THROWS_AS(validate_config(kind, "run"), ConfigError);

  ExperimentConfig mem;
  mem.particles = 100000;
  mem.level = 16;
  mem.memory_cap_mb = 64;
  CHECK_THROWS_AS(validate_config(mem, "run"), ConfigError);
  mem.streaming = true;
  CHECK_NOTHROW(validate_config(mem, "run"));
}

TEST_CASE("output directory precedence") {
  ExperimentConfig c;
  CliOptions o;
  ::setenv("MVSDE_OUT", "/tmp/root", 1);
  CHECK(resolve_output_dir(c, o, "rate") == fs::path("/tmp/root/rate"));
  c.output_dir = "from_config";
  CHECK(resolve_output_dir(c, o, "rate") == fs::path("from_config"));
  o.out_dir = "from_flag";
  CHECK(resolve_output_dir(c, o, "rate") == fs::path("from_flag"));
  ::unsetenv("MVSDE_OUT");
  c.output_dir.clear();
  o.out_dir.reset();
  CHECK(resolve_output_dir(c, o, "run") == fs::path("mvsde_out/run"));
}

TEST_CASE("cmd_run on the zero model gives constant columns") {
  ExperimentConfig c = parse_config_text("model.id = zero\nsim.N = 5\nsim.n = 4\ninit.law = uniform\n");
  CliOptions o;
  o.out_dir = scratch("run_zero").string();
  const CommandResult r = cmd_run(c, o);
  std::ifstream in(r.out_dir / "trajectories.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "time,particle,dim,value");
  std::map<std::string, std::string> first;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto c1 = line.find(','), c3 = line.rfind(',');
    const std::string key = line.substr(c1 + 1, c3 - c1 - 1);
    const std::string value = line.substr(c3 + 1);
    if (!first.contains(key)) first[key] = value;
    CHECK(first[key] == value);
  }
  CHECK(rows == 17 * 5);
  CHECK(fs::exists(r.out_dir / "summary.txt"));
  CHECK(fs::exists(r.out_dir / "trajectories.gp"));
}

TEST_CASE("cmd_run is deterministic and reports the mean decay") {
  const ExperimentConfig c = parse_config_text("model.id = mf-ou\nsim.N = 10000\nsim.n = 6\n");
  CliOptions o1, o2;
  o1.out_dir = scratch("run_a1").string();
  o2.out_dir = scratch("run_a2").string();
  o2.threads = 4;
  const CommandResult r1 = cmd_run(c, o1);
  cmd_run(c, o2);
  for (const char* f : {"trajectories.csv", "summary.txt", "trajectories.gp"}) {
    CHECK(slurp(fs::path(*o1.out_dir) / f) == slurp(fs::path(*o2.out_dir) / f));
  }
  CHECK(summary_value(r1, "mean_decay_consistent") == "true");
  const double fitted = std::stod(summary_value(r1, "fitted_mean_decay_rate"));
  const double oracle = std::stod(summary_value(r1, "oracle_mean_decay_rate"));
  CHECK(oracle == doctest::Approx(0.5));
  CHECK(fitted == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("cmd_rate synthetic mode") {
  const ExperimentConfig c = parse_config_text("rate.synthetic = true\nsim.levels = 3,4,5,6,7,8\n");
  CliOptions o;
  o.out_dir = scratch("rate_syn").string();
  const CommandResult r = cmd_rate(c, o);
  CHECK(std::stod(summary_value(r, "slope")) == -1.0);
  const std::string csv = slurp(r.out_dir / "rate.csv");
  CHECK(csv.starts_with("level,error,stderr\n3,0.125,0\n"));
}

TEST_CASE("cmd_check") {
  CliOptions o;
  o.out_dir = scratch("check_a").string();
  const CommandResult a = cmd_check(parse_config_text("model.id = mf-ou\n"), o);
  CHECK(summary_value(a, "H1.passed") == "true");

  o.out_dir = scratch("check_q").string();
  const CommandResult q = cmd_check(parse_config_text("model.id = fixture-quadratic\n"), o);
  CHECK(summary_value(q, "H1.passed") == "false");
  CHECK_FALSE(summary_value(q, "H1.offending_x").empty());
  CHECK(slurp(q.out_dir / "check.csv").find("H1,false") != std::string::npos);
}

TEST_CASE("cmd_metric on identical laws gives zero curves") {
  CliOptions o;
  o.out_dir = scratch("metric_same").string();
  const CommandResult r = cmd_metric(parse_config_text("sim.N = 200\nsim.n = 5\ninit.law = gaussian\n"), o);
  CHECK(summary_value(r, "max_rho_upper") == "0");
  CHECK(summary_value(r, "max_rho_lower") == "0");

  o.out_dir = scratch("metric_shift").string();
  const CommandResult s = cmd_metric(parse_config_text("sim.N = 200\nsim.n = 5\nmetric.perturb = 0.1\n"), o);
  CHECK(std::stod(summary_value(s, "final_rho_upper")) > 0.0);
}

TEST_CASE("cmd_moments writes both tables") {
  CliOptions o;
  o.out_dir = scratch("moments").string();
  const CommandResult r = cmd_moments(parse_config_text("model.id = brownian\nsim.N = 500\nsim.n = 10\n"), o);
  CHECK(fs::exists(r.out_dir / "moments.csv"));
  CHECK(fs::exists(r.out_dir / "increments.csv"));
  CHECK(std::stod(summary_value(r, "increment_exponent")) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  std::string text;
  CHECK(cli({"selftest"}, &text) == kExitOk);
  CHECK(text.find("FAIL") == std::string::npos);

  CHECK(cli({"run", "--config", (dir / "missing.cfg").string()}) == kExitConfigError);
  CHECK(cli({"frobnicate"}) == kExitConfigError);
  std::ofstream(dir / "bad.cfg") << "sim.N = 10\nsim.wat = 1\n";
  CHECK(cli({"run", "--config", (dir / "bad.cfg").string()}, &text) == kExitConfigError);
  CHECK(text.find("bad.cfg:2") != std::string::npos);

  std::ofstream(dir / "boom.cfg") << "model.id = fixture-quadratic\ninit.x0 = 5\nsim.N = 4\nsim.n = 6\n";
  CHECK(cli({"run", "--config", (dir / "boom.cfg").string(), "--out", (dir / "boom").string()}) == kExitBlowUp);

  std::ofstream(dir / "gate.cfg") << "rate.synthetic = true\ngate.slope_min = -0.9\n";
  const std::string out = (dir / "gate").string();
  CHECK(cli({"rate", "--config", (dir / "gate.cfg").string(), "--out", out}) == kExitOk);
  CHECK(cli({"rate", "--config", (dir / "gate.cfg").string(), "--out", out, "--gate"}) == kExitGateFailure);

  std::ofstream(dir / "seed.cfg") << "sim.N = 4\nsim.n = 3\n";
  CHECK(cli({"run", "--config", (dir / "seed.cfg").string(), "--out", (dir / "s1").string(), "--seed", "9"}) == kExitOk);
  CHECK(slurp(dir / "s1" / "summary.txt").find("sim.seed = 9\n") != std::string::npos);
}
