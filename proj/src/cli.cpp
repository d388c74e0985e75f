#include "mvsde/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mvsde/analysis.hpp"
#include "mvsde/error.hpp"
#include "mvsde/models.hpp"
#include "mvsde/paths.hpp"
#include "mvsde/random.hpp"
#include "mvsde/solver.hpp"

namespace mvsde {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const CliOptions& opts, const std::string& experiment) {
  if (opts.out_dir) return *opts.out_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* root = std::getenv("MVSDE_OUT"); root && *root) return fs::path(root) / experiment;
  return fs::path("mvsde_out") / experiment;
}

namespace {

class SummaryBuilder {
 public:
  explicit SummaryBuilder(Summary& s) : s_(s) {}
  void add(std::string key, std::string value) { s_.emplace_back(std::move(key), std::move(value)); }
  void add(std::string key, double value) { add(std::move(key), format_double(value)); }
  void add(std::string key, std::uint64_t value) { add(std::move(key), std::to_string(value)); }
  void add(std::string key, bool value) { add(std::move(key), std::string(value ? "true" : "false")); }
  void add(std::string key, const char* value) { add(std::move(key), std::string(value)); }

 private:
  Summary& s_;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_summary(const fs::path& dir, const Summary& summary) {
  std::string text;
  for (const auto& [k, v] : summary) text += k + " = " + v + "\n";
  write_file(dir / "summary.txt", text);
}

fs::path prepare_dir(const ExperimentConfig& cfg, const CliOptions& opts, const std::string& experiment) {
  const fs::path dir = resolve_output_dir(cfg, opts, experiment);
  fs::create_directories(dir);
  return dir;
}

std::uint64_t effective_seed(const ExperimentConfig& cfg, const CliOptions& opts) {
  return opts.seed.value_or(cfg.seed);
}

LatticeOptions lattice_options(const ExperimentConfig& cfg, const CliOptions& opts) {
  LatticeOptions lo;
  lo.streaming = cfg.streaming;
  lo.memory_cap_bytes = cfg.memory_cap_mb << 20;
  lo.threads = opts.threads;
  return lo;
}

RunOptions run_options(const ExperimentConfig& cfg, const CliOptions& opts) {
  RunOptions ro;
  ro.threads = opts.threads;
  ro.blowup_threshold = cfg.blowup_threshold;
  return ro;
}

RecordSpec record_spec(const ExperimentConfig& cfg) {
  RecordSpec rs;
  rs.level = cfg.record_level;
  rs.interpolate = cfg.record_interpolate;
  return rs;
}

void add_header(SummaryBuilder& sb, const ExperimentConfig& cfg, const std::string& experiment,
                std::uint64_t seed) {
  sb.add("experiment", experiment);
  sb.add("model.id", cfg.model_id);
  for (const auto& [k, v] : cfg.model().parameters) sb.add("model." + k, v);
  sb.add("sim.d", std::uint64_t{cfg.dimension});
  sb.add("sim.N", std::uint64_t{cfg.particles});
  sb.add("sim.T", cfg.horizon);
  sb.add("sim.seed", seed);
}

struct SingleRun {
  CoefficientModel model;
  LawSpec law;
  TrajectorySet traj;
};

SingleRun single_run(const ExperimentConfig& cfg, const CliOptions& opts, std::uint64_t seed) {
  SingleRun r{cfg.model(), cfg.law(), {}};
  const ParticleEnsemble init = sample_initial(r.law, cfg.particles, seed);
  const BrownianLattice lattice(seed, cfg.particles, cfg.dimension, cfg.level, cfg.horizon,
                                lattice_options(cfg, opts));
  r.traj = em_run(r.model, init, cfg.level, lattice, record_spec(cfg), run_options(cfg, opts));
  return r;
}

void check_gate(CommandResult& res, bool ok, const std::string& message) {
  if (!ok) {
    res.gate_passed = false;
    res.gate_failures.push_back(message);
  }
}

// Ensemble mean and its standard error for coordinate k at record r.
std::pair<double, double> coordinate_mean(const TrajectorySet& t, std::size_t r, std::size_t k) {
  double sum = 0.0;
  for (std::size_t i = 0; i < t.particles; ++i) sum += t.at(r, i, k);
  const double n = static_cast<double>(t.particles);
  const double m = sum / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < t.particles; ++i) ss += (t.at(r, i, k) - m) * (t.at(r, i, k) - m);
  const double se = t.particles > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return {m, se};
}

double second_moment_at(const TrajectorySet& t, std::size_t r) {
  double sum = 0.0;
  for (std::size_t i = 0; i < t.particles; ++i) {
    for (std::size_t k = 0; k < t.dimension; ++k) sum += t.at(r, i, k) * t.at(r, i, k);
  }
  return sum / static_cast<double>(t.particles);
}

}  // namespace

CommandResult cmd_run(const ExperimentConfig& cfg, const CliOptions& opts) {
  validate_config(cfg, "run");
  const std::uint64_t seed = effective_seed(cfg, opts);
  CommandResult res;
  SingleRun run = single_run(cfg, opts, seed);
  const TrajectorySet& t = run.traj;
  res.out_dir = prepare_dir(cfg, opts, "run");

  std::string csv = "time,particle,dim,value\n";
  for (std::size_t r = 0; r < t.records(); ++r) {
    const std::string time = format_double(t.times[r]) + ",";
    for (std::size_t i = 0; i < t.particles; ++i) {
      for (std::size_t k = 0; k < t.dimension; ++k) {
        csv += time;
        csv += std::to_string(i);
        csv += ',';
        csv += std::to_string(k);
        csv += ',';
        csv += format_double(t.at(r, i, k));
        csv += '\n';
      }
    }
  }
  write_file(res.out_dir / "trajectories.csv", csv);
  write_file(res.out_dir / "trajectories.gp",
             "set datafile separator ','\n"
             "set xlabel 't'\nset ylabel 'X_t'\n"
             "plot 'trajectories.csv' using 1:($3 == 0 ? $4 : 1/0) with dots notitle\n");

  SummaryBuilder sb(res.summary);
  add_header(sb, cfg, "run", seed);
  sb.add("sim.n", std::uint64_t{cfg.level});
  sb.add("record.level", std::uint64_t{t.record_level});
  sb.add("records", std::uint64_t{t.records()});
  const std::size_t last = t.records() - 1;
  for (std::size_t k = 0; k < t.dimension; ++k) {
    sb.add("mean_T." + std::to_string(k), coordinate_mean(t, last, k).first);
  }
  sb.add("second_moment_T", second_moment_at(t, last));

  // Exponential decay rate of the first mean coordinate, fitted by least
  // squares on log|m(t)| when the mean keeps one sign.
  std::vector<double> logs;
  std::vector<double> means(t.records());
  bool one_sign = true;
  for (std::size_t r = 0; r < t.records(); ++r) {
    means[r] = coordinate_mean(t, r, 0).first;
    if (!(means[r] * means[0] > 0.0)) one_sign = false;
  }
  if (one_sign && t.records() >= 2) {
    double st = 0.0, sy = 0.0;
    for (std::size_t r = 0; r < t.records(); ++r) {
      st += t.times[r];
      sy += std::log(std::abs(means[r]));
    }
    const double n = static_cast<double>(t.records());
    const double tb = st / n, yb = sy / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t r = 0; r < t.records(); ++r) {
      const double dt = t.times[r] - tb;
      sxy += dt * (std::log(std::abs(means[r])) - yb);
      sxx += dt * dt;
    }
    sb.add("fitted_mean_decay_rate", -sxy / sxx);
  } else {
    sb.add("fitted_mean_decay_rate", "nan");
  }
  if (run.model.has_moment_oracle()) {
    const StateVector m0 = run.law.mean();
    const MomentOracle oracle = run.model.moment_oracle(m0, run.law.second_moment());
    const StateVector mT = oracle.mean(cfg.horizon);
    if (m0[0] != 0.0 && mT[0] * m0[0] > 0.0) {
      sb.add("oracle_mean_decay_rate", -std::log(mT[0] / m0[0]) / cfg.horizon);
    } else {
      sb.add("oracle_mean_decay_rate", "nan");
    }
    const auto [m_emp, se] = coordinate_mean(t, last, 0);
    const double z = se > 0.0 ? std::abs(m_emp - mT[0]) / se : (m_emp == mT[0] ? 0.0 : INFINITY);
    sb.add("oracle_mean_T.0", mT[0]);
    sb.add("oracle_mean_T_z", z);
    sb.add("mean_decay_consistent", z <= 4.0);
    if (opts.gate) check_gate(res, z <= 4.0, "terminal mean differs from the oracle by more than 4 standard errors");
  }
  write_summary(res.out_dir, res.summary);
  return res;
}

CommandResult cmd_rate(const ExperimentConfig& cfg, const CliOptions& opts) {
  validate_config(cfg, "rate");
  const std::uint64_t seed = effective_seed(cfg, opts);
  CommandResult res;
  std::vector<double> errors, ses;
  std::string model_id = cfg.model_id;
  if (cfg.rate_synthetic) {
    for (unsigned n : cfg.levels) {
      errors.push_back(std::ldexp(1.0, -static_cast<int>(n)));
      ses.push_back(0.0);
    }
    model_id = "synthetic";
  } else {
    MultilevelSpec spec;
    spec.levels = cfg.levels;
    spec.finest_level = cfg.finest_level;
    spec.particles = cfg.particles;
    spec.horizon = cfg.horizon;
    spec.seed = seed;
    spec.record = record_spec(cfg);
    spec.run = run_options(cfg, opts);
    spec.lattice = lattice_options(cfg, opts);
    const auto runs = em_multilevel(cfg.model(), cfg.law(), spec);
    const TrajectorySet& ref = runs.at(cfg.finest_level);
    for (unsigned n : cfg.levels) {
      const ErrorEstimate e = strong_error(ref, runs.at(n));
      errors.push_back(e.value);
      ses.push_back(e.standard_error);
    }
  }
  RateReport rep = fit_rate(cfg.levels, errors, ses);
  res.out_dir = prepare_dir(cfg, opts, "rate");

  std::string csv = "level,error,stderr\n";
  for (std::size_t i = 0; i < errors.size(); ++i) {
    csv += std::to_string(cfg.levels[i]) + "," + format_double(errors[i]) + "," + format_double(ses[i]) + "\n";
  }
  write_file(res.out_dir / "rate.csv", csv);
  write_file(res.out_dir / "rate.gp",
             "set datafile separator ','\n"
             "set logscale y 2\n"
             "set xlabel 'level n'\nset ylabel 'E sup |X^n - X^L|^2'\n"
             "f(x) = 2**(a + b*x)\n"
             "a = " + format_double(rep.intercept) + "\nb = " + format_double(rep.slope) + "\n"
             "plot 'rate.csv' using 1:2:3 every ::1 with yerrorbars title 'error', f(x) title 'fit'\n");

  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i) monotone = monotone && errors[i] < errors[i - 1];

  SummaryBuilder sb(res.summary);
  add_header(sb, cfg, "rate", seed);
  if (cfg.rate_synthetic) sb.add("rate.synthetic", true);
  std::string levels;
  for (unsigned n : cfg.levels) levels += (levels.empty() ? "" : ",") + std::to_string(n);
  sb.add("sim.levels", levels);
  sb.add("sim.L", std::uint64_t{cfg.finest_level});
  sb.add("slope", rep.slope);
  sb.add("intercept", rep.intercept);
  sb.add("slope_stderr", rep.slope_standard_error);
  sb.add("slope_ci95_low", rep.slope - 1.96 * rep.slope_standard_error);
  sb.add("slope_ci95_high", rep.slope + 1.96 * rep.slope_standard_error);
  sb.add("monotone_decreasing", monotone);
  if (opts.gate) {
    if (cfg.gate_slope_min) check_gate(res, rep.slope >= *cfg.gate_slope_min, "slope below gate.slope_min");
    if (cfg.gate_slope_max) check_gate(res, rep.slope <= *cfg.gate_slope_max, "slope above gate.slope_max");
    if (cfg.gate_monotone) check_gate(res, monotone, "errors not strictly decreasing");
    sb.add("gate_passed", res.gate_passed);
  }
  write_summary(res.out_dir, res.summary);
  return res;
}

CommandResult cmd_moments(const ExperimentConfig& cfg, const CliOptions& opts) {
  validate_config(cfg, "moments");
  const std::uint64_t seed = effective_seed(cfg, opts);
  CommandResult res;
  SingleRun run = single_run(cfg, opts, seed);
  const TrajectorySet& t = run.traj;
  const MomentCurve curve = moment_curve(t, cfg.p);
  const std::vector<std::size_t> lags = cfg.lags.empty() ? dyadic_lags((t.records() - 1) / 8) : cfg.lags;
  const IncrementScaling inc = increment_scaling(t, cfg.p, lags);
  res.out_dir = prepare_dir(cfg, opts, "moments");

  std::vector<double> oracle;
  if (cfg.p == 1.0 && run.model.has_moment_oracle()) {
    const MomentOracle o = run.model.moment_oracle(run.law.mean(), run.law.second_moment());
    for (double time : curve.times) oracle.push_back(o.second_moment(time));
  }
  double max_z = 0.0;
  std::string csv = "time,moment,stderr,envelope,oracle,z\n";
  for (std::size_t r = 0; r < curve.times.size(); ++r) {
    csv += format_double(curve.times[r]) + "," + format_double(curve.values[r]) + "," +
           format_double(curve.standard_errors[r]) + "," + format_double(curve.envelope[r]) + ",";
    if (!oracle.empty()) {
      const double diff = std::abs(curve.values[r] - oracle[r]);
      const double se = curve.standard_errors[r];
      const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
      max_z = std::max(max_z, z);
      csv += format_double(oracle[r]) + "," + format_double(z);
    } else {
      csv += ",";
    }
    csv += "\n";
  }
  write_file(res.out_dir / "moments.csv", csv);
  std::string inc_csv = "lag,lag_time,mean_increment\n";
  for (std::size_t i = 0; i < inc.lags.size(); ++i) {
    inc_csv += std::to_string(inc.lags[i]) + "," + format_double(inc.lag_times[i]) + "," +
               format_double(inc.mean_increments[i]) + "\n";
  }
  write_file(res.out_dir / "increments.csv", inc_csv);
  write_file(res.out_dir / "moments.gp",
             "set datafile separator ','\n"
             "set key autotitle columnhead\n"
             "set xlabel 't'\nset ylabel 'E|X_t|^{2p}'\n"
             "plot 'moments.csv' using 1:2:3 with yerrorbars, '' using 1:4 with lines, '' using 1:5 with lines\n"
             "pause -1\n"
             "set logscale xy\nset xlabel 't - s'\nset ylabel 'E|X_t - X_s|^{2p}'\n"
             "plot 'increments.csv' using 2:3 with linespoints\n");

  SummaryBuilder sb(res.summary);
  add_header(sb, cfg, "moments", seed);
  sb.add("sim.n", std::uint64_t{cfg.level});
  sb.add("analysis.p", cfg.p);
  sb.add("records", std::uint64_t{t.records()});
  sb.add("initial_moment", curve.initial_moment);
  sb.add("fitted_c", curve.fitted_c);
  sb.add("increment_exponent", inc.exponent);
  sb.add("increment_intercept", inc.intercept);
  sb.add("increment_degenerate_zero", inc.degenerate_zero);
  if (!oracle.empty()) {
    sb.add("oracle_max_z", max_z);
    sb.add("oracle_within_3se", max_z <= 3.0);
  }
  if (opts.gate) {
    if (cfg.gate_moment_se) {
      check_gate(res, !oracle.empty() && max_z <= *cfg.gate_moment_se, "moment curve outside the oracle band");
    }
    if (cfg.gate_exponent_min) check_gate(res, inc.exponent >= *cfg.gate_exponent_min, "exponent below gate");
    if (cfg.gate_exponent_max) check_gate(res, inc.exponent <= *cfg.gate_exponent_max, "exponent above gate");
    sb.add("gate_passed", res.gate_passed);
  }
  write_summary(res.out_dir, res.summary);
  return res;
}

CommandResult cmd_metric(const ExperimentConfig& cfg, const CliOptions& opts) {
  validate_config(cfg, "metric");
  const std::uint64_t seed = effective_seed(cfg, opts);
  const std::uint64_t seed_b = cfg.metric_seed_b.value_or(seed);
  CommandResult res;
  const CoefficientModel model = cfg.model();
  const LawSpec law = cfg.law();
  const LatticeOptions lo = lattice_options(cfg, opts);

  const ParticleEnsemble init_a = sample_initial(law, cfg.particles, seed);
  ParticleEnsemble init_b = sample_initial(law, cfg.particles, seed_b);
  for (std::size_t i = 0; i < init_b.particles; ++i) init_b.state(i)[0] += cfg.metric_perturb;

  const BrownianLattice lat_a(seed, cfg.particles, cfg.dimension, cfg.level, cfg.horizon, lo);
  const TrajectorySet a = em_run(model, init_a, cfg.level, lat_a, record_spec(cfg), run_options(cfg, opts));
  TrajectorySet b;
  if (seed_b == seed) {
    b = em_run(model, init_b, cfg.level, lat_a, record_spec(cfg), run_options(cfg, opts));
  } else {
    const BrownianLattice lat_b(seed_b, cfg.particles, cfg.dimension, cfg.level, cfg.horizon, lo);
    b = em_run(model, init_b, cfg.level, lat_b, record_spec(cfg), run_options(cfg, opts));
  }
  const Coupling coupling = cfg.metric_coupling == "sorted" ? Coupling::kSorted : Coupling::kIndex;
  const LawGapCurve gap = law_gap_curve(a, b, coupling);
  res.out_dir = prepare_dir(cfg, opts, "metric");

  std::string csv = "time,rho_upper,rho_lower\n";
  double max_upper = 0.0, max_lower = 0.0;
  for (std::size_t r = 0; r < gap.times.size(); ++r) {
    csv += format_double(gap.times[r]) + "," + format_double(gap.rho_upper[r]) + "," +
           format_double(gap.rho_lower[r]) + "\n";
    max_upper = std::max(max_upper, gap.rho_upper[r]);
    max_lower = std::max(max_lower, gap.rho_lower[r]);
  }
  write_file(res.out_dir / "metric.csv", csv);
  write_file(res.out_dir / "metric.gp",
             "set datafile separator ','\n"
             "set key autotitle columnhead\n"
             "set xlabel 't'\nset ylabel 'rho bounds'\n"
             "plot 'metric.csv' using 1:2 with lines, '' using 1:3 with lines\n");

  SummaryBuilder sb(res.summary);
  add_header(sb, cfg, "metric", seed);
  sb.add("metric.seed_b", seed_b);
  sb.add("metric.perturb", cfg.metric_perturb);
  sb.add("metric.coupling", cfg.metric_coupling);
  sb.add("max_rho_upper", max_upper);
  sb.add("max_rho_lower", max_lower);
  sb.add("final_rho_upper", gap.rho_upper.back());
  sb.add("final_rho_lower", gap.rho_lower.back());
  write_summary(res.out_dir, res.summary);
  return res;
}

CommandResult cmd_check(const ExperimentConfig& cfg, const CliOptions& opts) {
  validate_config(cfg, "check");
  const std::uint64_t seed = effective_seed(cfg, opts);
  CommandResult res;
  const CoefficientModel model = cfg.model();

  struct Row {
    std::string name;
    bool passed;
    double fitted;
    std::size_t samples;
    std::string surrogate;
    std::optional<OffendingSample> offending;
    std::string reason;
  };
  std::vector<Row> rows;

  LinearGrowthSpec lg;
  lg.count = cfg.check_count;
  const LinearGrowthReport h1 = check_linear_growth(model, lg, seed);
  rows.push_back({"H1", h1.passed, h1.fitted_l1, h1.samples, "", h1.offending, h1.reason});

  PairSampleSpec ps;
  ps.count = cfg.check_count;
  const double eta = model.parameters.contains("eta") ? model.parameters.at("eta") : kDefaultEta;
  if (model.assumption_class == AssumptionClass::kH1H2Prime) {
    const H2PrimeReport h = check_h2prime(model, ps, seed, eta);
    rows.push_back({"H2prime", h.passed, std::max(h.fitted_lambda1, h.fitted_lambda2), h.samples,
                    h.measure_surrogate, h.offending, h.reason});
  } else if (model.assumption_class == AssumptionClass::kH1H2) {
    const H2Report h = check_h2(model, ps, seed, Modulus::kappa(eta), Modulus::kappa(eta));
    rows.push_back({"H2", h.passed, h.fitted_l2, h.samples, h.measure_surrogate, h.offending, h.reason});
  }
  res.out_dir = prepare_dir(cfg, opts, "check");

  std::string csv = "check,passed,fitted,samples,surrogate,offending_index,offending_x,offending_ratio\n";
  SummaryBuilder sb(res.summary);
  add_header(sb, cfg, "check", seed);
  sb.add("assumption_class", to_string(model.assumption_class));
  bool all = true;
  for (const Row& r : rows) {
    csv += r.name + "," + (r.passed ? "true" : "false") + "," + format_double(r.fitted) + "," +
           std::to_string(r.samples) + "," + r.surrogate + ",";
    sb.add(r.name + ".passed", r.passed);
    sb.add(r.name + ".fitted", r.fitted);
    if (r.offending) {
      std::string xs;
      for (double v : r.offending->x) xs += (xs.empty() ? "" : " ") + format_double(v);
      csv += std::to_string(r.offending->index) + "," + xs + "," + format_double(r.offending->ratio);
      sb.add(r.name + ".offending_index", std::uint64_t{r.offending->index});
      sb.add(r.name + ".offending_x", xs);
      sb.add(r.name + ".offending_ratio", r.offending->ratio);
    } else {
      csv += ",,";
    }
    if (!r.reason.empty()) sb.add(r.name + ".reason", r.reason);
    csv += "\n";
    all = all && r.passed;
  }
  write_file(res.out_dir / "check.csv", csv);
  sb.add("all_passed", all);
  if (opts.gate) {
    check_gate(res, all, "assumption check failed");
    sb.add("gate_passed", res.gate_passed);
  }
  write_summary(res.out_dir, res.summary);
  return res;
}

bool selftest(std::ostream& out) {
  bool all = true;
  auto report = [&](const char* name, bool ok) {
    out << "selftest " << name << ": " << (ok ? "PASS" : "FAIL") << "\n";
    all = all && ok;
  };

  const auto kat = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  report("philox-kat", kat == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

  const std::vector<unsigned> levels{3, 4, 5, 6, 7, 8};
  std::vector<double> errs;
  for (unsigned n : levels) errs.push_back(std::ldexp(3.0, -static_cast<int>(n)));
  report("synthetic-rate", std::abs(fit_rate(levels, errs).slope + 1.0) <= 1e-12);

  const double e2 = std::exp(-2.0);
  report("kappa-eta", std::abs(kappa_eta(e2, e2) - 2.0 * e2) <= 1e-12);

  const OsgoodResult og = osgood_integral(Modulus::kappa(e2), 1e-8, e2);
  const double og_ref = std::log(std::log(1e8)) - std::log(2.0);
  report("osgood", std::abs(og.value - og_ref) <= 1e-6 * og_ref);

  const BihariReport bh = bihari_ode_check(Modulus::kappa(), 1.0, 1e-8, 1.0);
  const double bh_ref = std::pow(1e-8, std::exp(-1.0));
  report("bihari", std::abs(bh.numeric.back() - bh_ref) <= 1e-6 * bh_ref);

  const BrownianLattice lat(7, 4, 2, 8, 1.0);
  const CoarseIncrements c4 = coarsen(lat, 4);
  bool exact = true;
  for (std::size_t p = 0; p < 4; ++p) {
    for (std::size_t k = 0; k < 2; ++k) {
      double total = 0.0;
      for (std::uint64_t j = 0; j < c4.cells; ++j) total += c4.at(p, j, k);
      exact = exact && total == lat.range_sum(p, k, 0, lat.steps());
    }
  }
  report("coarsen-exact", exact);

  ReplayConfig rc;
  rc.particles = 64;
  rc.level = 6;
  rc.finest_level = 6;
  report("replay", uniqueness_replay(make_mf_ou(1.0, 0.5, 0.4), rc, 11));
  return all;
}

namespace {

CommandResult dispatch(const std::string& name, const ExperimentConfig& cfg, const CliOptions& opts) {
  if (name == "run") return cmd_run(cfg, opts);
  if (name == "rate") return cmd_rate(cfg, opts);
  if (name == "moments") return cmd_moments(cfg, opts);
  if (name == "metric") return cmd_metric(cfg, opts);
  return cmd_check(cfg, opts);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"McKean-Vlasov particle Euler-Maruyama toolkit", "mvsde"};
  app.require_subcommand(1);
  CliOptions opts;
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  const std::vector<std::string> names{"run", "rate", "moments", "metric", "check"};
  for (const auto& n : names) {
    CLI::App* sub = app.add_subcommand(n);
    sub->add_option("--config", config_path, "experiment config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_flag("--gate", opts.gate, "enforce acceptance thresholds");
  }
  app.add_subcommand("selftest", "internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfigError;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  if (name == "selftest") return selftest(out) ? kExitOk : kExitFailure;

  if (!config_path.empty()) opts.config_path = config_path;
  if (!out_dir.empty()) opts.out_dir = out_dir;
  if (chosen->count("--seed")) opts.seed = seed;
  opts.threads = threads;

  try {
    const ExperimentConfig cfg = opts.config_path ? load_config(*opts.config_path) : ExperimentConfig{};
    const CommandResult res = dispatch(name, cfg, opts);
    out << "wrote " << res.out_dir.string() << "\n";
    for (const auto& [k, v] : res.summary) out << k << " = " << v << "\n";
    if (!res.gate_passed) {
      for (const auto& f : res.gate_failures) err << "gate failure: " << f << "\n";
      return kExitGateFailure;
    }
    for (const auto& [k, v] : res.summary) {
      if (k.ends_with(".offending_x")) err << "offending sample (" << k << "): " << v << "\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const BlowUpError& e) {
    err << "blow-up: " << e.what() << "\n";
    return kExitBlowUp;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace mvsde
