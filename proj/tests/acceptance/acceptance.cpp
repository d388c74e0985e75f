// Acceptance suite. `acceptance N` runs criterion N; no argument runs all.
// Each criterion prints one PASS/FAIL line; the exit code is nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mvsde/analysis.hpp"
#include "mvsde/cli.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/models.hpp"
#include "mvsde/random.hpp"
#include "mvsde/solver.hpp"

using namespace mvsde;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool passed;
  std::string detail;
};

std::string fmt(double x) { return format_double(x); }

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt(x);
  return s;
}

struct RateRun {
  std::vector<double> errors;
  double slope;
  double slope_se;
};

RateRun rate_study(const CoefficientModel& model, std::uint64_t seed) {
  MultilevelSpec spec;
  spec.levels = {3, 4, 5, 6, 7, 8};
  spec.finest_level = 12;
  spec.particles = 2000;
  spec.horizon = 1.0;
  spec.seed = seed;
  const auto runs = em_multilevel(model, LawSpec::gaussian({0.0}, {1.0}), spec);
  std::vector<double> errs, ses;
  for (unsigned n : spec.levels) {
    const ErrorEstimate e = strong_error(runs.at(12), runs.at(n));
    errs.push_back(e.value);
    ses.push_back(e.standard_error);
  }
  const RateReport r = fit_rate(spec.levels, errs, ses);
  return {errs, r.slope, r.slope_standard_error};
}

Verdict criterion1() {
  const CoefficientModel a = make_mf_ou(1.0, 0.5, 0.4);
  bool ok = true;
  std::vector<double> slopes, ses;
  for (std::uint64_t seed : {1, 2, 3}) {
    const RateRun r = rate_study(a, seed);
    slopes.push_back(r.slope);
    ses.push_back(r.slope_se);
    ok = ok && r.slope >= -1.4 && r.slope <= -0.6;
  }
  return {ok, "model A slopes=" + join(slopes) + " stderr=" + join(ses) + " gate=[-1.4,-0.6]"};
}

Verdict criterion2() {
  const CoefficientModel b = make_osgood(1.0, 0.25, 0.3, std::exp(-2.0));
  bool ok = true;
  std::vector<double> slopes;
  std::string mono;
  for (std::uint64_t seed : {1, 2, 3}) {
    const RateRun r = rate_study(b, seed);
    bool decreasing = true;
    for (std::size_t i = 1; i < r.errors.size(); ++i) decreasing = decreasing && r.errors[i] < r.errors[i - 1];
    slopes.push_back(r.slope);
    mono += decreasing ? "y" : "n";
    ok = ok && decreasing && r.slope >= -1.5 && r.slope <= -0.5;
  }
  return {ok, "model B slopes=" + join(slopes) + " decreasing=" + mono + " gate=[-1.5,-0.5]"};
}

Verdict criterion3() {
  const CoefficientModel a = make_mf_ou(1.0, 0.5, 0.4);
  const LawSpec law = LawSpec::gaussian({0.0}, {1.0});
  const std::size_t n = 10000;
  const unsigned level = 8;
  const ParticleEnsemble init = sample_initial(law, n, 1);
  const BrownianLattice lat(1, n, 1, level, 1.0);
  const TrajectorySet t = em_run(a, init, level, lat);
  const MomentCurve c = moment_curve(t, 1.0);
  const MomentOracle o = a.moment_oracle(law.mean(), law.second_moment());
  double max_z = 0.0;
  bool dominated = true;
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    const double z = std::abs(c.values[i] - o.second_moment(c.times[i])) / c.standard_errors[i];
    max_z = std::max(max_z, z);
    dominated = dominated && c.values[i] <= c.envelope[i];
  }
  const bool converged = std::isfinite(c.fitted_c) && c.fitted_c >= 0.0;
  return {max_z <= 3.0 && dominated && converged,
          "records=" + std::to_string(c.times.size()) + " max_z=" + fmt(max_z) + " fitted_C=" + fmt(c.fitted_c) +
              " envelope_dominates=" + (dominated ? "y" : "n")};
}

Verdict criterion4() {
  const std::vector<std::size_t> lags = dyadic_lags(128);
  auto exponent = [&](const CoefficientModel& m, const LawSpec& law) {
    const std::size_t n = 2000;
    const ParticleEnsemble init = sample_initial(law, n, 1);
    const BrownianLattice lat(1, n, 1, 10, 1.0);
    return increment_scaling(em_run(m, init, 10, lat), 1.0, lags).exponent;
  };
  const double eb = exponent(make_brownian(1.0), LawSpec::point_mass({0.0}));
  const double ea = exponent(make_mf_ou(1.0, 0.5, 0.4), LawSpec::gaussian({0.0}, {1.0}));
  const bool ok = eb >= 0.9 && eb <= 1.1 && ea >= 0.8 && ea <= 1.2;
  return {ok, "brownian exponent=" + fmt(eb) + " (gate [0.9,1.1]) model A exponent=" + fmt(ea) +
                  " (gate [0.8,1.2]) lags=1..128 of 1024 steps"};
}

double u01(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  return counter_uniform(seed, Stream::kValidation, a, b, 0);
}

Verdict criterion5() {
  double max_jump = 0.0, worst_concavity = 0.0;
  for (std::uint32_t i = 0; i < 1000; ++i) {
    const double eta = 0.001 + (1.0 / std::numbers::e - 0.002) * u01(5, i, 0);
    const double left = kappa_eta(eta, eta);
    const double right = kappa_eta(std::nextafter(eta, 1.0), eta);
    max_jump = std::max({max_jump, std::abs(left - eta * std::log(1.0 / eta)), std::abs(right - left)});
  }
  for (std::uint32_t i = 0; i < 10000; ++i) {
    const double eta = 0.001 + (1.0 / std::numbers::e - 0.002) * u01(5, i, 1);
    const double a = std::pow(10.0, -8.0 + 9.0 * u01(5, i, 2));
    const double b = std::pow(10.0, -8.0 + 9.0 * u01(5, i, 3));
    const double mid = kappa_eta(0.5 * (a + b), eta);
    const double gap = 0.5 * (kappa_eta(a, eta) + kappa_eta(b, eta)) - mid;
    worst_concavity = std::max(worst_concavity, gap);
  }
  const double e2 = std::exp(-2.0);
  const double at_branch = std::abs(kappa_eta(e2, e2) - 2.0 * e2);
  const bool ok = max_jump <= 1e-12 && worst_concavity <= 1e-12 && at_branch <= 1e-12;
  return {ok, "max_branch_jump=" + fmt(max_jump) + " worst_midpoint_excess=" + fmt(worst_concavity) +
                  " |kappa(e^-2)-2e^-2|=" + fmt(at_branch)};
}

Verdict criterion6() {
  const double e2 = std::exp(-2.0);
  const Modulus k = Modulus::kappa(e2);
  bool ok = true;
  double worst = 0.0, prev = -INFINITY;
  for (double eps : {1e-4, 1e-8, 1e-12}) {
    const double v = osgood_integral(k, eps, e2).value;
    const double ref = std::log(std::log(1.0 / eps)) - std::log(2.0);
    const double rel = std::abs(v - ref) / ref;
    worst = std::max(worst, rel);
    ok = ok && rel <= 1e-6 && v > prev;
    prev = v;
  }
  return {ok, "max_relative_error=" + fmt(worst) + " increasing=" + (ok ? "y" : "n")};
}

Verdict criterion7() {
  const Modulus k = Modulus::kappa(std::exp(-2.0));
  const BihariReport zero = bihari_ode_check(k, 1.0, 0.0, 1.0);
  bool all_zero = true;
  for (double v : zero.numeric) all_zero = all_zero && v == 0.0;
  const BihariReport r = bihari_ode_check(k, 1.0, 1e-8, 1.0);
  const double ref = std::pow(1e-8, std::exp(-1.0));
  const double rel = std::abs(r.numeric.back() - ref) / ref;
  return {all_zero && rel <= 1e-6,
          "zero_path=" + std::string(all_zero ? "y" : "n") + " z(1)=" + fmt(r.numeric.back()) + " ref=" + fmt(ref) +
              " rel=" + fmt(rel)};
}

// Every file under dir, as bytes, in path order.
std::vector<std::pair<std::string, std::string>> snapshot_dir(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out.emplace_back(fs::relative(entry.path(), dir).string(), ss.str());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Verdict criterion8() {
  const fs::path root = fs::temp_directory_path() / "mvsde_acceptance_8";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"run", "model.id = osgood\nsim.N = 1000\nsim.n = 8\ninit.law = gaussian\n"},
      {"rate", "model.id = mf-ou\nsim.N = 1000\nsim.levels = 2,3,4\nsim.L = 9\ninit.law = gaussian\n"},
      {"moments", "model.id = sznitman\nsim.N = 1000\nsim.n = 10\ninit.law = uniform\n"},
      {"metric", "model.id = mf-ou\nsim.N = 1000\nsim.n = 7\nmetric.seed_b = 2\ninit.law = gaussian\n"},
  };
  for (const auto& [kind, text] : configs) {
    std::ofstream(root / (kind + ".cfg")) << text;
  }
  struct Variant {
    std::string tag;
    std::string threads;
  };
  const std::vector<Variant> variants{{"t1", "1"}, {"t1-again", "1"}, {"t4", "4"}, {"t8", "8"}};
  for (const auto& v : variants) {
    for (const auto& [kind, text] : configs) {
      const std::string cfg = (root / (kind + ".cfg")).string();
      const std::string out = (root / v.tag / kind).string();
      const char* argv[] = {"mvsde", kind.c_str(), "--config", cfg.c_str(), "--out", out.c_str(),
                            "--threads", v.threads.c_str()};
      std::ostringstream sink;
      if (run_cli(8, argv, sink, sink) != 0) return {false, "command '" + kind + "' failed: " + sink.str()};
    }
  }
  const auto reference = snapshot_dir(root / "t1");
  std::size_t bytes = 0;
  for (const auto& [name, content] : reference) bytes += content.size();
  for (const auto& v : variants) {
    if (snapshot_dir(root / v.tag) != reference) return {false, "outputs differ for variant " + v.tag};
  }
  return {true, std::to_string(reference.size()) + " files, " + std::to_string(bytes) +
                    " bytes identical across repeat and --threads 1,4,8"};
}

Verdict criterion9() {
  const TestFunctionDictionary dicts[] = {default_dictionary(1), default_dictionary(2), default_dictionary(3)};
  std::size_t sandwich_fail = 0, zero_fail = 0, triangle_fail = 0;
  for (std::uint32_t t = 0; t < 100; ++t) {
    const std::size_t d = 1 + t % 3;
    const std::size_t n = 1 + (t * 7) % 50;
    std::vector<EmpiricalMeasure> m;
    for (std::uint32_t j = 0; j < 3; ++j) {
      std::vector<double> pts(n * d);
      const double scale = std::pow(10.0, -2.0 + 3.0 * u01(9, t, 1000 + j));
      for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i] = scale * (2.0 * u01(9, t, static_cast<std::uint32_t>(j * 10000 + i)) - 1.0);
      }
      m.emplace_back(d, std::move(pts));
    }
    const auto& dict = dicts[d - 1];
    if (rho_lower(m[0], m[1], dict) > rho_upper(m[0], m[1])) ++sandwich_fail;
    if (rho_lower(m[0], m[0], dict) != 0.0 || rho_upper(m[0], m[0]) != 0.0) ++zero_fail;
    if (rho_upper(m[0], m[2]) > rho_upper(m[0], m[1]) + rho_upper(m[1], m[2])) ++triangle_fail;
  }
  return {sandwich_fail == 0 && zero_fail == 0 && triangle_fail == 0,
          "sandwich_violations=" + std::to_string(sandwich_fail) + "/100 nonzero_identical=" +
              std::to_string(zero_fail) + "/100 triangle_violations=" + std::to_string(triangle_fail) + "/100"};
}

const std::vector<std::pair<std::string, std::function<Verdict()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Verdict()>>> kAll = {
      {"strong rate, Lipschitz model", criterion1},
      {"strong rate, non-Lipschitz model", criterion2},
      {"second moment oracle", criterion3},
      {"increment scaling", criterion4},
      {"kappa_eta analytic suite", criterion5},
      {"Osgood integral", criterion6},
      {"Bihari comparison ODE", criterion7},
      {"byte-identical outputs", criterion8},
      {"metric sandwich", criterion9},
  };
  return kAll;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  } else {
    for (int i = 1; i <= 9; ++i) which.push_back(i);
  }
  bool all = true;
  for (int c : which) {
    if (c < 1 || c > 9) {
      std::cerr << "unknown criterion " << c << "\n";
      return 2;
    }
    const auto& [name, fn] = criteria()[static_cast<std::size_t>(c - 1)];
    const auto start = std::chrono::steady_clock::now();
    Verdict v{false, ""};
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char time_buf[32];
    std::snprintf(time_buf, sizeof time_buf, "%.1fs", secs);
    std::cout << "criterion " << c << " [" << name << "]: " << (v.passed ? "PASS" : "FAIL") << "  " << v.detail
              << "  (" << time_buf << ")\n";
    all = all && v.passed;
  }
  return all ? 0 : 1;
}
