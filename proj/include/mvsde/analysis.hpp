#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/measure.hpp"
#include "mvsde/models.hpp"
#include "mvsde/solver.hpp"

namespace mvsde {

struct ErrorEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Mean over particles of max over record points of |X^n - X^ref|^2, with the
/// standard error of the per-particle maxima. Both sets must share N, d and
/// the record grid bit for bit.
ErrorEstimate strong_error(const TrajectorySet& reference, const TrajectorySet& coarse);

struct RateReport {
  std::vector<unsigned> levels;
  std::vector<double> errors;
  std::vector<double> standard_errors;
  double slope = 0.0;
  double intercept = 0.0;
  /// Delta-method propagation of the per-level Monte-Carlo errors.
  double slope_standard_error = 0.0;
  std::size_t particles = 0;
  std::uint64_t seed = 0;
  std::string model_id;
};

/// Least squares fit of log2(error) against level. Needs at least three
/// levels and strictly positive errors.
RateReport fit_rate(std::span<const unsigned> levels, std::span<const double> errors,
                    std::span<const double> standard_errors = {});

struct MomentCurve {
  double p = 1.0;
  std::vector<double> times;
  std::vector<double> values;  // ensemble mean of |X_t|^(2p)
  std::vector<double> standard_errors;
  double initial_moment = 0.0;
  /// Smallest C >= 0 (up to bisection tolerance, rounded up) with
  /// values <= C (1 + initial_moment) e^(C t) everywhere.
  double fitted_c = 0.0;
  std::vector<double> envelope;
};

MomentCurve moment_curve(const TrajectorySet& traj, double p);

struct IncrementScaling {
  double p = 1.0;
  std::vector<std::size_t> lags;  // in record-grid steps
  std::vector<double> lag_times;
  std::vector<double> mean_increments;  // E|X_t - X_s|^(2p) averaged over windows
  double exponent = 0.0;
  double intercept = 0.0;
  bool degenerate_zero = false;
};

/// Log-log regression of mean increment moments on lag. Lags must be
/// increasing, shorter than the record grid, and span at least two decades.
IncrementScaling increment_scaling(const TrajectorySet& traj, double p,
                                   std::span<const std::size_t> lags);

/// Powers of two 1, 2, ..., 2^k with 2^k < records.
std::vector<std::size_t> dyadic_lags(std::size_t max_lag);

struct OsgoodResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::optional<double> closed_form;
};

/// Integral of 1/kappa over [epsilon, upper], computed on the log scale
/// x = e^-u with adaptive Gauss-Kronrod quadrature.
OsgoodResult osgood_integral(const Modulus& kappa, double epsilon, double upper = 1.0);

struct BihariReport {
  std::vector<double> times;
  std::vector<double> numeric;
  std::vector<double> closed_form;  // empty when unavailable
  bool closed_form_available = false;
  bool left_log_branch = false;
  double max_relative_error = 0.0;
};

/// Integrates z' = scale kappa(z), z(0) = epsilon on [0, horizon] with an
/// adaptive Dormand-Prince method. epsilon = 0 returns the zero path.
/// Closed forms: epsilon^(exp(-scale t)) for kappa_eta while z <= eta, and
/// epsilon e^(scale t) for the identity modulus.
BihariReport bihari_ode_check(const Modulus& kappa, double scale, double epsilon, double horizon,
                              std::size_t samples = 101);

enum class Coupling {
  kIndex,
  /// Both ensembles reordered by their first coordinate. Optimal in d = 1.
  kSorted,
};

struct LawGapCurve {
  std::vector<double> times;
  std::vector<double> rho_upper;
  std::vector<double> rho_lower;
};

/// rho_upper and rho_lower between the two empirical laws at every record
/// point. Throws if the sandwich rho_lower <= rho_upper is violated.
LawGapCurve law_gap_curve(const TrajectorySet& a, const TrajectorySet& b,
                          Coupling coupling = Coupling::kIndex,
                          const TestFunctionDictionary* dictionary = nullptr);

struct ReplayConfig {
  LawSpec law = LawSpec::point_mass({0.0});
  std::size_t particles = 256;
  unsigned level = 8;
  unsigned finest_level = 8;
  double horizon = 1.0;
  RecordSpec record;
  RunOptions run;
};

/// Runs the simulation twice from scratch; true iff all recorded bytes match.
bool uniqueness_replay(const CoefficientModel& model, const ReplayConfig& config,
                       std::uint64_t seed);

/// Mean-square gap at T between a run and the same run with particle 0's
/// initial state shifted by `delta` along the first axis (same lattice).
double perturbed_gap(const CoefficientModel& model, const ReplayConfig& config, std::uint64_t seed,
                     double delta);

}  // namespace mvsde
