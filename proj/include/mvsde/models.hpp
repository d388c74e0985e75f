#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/measure.hpp"

namespace mvsde {

/// Default log-branch width e^-2.
inline constexpr double kDefaultEta = 0.1353352832366127;

/// Concave modulus kappa_eta: 0 at 0, x log(1/x) on (0, eta], and the
/// tangent line (log(1/eta) - 1) x + eta beyond. Requires 0 < eta < 1/e.
double kappa_eta(double x, double eta = kDefaultEta);

/// A named concave modulus. Closed forms in the analysis module are keyed off
/// `eta` (set only for kappa_eta) and `linear`.
struct Modulus {
  std::string name;
  std::function<double(double)> fn;
  std::optional<double> eta;
  bool linear = false;

  double operator()(double x) const { return fn(x); }

  static Modulus kappa(double eta = kDefaultEta);
  static Modulus identity();
  static Modulus custom(std::string name, std::function<double(double)> fn);
};

enum class AssumptionClass { kH1Only, kH1H2, kH1H2Prime };

std::string to_string(AssumptionClass c);

/// Closed-form first and second moments of a model started from a law with
/// mean m0 and E|xi|^2 = u0.
struct MomentOracle {
  std::function<StateVector(double)> mean;
  std::function<double(double)> second_moment;
};

using DriftFn =
    std::function<void(std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out)>;
/// Writes a d x d matrix in row-major order.
using DiffusionFn = DriftFn;
using OracleFactory = std::function<MomentOracle(const StateVector& m0, double u0)>;

/// Drift/diffusion pair (b, sigma) with its declared assumption class.
/// Instances are immutable after construction and safe to evaluate concurrently.
struct CoefficientModel {
  std::string id;
  std::size_t dimension = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  AssumptionClass assumption_class = AssumptionClass::kH1Only;
  std::map<std::string, double> parameters;
  OracleFactory moment_oracle;  // empty if the model has no closed form

  bool has_moment_oracle() const { return static_cast<bool>(moment_oracle); }
};

/// Checked evaluation: dimension match and finite output.
StateVector drift_eval(const CoefficientModel& model, std::span<const double> x,
                       const EmpiricalMeasure& mu);
std::vector<double> diffusion_eval(const CoefficientModel& model, std::span<const double> x,
                                   const EmpiricalMeasure& mu);

// ---- catalog --------------------------------------------------------------

/// Mean-field OU: b = -theta x + alpha mean(mu), sigma = s I.
CoefficientModel make_mf_ou(double theta, double alpha, double s, std::size_t dimension = 1);

/// One-dimensional log-Lipschitz model: b = -c psi(x) + beta mean(mu) with
/// psi(x) = sign(x) kappa_eta(|x|), and sigma = s sign(x) g(|x|) with
/// g(r) = r sqrt(log(1/r)) on (0, eta] continued by its tangent line.
CoefficientModel make_osgood(double c, double beta, double s, double eta = kDefaultEta);

/// Convolution drift b(x, mu) = integral (y - x) mu(dy) = mean(mu) - x, sigma = s I.
CoefficientModel make_sznitman(double s, std::size_t dimension = 1);

/// General convolution model: b(x, mu) = integral kernel_b(x, y) mu(dy) and
/// likewise for sigma. Cost is O(N) per evaluation.
using KernelFn = std::function<void(std::span<const double> x, std::span<const double> y,
                                    std::span<double> out)>;
CoefficientModel make_convolution_model(std::string id, std::size_t dimension, KernelFn drift_kernel,
                                        KernelFn diffusion_kernel,
                                        AssumptionClass declared = AssumptionClass::kH1H2Prime);

/// b = 0, sigma = s I.
CoefficientModel make_brownian(double s, std::size_t dimension = 1);
/// b = 0, sigma = 0.
CoefficientModel make_zero(std::size_t dimension = 1);
/// Fixture violating linear growth: b_k = x_k^2, sigma = 0.
CoefficientModel make_quadratic_fixture(std::size_t dimension = 1);
/// Fixture violating the log-Lipschitz condition: b_k = sqrt(|x_k|), sigma = 0.
CoefficientModel make_sqrt_fixture(std::size_t dimension = 1);

/// Parameter names and defaults for a catalog id.
const std::map<std::string, double>& catalog_schema(const std::string& id);
std::vector<std::string> catalog_ids();

/// Builds a catalog model from string id and parameter overrides. Throws
/// ConfigError for unknown ids or parameter names.
CoefficientModel make_catalog_model(const std::string& id,
                                    const std::map<std::string, double>& params,
                                    std::size_t dimension = 1);

// ---- assumption checkers ---------------------------------------------------
//
// Sampling-based falsifiers. A pass means no violation was found on the
// recorded sample ladder; it is not a proof.

struct LinearGrowthSpec {
  double min_scale = 1e-2;
  double max_scale = 1e6;
  std::size_t count = 2000;
  std::size_t atoms = 8;
};

struct OffendingSample {
  std::size_t index = 0;
  StateVector x;
  double ratio = 0.0;
};

struct LinearGrowthReport {
  bool passed = false;
  double fitted_l1 = 0.0;
  double first_half_max = 0.0;
  double second_half_max = 0.0;
  std::size_t samples = 0;
  std::optional<OffendingSample> offending;
  std::string reason;
};

/// Ratio (|b|^2 + ||sigma||^2) / (1 + |x|^2 + ||mu||^2) along a geometric
/// scale ladder. Passes iff every ratio is finite and the second-half maximum
/// is at most twice the first-half maximum.
LinearGrowthReport check_linear_growth(const CoefficientModel& model, const LinearGrowthSpec& spec,
                                       std::uint64_t seed);

struct PairSampleSpec {
  double max_gap = 1.0;
  double min_gap = 1e-10;
  std::size_t count = 4000;
  std::size_t atoms = 8;
  double base_scale = 1.0;
};

struct H2PrimeReport {
  bool passed = false;
  double fitted_lambda1 = 0.0;
  double fitted_lambda2 = 0.0;
  std::size_t samples = 0;
  /// rho is replaced by the coupling bound rho_upper; exact for mean-dependent models.
  std::string measure_surrogate = "rho_upper";
  std::optional<OffendingSample> offending;
  std::string reason;
};

/// gamma(r) = log(1/r) for r <= eta and log(1/eta) beyond.
std::function<double(double)> log_gamma(double eta = kDefaultEta);

/// Ratios |db| / (|dx| gamma1(|dx|) + rho_upper) and
/// ||dsigma||^2 / (|dx|^2 gamma2(|dx|) + rho_upper^2) over pairs whose gap
/// decreases geometrically from max_gap to min_gap.
H2PrimeReport check_h2prime(const CoefficientModel& model, const PairSampleSpec& spec,
                            std::uint64_t seed, double eta = kDefaultEta,
                            std::function<double(double)> gamma1 = {},
                            std::function<double(double)> gamma2 = {});

struct H2Report {
  bool passed = false;
  double fitted_l2 = 0.0;
  std::size_t samples = 0;
  std::string measure_surrogate = "rho_upper";
  std::optional<OffendingSample> offending;
  std::string reason;
};

/// One-sided monotonicity ratio
/// (2<dx, db> + ||dsigma||^2)_+ / (kappa1(|dx|^2) + kappa2(rho_upper^2)).
H2Report check_h2(const CoefficientModel& model, const PairSampleSpec& spec, std::uint64_t seed,
                  const Modulus& kappa1, const Modulus& kappa2);

}  // namespace mvsde
