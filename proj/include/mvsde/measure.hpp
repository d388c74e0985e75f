#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mvsde {

/// A point in d-dimensional Euclidean space.
using StateVector = std::vector<double>;

/// Euclidean norm of a vector.
double norm(std::span<const double> x) noexcept;

/// Finite weighted point cloud representing a probability measure on R^d.
///
/// Support points are stored row-major (N x d). Weights are nonnegative and
/// sum to one within 1e-12. The mean is computed once at construction in
/// ascending particle order and cached, so every evaluation that depends on
/// the measure only through its mean is O(d).
class EmpiricalMeasure {
 public:
  /// Uniform weights 1/N.
  EmpiricalMeasure(std::size_t dimension, std::vector<double> support);
  EmpiricalMeasure(std::size_t dimension, std::vector<double> support,
                   std::vector<double> weights);

  /// Single atom at x.
  static EmpiricalMeasure dirac(std::span<const double> x);

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> point(std::size_t i) const noexcept {
    return {support_.data() + i * dim_, dim_};
  }
  double weight(std::size_t i) const noexcept { return weights_[i]; }
  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  bool uniform() const noexcept { return uniform_; }

  /// Integral of x under the measure.
  std::span<const double> mean() const noexcept { return mean_; }

  /// Integral of phi under the measure, summed in ascending index order.
  double integrate(const std::function<double(std::span<const double>)>& phi) const;

 private:
  void validate() const;

  std::size_t dim_;
  std::vector<double> support_;
  std::vector<double> weights_;
  std::vector<double> mean_;
  bool uniform_ = false;
};

/// Squared lambda^2 norm: sum_i w_i (1 + |x_i|)^2.
double lambda2_norm_squared(const EmpiricalMeasure& mu);

/// Upper bound on rho(mu, nu) from the index coupling: sum_i w_i |x_i - y_i|.
/// Throws CouplingError unless both measures have identical size, dimension
/// and weights.
double rho_upper(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

using TestFunction = std::function<double(std::span<const double>)>;

/// Axis-aligned sampling box for Monte-Carlo norm estimates.
struct SampleBox {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t count = 1000;

  static SampleBox cube(std::size_t dimension, double half_width, std::size_t count);
};

struct TestFunctionReport {
  double sup_term = 0.0;        // max |phi(x)| / (1 + |x|)^2 over samples
  double lipschitz_term = 0.0;  // max |phi(x) - phi(y)| / |x - y| over sampled pairs
  double norm = 0.0;            // sup_term + lipschitz_term
  bool passed = false;
  std::size_t samples = 0;
};

/// Monte-Carlo estimate of the C_rho norm of phi over a box.
/// Lipschitz pairs combine consecutive samples with axis-aligned and random
/// short-range perturbations. Passes iff the estimate is <= 1 + 1e-9.
TestFunctionReport validate_test_function(const TestFunction& phi, const SampleBox& box,
                                          std::uint64_t seed);

/// Finite family of test functions with C_rho norm at most one.
class TestFunctionDictionary {
 public:
  enum class Status { kUnchecked, kPassed, kFailed };

  struct Entry {
    std::string tag;
    TestFunction fn;
    double declared_bound = 1.0;
    Status status = Status::kUnchecked;
    TestFunctionReport report;
  };

  explicit TestFunctionDictionary(std::size_t dimension) : dim_(dimension) {}

  /// Throws ParameterError if declared_bound exceeds one.
  void add(std::string tag, TestFunction fn, double declared_bound = 1.0);

  /// Validates every unchecked entry. Throws ValidationError naming the first
  /// failing entry; the remaining entries keep their status.
  void validate(const SampleBox& box, std::uint64_t seed);

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  std::size_t dim_;
  std::vector<Entry> entries_;
};

/// Default dictionary: 0.8 x_k, 0.8 clip(x_k, -R, R) and 0.8 min(|x|, R),
/// validated on [-2R, 2R]^d.
TestFunctionDictionary default_dictionary(std::size_t dimension, double radius = 10.0);

/// Lower bound on rho(mu, nu): max over dictionary entries of the integral gap.
/// Throws ValidationError if the dictionary is empty or holds an entry that has
/// not passed validation.
double rho_lower(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                 const TestFunctionDictionary& dict);

}  // namespace mvsde
