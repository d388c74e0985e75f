#include "mvsde/measure.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvsde/error.hpp"
#include "mvsde/random.hpp"

namespace mvsde {

namespace {
std::vector<double> weighted_mean(std::size_t dim, const std::vector<double>& support,
                                  const std::vector<double>& weights) {
  std::vector<double> m(dim, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) m[k] += weights[i] * support[i * dim + k];
  }
  return m;
}
}  // namespace

double norm(std::span<const double> x) noexcept {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t dimension, std::vector<double> support)
    : dim_(dimension), support_(std::move(support)) {
  if (dim_ == 0) throw DimensionError("empirical measure: dimension must be positive");
  const std::size_t n = support_.size() / dim_;
  weights_.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  uniform_ = true;
  validate();
  mean_ = weighted_mean(dim_, support_, weights_);
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t dimension, std::vector<double> support,
                                   std::vector<double> weights)
    : dim_(dimension), support_(std::move(support)), weights_(std::move(weights)) {
  if (dim_ == 0) throw DimensionError("empirical measure: dimension must be positive");
  validate();
  mean_ = weighted_mean(dim_, support_, weights_);
  uniform_ = std::all_of(weights_.begin(), weights_.end(),
                         [&](double w) { return w == weights_.front(); });
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::span<const double> x) {
  return EmpiricalMeasure(x.size(), std::vector<double>(x.begin(), x.end()));
}

void EmpiricalMeasure::validate() const {
  if (support_.size() % dim_ != 0) {
    throw DimensionError("empirical measure: support length is not a multiple of the dimension");
  }
  const std::size_t n = support_.size() / dim_;
  if (n == 0) throw ValidationError("empirical measure: support must hold at least one point");
  if (weights_.size() != n) {
    throw DimensionError("empirical measure: weight count does not match support size");
  }
  // Neumaier summation: N copies of fl(1/N) sum to 1 within 2^-53 exactly,
  // but a naive running sum drifts by O(N) ulps.
  double total = 0.0, carry = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      std::ostringstream os;
      os << "empirical measure: weight " << i << " is negative or non-finite";
      throw ValidationError(os.str());
    }
    const double t = total + weights_[i];
    carry += std::abs(total) >= weights_[i] ? (total - t) + weights_[i] : (weights_[i] - t) + total;
    total = t;
    for (std::size_t k = 0; k < dim_; ++k) {
      if (!std::isfinite(support_[i * dim_ + k])) {
        std::ostringstream os;
        os << "empirical measure: particle " << i << " has a non-finite coordinate";
        throw ValidationError(os.str());
      }
    }
  }
  total += carry;
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "empirical measure: weights sum to " << total << ", expected 1";
    throw ValidationError(os.str());
  }
}

double EmpiricalMeasure::integrate(
    const std::function<double(std::span<const double>)>& phi) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * phi(point(i));
  return s;
}

double lambda2_norm_squared(const EmpiricalMeasure& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double r = 1.0 + norm(mu.point(i));
    s += mu.weight(i) * r * r;
  }
  if (!std::isfinite(s)) throw ValidationError("lambda2 norm is not finite");
  return s;
}

double rho_upper(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dimension() != nu.dimension()) {
    throw CouplingError("rho_upper: measures live in different dimensions");
  }
  if (mu.size() != nu.size()) {
    throw CouplingError("rho_upper: index coupling needs equal support sizes");
  }
  const std::size_t d = mu.dimension();
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) != nu.weight(i)) {
      std::ostringstream os;
      os << "rho_upper: weights differ at index " << i << ", no index coupling available";
      throw CouplingError(os.str());
    }
    const auto x = mu.point(i);
    const auto y = nu.point(i);
    double dist2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = x[k] - y[k];
      dist2 += diff * diff;
    }
    s += mu.weight(i) * std::sqrt(dist2);
  }
  return s;
}

SampleBox SampleBox::cube(std::size_t dimension, double half_width, std::size_t count) {
  return SampleBox{std::vector<double>(dimension, -half_width),
                   std::vector<double>(dimension, half_width), count};
}

TestFunctionReport validate_test_function(const TestFunction& phi, const SampleBox& box,
                                          std::uint64_t seed) {
  if (box.count < 100) throw ParameterError("validate_test_function: need at least 100 samples");
  if (box.lower.size() != box.upper.size() || box.lower.empty()) {
    throw DimensionError("validate_test_function: malformed sample box");
  }
  const std::size_t d = box.lower.size();
  auto coord = [&](std::size_t sample, std::size_t k, std::uint32_t salt) {
    const double u = counter_uniform(seed, Stream::kValidation, static_cast<std::uint32_t>(sample),
                                     static_cast<std::uint32_t>(k), salt);
    return box.lower[k] + (box.upper[k] - box.lower[k]) * u;
  };
  auto eval = [&](std::span<const double> x) {
    const double v = phi(x);
    if (!std::isfinite(v)) {
      throw ValidationError("validate_test_function: test function returned a non-finite value");
    }
    return v;
  };

  TestFunctionReport rep;
  rep.samples = box.count;
  std::vector<double> x(d), prev(d), y(d);
  double prev_value = 0.0;
  auto lip_update = [&](std::span<const double> a, double fa, std::span<const double> b,
                        double fb) {
    double dist2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) dist2 += (a[k] - b[k]) * (a[k] - b[k]);
    if (dist2 > 0.0) rep.lipschitz_term = std::max(rep.lipschitz_term, std::abs(fa - fb) / std::sqrt(dist2));
  };

  for (std::size_t i = 0; i < box.count; ++i) {
    for (std::size_t k = 0; k < d; ++k) x[k] = coord(i, k, 0);
    const double fx = eval(x);
    const double r = 1.0 + norm(x);
    rep.sup_term = std::max(rep.sup_term, std::abs(fx) / (r * r));
    if (i > 0) lip_update(x, fx, prev, prev_value);

    // Axis-aligned short step along one coordinate.
    const std::size_t axis = i % d;
    const double h = 1e-3 * (1.0 + std::abs(x[axis]));
    y = x;
    y[axis] += h;
    lip_update(x, fx, y, eval(y));

    // Random short step in a random direction.
    for (std::size_t k = 0; k < d; ++k) {
      y[k] = x[k] + 1e-2 * (2.0 * counter_uniform(seed, Stream::kValidation,
                                                  static_cast<std::uint32_t>(i),
                                                  static_cast<std::uint32_t>(k), 1) - 1.0);
    }
    lip_update(x, fx, y, eval(y));

    prev = x;
    prev_value = fx;
  }
  rep.norm = rep.sup_term + rep.lipschitz_term;
  rep.passed = rep.norm <= 1.0 + 1e-9;
  return rep;
}

void TestFunctionDictionary::add(std::string tag, TestFunction fn, double declared_bound) {
  if (!(declared_bound > 0.0) || declared_bound > 1.0) {
    throw ParameterError("test function '" + tag + "' declares a C_rho bound outside (0, 1]");
  }
  entries_.push_back(Entry{std::move(tag), std::move(fn), declared_bound, Status::kUnchecked, {}});
}

void TestFunctionDictionary::validate(const SampleBox& box, std::uint64_t seed) {
  if (box.lower.size() != dim_) throw DimensionError("dictionary: sample box dimension mismatch");
  std::string first_failure;
  for (auto& e : entries_) {
    if (e.status != Status::kUnchecked) continue;
    e.report = validate_test_function(e.fn, box, seed);
    e.status = (e.report.passed && e.report.norm <= e.declared_bound + 1e-9) ? Status::kPassed
                                                                             : Status::kFailed;
    if (e.status == Status::kFailed && first_failure.empty()) first_failure = e.tag;
  }
  if (!first_failure.empty()) {
    throw ValidationError("test function '" + first_failure + "' failed C_rho validation");
  }
}

TestFunctionDictionary default_dictionary(std::size_t dimension, double radius) {
  if (dimension == 0) throw DimensionError("default_dictionary: dimension must be positive");
  if (!(radius > 0.0)) throw ParameterError("default_dictionary: radius must be positive");
  TestFunctionDictionary dict(dimension);
  // Each entry has Lipschitz constant 0.8 and weighted sup at most 0.8 / 4.
  for (std::size_t k = 0; k < dimension; ++k) {
    dict.add("proj" + std::to_string(k), [k](std::span<const double> x) { return 0.8 * x[k]; });
  }
  for (std::size_t k = 0; k < dimension; ++k) {
    dict.add("ramp" + std::to_string(k), [k, radius](std::span<const double> x) {
      return 0.8 * std::clamp(x[k], -radius, radius);
    });
  }
  dict.add("radial", [radius](std::span<const double> x) { return 0.8 * std::min(norm(x), radius); });
  dict.validate(SampleBox::cube(dimension, 2.0 * radius, 2000), 0x5eed);
  return dict;
}

double rho_lower(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                 const TestFunctionDictionary& dict) {
  if (dict.empty()) throw ValidationError("rho_lower: dictionary is empty");
  if (mu.dimension() != dict.dimension() || nu.dimension() != dict.dimension()) {
    throw DimensionError("rho_lower: dictionary dimension does not match the measures");
  }
  double best = 0.0;
  for (const auto& e : dict.entries()) {
    if (e.status != TestFunctionDictionary::Status::kPassed) {
      throw ValidationError("rho_lower: test function '" + e.tag + "' has not passed validation");
    }
    best = std::max(best, std::abs(mu.integrate(e.fn) - nu.integrate(e.fn)));
  }
  return best;
}

}  // namespace mvsde
