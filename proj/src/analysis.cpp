#include "mvsde/analysis.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mvsde/error.hpp"

namespace mvsde {

namespace {

void require_same_grid(const TrajectorySet& a, const TrajectorySet& b, const char* who) {
  if (a.particles != b.particles || a.dimension != b.dimension) {
    throw DimensionError(std::string(who) + ": trajectory sets differ in particle count or dimension");
  }
  if (a.times.size() != b.times.size()) {
    throw DimensionError(std::string(who) + ": record grids differ in size");
  }
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.times[i]) != std::bit_cast<std::uint64_t>(b.times[i])) {
      throw DimensionError(std::string(who) + ": record grids differ");
    }
  }
}

struct LineFit {
  double slope;
  double intercept;
};

LineFit ols(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace

ErrorEstimate strong_error(const TrajectorySet& reference, const TrajectorySet& coarse) {
  require_same_grid(reference, coarse, "strong_error");
  const std::size_t n = reference.particles, d = reference.dimension;
  std::vector<double> sups(n, 0.0);
  for (std::size_t r = 0; r < reference.records(); ++r) {
    for (std::size_t p = 0; p < n; ++p) {
      double e2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = coarse.at(r, p, k) - reference.at(r, p, k);
        e2 += diff * diff;
      }
      sups[p] = std::max(sups[p], e2);
    }
  }
  ErrorEstimate est;
  for (double s : sups) est.value += s;
  est.value /= static_cast<double>(n);
  if (n > 1) {
    double var = 0.0;
    for (double s : sups) var += (s - est.value) * (s - est.value);
    var /= static_cast<double>(n - 1);
    est.standard_error = std::sqrt(var / static_cast<double>(n));
  }
  return est;
}

RateReport fit_rate(std::span<const unsigned> levels, std::span<const double> errors,
                    std::span<const double> standard_errors) {
  if (levels.size() != errors.size()) throw DimensionError("fit_rate: levels and errors differ in length");
  if (!standard_errors.empty() && standard_errors.size() != errors.size()) {
    throw DimensionError("fit_rate: standard errors differ in length");
  }
  if (levels.size() < 3) throw ParameterError("fit_rate: need at least three levels");
  RateReport rep;
  rep.levels.assign(levels.begin(), levels.end());
  rep.errors.assign(errors.begin(), errors.end());
  rep.standard_errors.assign(standard_errors.begin(), standard_errors.end());
  if (rep.standard_errors.empty()) rep.standard_errors.assign(errors.size(), 0.0);

  std::vector<double> x(levels.size()), y(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(errors[i] > 0.0) || !std::isfinite(errors[i])) {
      std::ostringstream os;
      os << "fit_rate: error at level " << levels[i] << " is not positive, cannot take a logarithm";
      throw DomainError(os.str());
    }
    x[i] = static_cast<double>(levels[i]);
    y[i] = std::log2(errors[i]);
  }
  const LineFit fit = ols(x, y);
  rep.slope = fit.slope;
  rep.intercept = fit.intercept;

  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double sxx = 0.0;
  for (double v : x) sxx += (v - mx) * (v - mx);
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = (x[i] - mx) / sxx;
    const double sy = rep.standard_errors[i] / (errors[i] * std::log(2.0));
    var += c * c * sy * sy;
  }
  rep.slope_standard_error = std::sqrt(var);
  return rep;
}

MomentCurve moment_curve(const TrajectorySet& traj, double p) {
  if (!(p >= 1.0)) throw ParameterError("moment_curve: order p must be at least 1");
  MomentCurve mc;
  mc.p = p;
  mc.times = traj.times;
  const std::size_t n = traj.particles, d = traj.dimension;
  std::vector<double> vals(n);
  for (std::size_t r = 0; r < traj.records(); ++r) {
    double mean = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) r2 += traj.at(r, q, k) * traj.at(r, q, k);
      vals[q] = std::pow(r2, p);
      if (!std::isfinite(vals[q])) {
        throw DomainError("moment_curve: |X|^(2p) overflowed; use a smaller order p");
      }
      mean += vals[q];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double se = n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    mc.values.push_back(mean);
    mc.standard_errors.push_back(se);
  }
  mc.initial_moment = mc.values.front();

  const double base = 1.0 + mc.initial_moment;
  auto dominates = [&](double c) {
    for (std::size_t i = 0; i < mc.times.size(); ++i) {
      if (c * base * std::exp(c * mc.times[i]) < mc.values[i]) return false;
    }
    return true;
  };
  double lo = 0.0, hi = 0.0;
  if (!dominates(0.0)) {
    hi = 1.0;
    int doublings = 0;
    while (!dominates(hi)) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 60) throw Error("moment_curve: envelope fit did not converge");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (dominates(mid) ? hi : lo) = mid;
    }
  }
  mc.fitted_c = hi;
  for (double t : mc.times) mc.envelope.push_back(hi * base * std::exp(hi * t));
  return mc;
}

std::vector<std::size_t> dyadic_lags(std::size_t max_lag) {
  std::vector<std::size_t> lags;
  for (std::size_t l = 1; l <= max_lag; l *= 2) lags.push_back(l);
  return lags;
}

IncrementScaling increment_scaling(const TrajectorySet& traj, double p,
                                   std::span<const std::size_t> lags) {
  if (!(p >= 1.0)) throw ParameterError("increment_scaling: order p must be at least 1");
  if (lags.size() < 2) throw ParameterError("increment_scaling: need at least two lags");
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] == 0 || (i > 0 && lags[i] <= lags[i - 1])) {
      throw ParameterError("increment_scaling: lags must be positive and strictly increasing");
    }
  }
  if (lags.back() >= traj.records()) throw ParameterError("increment_scaling: lag exceeds the record grid");
  if (static_cast<double>(lags.back()) < 100.0 * static_cast<double>(lags.front())) {
    throw ParameterError("increment_scaling: lags must span at least two decades");
  }
  IncrementScaling out;
  out.p = p;
  out.lags.assign(lags.begin(), lags.end());
  const std::size_t n = traj.particles, d = traj.dimension;
  const double dt = traj.times[1] - traj.times[0];
  for (std::size_t lag : lags) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + lag < traj.records(); ++r) {
      for (std::size_t q = 0; q < n; ++q) {
        double r2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = traj.at(r + lag, q, k) - traj.at(r, q, k);
          r2 += diff * diff;
        }
        sum += std::pow(r2, p);
        ++count;
      }
    }
    out.lag_times.push_back(dt * static_cast<double>(lag));
    out.mean_increments.push_back(sum / static_cast<double>(count));
  }
  const bool all_zero = std::all_of(out.mean_increments.begin(), out.mean_increments.end(),
                                    [](double v) { return v == 0.0; });
  if (all_zero) {
    out.degenerate_zero = true;
    out.exponent = std::nan("");
    out.intercept = std::nan("");
    return out;
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (!(out.mean_increments[i] > 0.0)) {
      throw DomainError("increment_scaling: some but not all lags have zero increments");
    }
    lx.push_back(std::log(out.lag_times[i]));
    ly.push_back(std::log(out.mean_increments[i]));
  }
  const LineFit fit = ols(lx, ly);
  out.exponent = fit.slope;
  out.intercept = fit.intercept;
  return out;
}

OsgoodResult osgood_integral(const Modulus& kappa, double epsilon, double upper) {
  if (!(epsilon > 0.0) || !(epsilon < upper)) throw DomainError("osgood_integral: need 0 < epsilon < upper");
  // x = e^-u, dx / kappa(x) = x / kappa(x) du.
  auto integrand = [&](double u) {
    const double x = std::exp(-u);
    const double k = kappa(x);
    if (!(k > 0.0)) {
      std::ostringstream os;
      os.precision(17);
      os << "osgood_integral: modulus '" << kappa.name << "' is not positive at x = " << x;
      throw DomainError(os.str());
    }
    return x / k;
  };
  const double a = -std::log(upper);
  const double b = -std::log(epsilon);
  OsgoodResult res;
  res.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 20, 1e-13,
                                                                           &res.error_estimate);
  if (kappa.eta && upper <= *kappa.eta) {
    res.closed_form = std::log(std::log(1.0 / epsilon)) - std::log(std::log(1.0 / upper));
  } else if (kappa.linear) {
    res.closed_form = std::log(upper / epsilon);
  }
  return res;
}

BihariReport bihari_ode_check(const Modulus& kappa, double scale, double epsilon, double horizon,
                              std::size_t samples) {
  if (!(epsilon >= 0.0)) throw DomainError("bihari_ode_check: initial value must be nonnegative");
  if (!(horizon > 0.0) || samples < 2) throw ParameterError("bihari_ode_check: need horizon > 0 and two samples");
  BihariReport rep;
  for (std::size_t i = 0; i < samples; ++i) {
    rep.times.push_back(horizon * static_cast<double>(i) / static_cast<double>(samples - 1));
  }
  if (epsilon == 0.0) {
    // kappa(0) = 0, so z = 0 solves the equation; nothing to integrate.
    rep.numeric.assign(samples, 0.0);
    rep.closed_form.assign(samples, 0.0);
    rep.closed_form_available = true;
    return rep;
  }

  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 1>;
  auto rhs = [&](const State& z, State& dz, double) { dz[0] = scale * kappa(std::max(z[0], 0.0)); };
  State z{epsilon};
  auto stepper = odeint::make_dense_output(1e-300, 1e-13, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_times(stepper, rhs, z, rep.times.begin(), rep.times.end(), horizon / 1e4,
                          [&](const State& s, double) { rep.numeric.push_back(s[0]); });

  if (kappa.eta) {
    const double end_value = std::pow(epsilon, std::exp(-scale * horizon));
    rep.left_log_branch = end_value > *kappa.eta || epsilon > *kappa.eta;
    rep.closed_form_available = !rep.left_log_branch;
    if (rep.closed_form_available) {
      for (double t : rep.times) rep.closed_form.push_back(std::pow(epsilon, std::exp(-scale * t)));
    }
  } else if (kappa.linear) {
    rep.closed_form_available = true;
    for (double t : rep.times) rep.closed_form.push_back(epsilon * std::exp(scale * t));
  }
  if (rep.closed_form_available) {
    for (std::size_t i = 0; i < samples; ++i) {
      rep.max_relative_error = std::max(
          rep.max_relative_error, std::abs(rep.numeric[i] - rep.closed_form[i]) / rep.closed_form[i]);
    }
  }
  return rep;
}

namespace {

EmpiricalMeasure sorted_measure(const TrajectorySet& t, std::size_t record) {
  const std::size_t n = t.particles, d = t.dimension;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t.at(record, a, 0) < t.at(record, b, 0); });
  std::vector<double> pts(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) pts[i * d + k] = t.at(record, order[i], k);
  }
  return EmpiricalMeasure(d, std::move(pts));
}

}  // namespace

LawGapCurve law_gap_curve(const TrajectorySet& a, const TrajectorySet& b, Coupling coupling,
                          const TestFunctionDictionary* dictionary) {
  require_same_grid(a, b, "law_gap_curve");
  std::optional<TestFunctionDictionary> owned;
  if (!dictionary) {
    owned.emplace(default_dictionary(a.dimension));
    dictionary = &*owned;
  }
  LawGapCurve out;
  out.times = a.times;
  for (std::size_t r = 0; r < a.records(); ++r) {
    const EmpiricalMeasure mu = coupling == Coupling::kSorted ? sorted_measure(a, r) : a.measure(r);
    const EmpiricalMeasure nu = coupling == Coupling::kSorted ? sorted_measure(b, r) : b.measure(r);
    const double up = rho_upper(mu, nu);
    const double lo = rho_lower(mu, nu, *dictionary);
    if (lo > up * (1.0 + 1e-12) + 1e-300) {
      std::ostringstream os;
      os.precision(17);
      os << "law_gap_curve: rho_lower " << lo << " exceeds rho_upper " << up << " at t = " << a.times[r];
      throw Error(os.str());
    }
    out.rho_upper.push_back(up);
    out.rho_lower.push_back(lo);
  }
  return out;
}

namespace {

TrajectorySet replay_once(const CoefficientModel& model, const ReplayConfig& cfg, std::uint64_t seed,
                          double delta) {
  ParticleEnsemble init = sample_initial(cfg.law, cfg.particles, seed);
  init.states[0] += delta;
  LatticeOptions lo;
  lo.threads = cfg.run.threads;
  const BrownianLattice lattice(seed, cfg.particles, model.dimension, cfg.finest_level, cfg.horizon, lo);
  return em_run(model, init, cfg.level, lattice, cfg.record, cfg.run);
}

}  // namespace

bool uniqueness_replay(const CoefficientModel& model, const ReplayConfig& config, std::uint64_t seed) {
  const TrajectorySet a = replay_once(model, config, seed, 0.0);
  const TrajectorySet b = replay_once(model, config, seed, 0.0);
  if (a.states.size() != b.states.size() || a.times.size() != b.times.size()) return false;
  auto same_bits = [](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(x[i]) != std::bit_cast<std::uint64_t>(y[i])) return false;
    }
    return true;
  };
  return same_bits(a.states, b.states) && same_bits(a.times, b.times);
}

double perturbed_gap(const CoefficientModel& model, const ReplayConfig& config, std::uint64_t seed,
                     double delta) {
  const TrajectorySet a = replay_once(model, config, seed, 0.0);
  const TrajectorySet b = replay_once(model, config, seed, delta);
  const std::size_t last = a.records() - 1;
  double s = 0.0;
  for (std::size_t p = 0; p < a.particles; ++p) {
    for (std::size_t k = 0; k < a.dimension; ++k) {
      const double diff = a.at(last, p, k) - b.at(last, p, k);
      s += diff * diff;
    }
  }
  return s / static_cast<double>(a.particles);
}

}  // namespace mvsde
