#include "mvsde/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvsde/error.hpp"
#include "mvsde/random.hpp"

namespace mvsde {

namespace {

void check_eta(double eta) {
  if (!(eta > 0.0) || !(eta < std::exp(-1.0))) {
    std::ostringstream os;
    os << "kappa_eta: eta = " << eta << " is outside (0, 1/e)";
    throw ParameterError(os.str());
  }
}

/// (1 - exp(-2 theta t)) / (2 theta), continuous at theta = 0.
double relax_integral(double theta, double t) {
  if (theta == 0.0) return t;
  return -std::expm1(-2.0 * theta * t) / (2.0 * theta);
}

OracleFactory mf_ou_oracle(double theta, double alpha, double s, std::size_t d) {
  return [=](const StateVector& m0, double u0) {
    MomentOracle o;
    o.mean = [=](double t) {
      StateVector m = m0;
      const double f = std::exp((alpha - theta) * t);
      for (double& v : m) v *= f;
      return m;
    };
    double m0sq = 0.0;
    for (double v : m0) m0sq += v * v;
    // u' = -2 theta u + 2 alpha |m(t)|^2 + s^2 d
    o.second_moment = [=](double t) {
      return std::exp(-2.0 * theta * t) * (u0 + m0sq * std::expm1(2.0 * alpha * t)) +
             s * s * static_cast<double>(d) * relax_integral(theta, t);
    };
    return o;
  };
}

void fill_scaled_identity(std::span<double> out, std::size_t d, double s) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < d; ++k) out[k * d + k] = s;
}

void require_nonnegative(const char* name, double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ParameterError(std::string(name) + " must be finite and nonnegative");
  }
}

std::string describe(std::span<const double> x) {
  std::string s = "(";
  char buf[32];
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (k) s += ", ";
    s.append(buf, std::to_chars(buf, buf + sizeof buf, x[k]).ptr);
  }
  return s + ")";
}

}  // namespace

double kappa_eta(double x, double eta) {
  check_eta(eta);
  if (!(x >= 0.0)) throw DomainError("kappa_eta: argument must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x <= eta) return -x * std::log(x);
  return (-std::log(eta) - 1.0) * x + eta;
}

Modulus Modulus::kappa(double eta) {
  check_eta(eta);
  return Modulus{"kappa_eta", [eta](double x) { return kappa_eta(x, eta); }, eta, false};
}

Modulus Modulus::identity() { return Modulus{"identity", [](double x) { return x; }, {}, true}; }

Modulus Modulus::custom(std::string name, std::function<double(double)> fn) {
  return Modulus{std::move(name), std::move(fn), {}, false};
}

std::string to_string(AssumptionClass c) {
  switch (c) {
    case AssumptionClass::kH1Only: return "H1";
    case AssumptionClass::kH1H2: return "H1+H2";
    case AssumptionClass::kH1H2Prime: return "H1+H2'";
  }
  return "?";
}

StateVector drift_eval(const CoefficientModel& model, std::span<const double> x,
                       const EmpiricalMeasure& mu) {
  if (x.size() != model.dimension || mu.dimension() != model.dimension) {
    throw DimensionError("drift_eval: dimension mismatch for model '" + model.id + "'");
  }
  StateVector out(model.dimension, 0.0);
  model.drift(x, mu, out);
  for (double v : out) {
    if (!std::isfinite(v)) {
      throw ModelEvaluationError("model '" + model.id + "': non-finite drift at x = " + describe(x));
    }
  }
  return out;
}

std::vector<double> diffusion_eval(const CoefficientModel& model, std::span<const double> x,
                                   const EmpiricalMeasure& mu) {
  if (x.size() != model.dimension || mu.dimension() != model.dimension) {
    throw DimensionError("diffusion_eval: dimension mismatch for model '" + model.id + "'");
  }
  std::vector<double> out(model.dimension * model.dimension, 0.0);
  model.diffusion(x, mu, out);
  for (double v : out) {
    if (!std::isfinite(v)) {
      throw ModelEvaluationError("model '" + model.id + "': non-finite diffusion at x = " +
                                 describe(x));
    }
  }
  return out;
}

CoefficientModel make_mf_ou(double theta, double alpha, double s, std::size_t d) {
  if (d == 0) throw DimensionError("mf-ou: dimension must be positive");
  CoefficientModel m;
  m.id = "mf-ou";
  m.dimension = d;
  m.drift = [=](std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
    const auto mean = mu.mean();
    for (std::size_t k = 0; k < d; ++k) out[k] = -theta * x[k] + alpha * mean[k];
  };
  m.diffusion = [=](std::span<const double>, const EmpiricalMeasure&, std::span<double> out) {
    fill_scaled_identity(out, d, s);
  };
  m.assumption_class = AssumptionClass::kH1H2Prime;
  m.parameters = {{"theta", theta}, {"alpha", alpha}, {"s", s}};
  m.moment_oracle = mf_ou_oracle(theta, alpha, s, d);
  return m;
}

CoefficientModel make_osgood(double c, double beta, double s, double eta) {
  check_eta(eta);
  const double log_inv_eta = -std::log(eta);
  const double psi_slope = log_inv_eta - 1.0;
  const double g_eta = eta * std::sqrt(log_inv_eta);
  const double g_slope = std::sqrt(log_inv_eta) - 0.5 / std::sqrt(log_inv_eta);

  auto psi = [=](double x) {
    const double r = std::abs(x);
    double v;
    if (r == 0.0) return 0.0;
    if (r <= eta) v = -r * std::log(r);
    else v = psi_slope * r + eta;
    return std::copysign(v, x);
  };
  auto g = [=](double x) {
    const double r = std::abs(x);
    double v;
    if (r == 0.0) return 0.0;
    if (r <= eta) v = r * std::sqrt(-std::log(r));
    else v = g_eta + g_slope * (r - eta);
    return std::copysign(v, x);
  };

  CoefficientModel m;
  m.id = "osgood";
  m.dimension = 1;
  m.drift = [=](std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
    out[0] = -c * psi(x[0]) + beta * mu.mean()[0];
  };
  m.diffusion = [=](std::span<const double> x, const EmpiricalMeasure&, std::span<double> out) {
    out[0] = s * g(x[0]);
  };
  m.assumption_class = AssumptionClass::kH1H2Prime;
  m.parameters = {{"c", c}, {"beta", beta}, {"s", s}, {"eta", eta}};
  return m;
}

CoefficientModel make_sznitman(double s, std::size_t d) {
  if (d == 0) throw DimensionError("sznitman: dimension must be positive");
  CoefficientModel m;
  m.id = "sznitman";
  m.dimension = d;
  m.drift = [=](std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
    const auto mean = mu.mean();
    for (std::size_t k = 0; k < d; ++k) out[k] = mean[k] - x[k];
  };
  m.diffusion = [=](std::span<const double>, const EmpiricalMeasure&, std::span<double> out) {
    fill_scaled_identity(out, d, s);
  };
  m.assumption_class = AssumptionClass::kH1H2Prime;
  m.parameters = {{"s", s}};
  // Identical to mf-ou with theta = alpha = 1.
  m.moment_oracle = mf_ou_oracle(1.0, 1.0, s, d);
  return m;
}

CoefficientModel make_convolution_model(std::string id, std::size_t d, KernelFn drift_kernel,
                                        KernelFn diffusion_kernel, AssumptionClass declared) {
  if (d == 0) throw DimensionError("convolution model: dimension must be positive");
  CoefficientModel m;
  m.id = std::move(id);
  m.dimension = d;
  m.drift = [=](std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
    std::vector<double> term(d);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      drift_kernel(x, mu.point(i), term);
      for (std::size_t k = 0; k < d; ++k) out[k] += mu.weight(i) * term[k];
    }
  };
  m.diffusion = [=](std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
    std::vector<double> term(d * d);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      diffusion_kernel(x, mu.point(i), term);
      for (std::size_t k = 0; k < d * d; ++k) out[k] += mu.weight(i) * term[k];
    }
  };
  m.assumption_class = declared;
  return m;
}

CoefficientModel make_brownian(double s, std::size_t d) {
  CoefficientModel m = make_zero(d);
  m.id = "brownian";
  m.diffusion = [=](std::span<const double>, const EmpiricalMeasure&, std::span<double> out) {
    fill_scaled_identity(out, d, s);
  };
  m.parameters = {{"s", s}};
  m.moment_oracle = mf_ou_oracle(0.0, 0.0, s, d);
  return m;
}

CoefficientModel make_zero(std::size_t d) {
  if (d == 0) throw DimensionError("zero model: dimension must be positive");
  CoefficientModel m;
  m.id = "zero";
  m.dimension = d;
  m.drift = [](std::span<const double>, const EmpiricalMeasure&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  m.diffusion = m.drift;
  m.assumption_class = AssumptionClass::kH1H2Prime;
  m.moment_oracle = mf_ou_oracle(0.0, 0.0, 0.0, d);
  return m;
}

CoefficientModel make_quadratic_fixture(std::size_t d) {
  CoefficientModel m = make_zero(d);
  m.id = "fixture-quadratic";
  m.drift = [](std::span<const double> x, const EmpiricalMeasure&, std::span<double> out) {
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * x[k];
  };
  m.assumption_class = AssumptionClass::kH1Only;
  m.moment_oracle = {};
  return m;
}

CoefficientModel make_sqrt_fixture(std::size_t d) {
  CoefficientModel m = make_zero(d);
  m.id = "fixture-sqrt";
  m.drift = [](std::span<const double> x, const EmpiricalMeasure&, std::span<double> out) {
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::sqrt(std::abs(x[k]));
  };
  m.assumption_class = AssumptionClass::kH1H2Prime;
  m.moment_oracle = {};
  return m;
}

const std::map<std::string, double>& catalog_schema(const std::string& id) {
  static const std::map<std::string, std::map<std::string, double>> kSchemas = {
      {"mf-ou", {{"theta", 1.0}, {"alpha", 0.5}, {"s", 0.4}}},
      {"osgood", {{"c", 1.0}, {"beta", 0.25}, {"s", 0.3}, {"eta", kDefaultEta}}},
      {"sznitman", {{"s", 0.4}}},
      {"brownian", {{"s", 1.0}}},
      {"zero", {}},
      {"fixture-quadratic", {}},
      {"fixture-sqrt", {}},
  };
  const auto it = kSchemas.find(id);
  if (it == kSchemas.end()) throw ConfigError("unknown model id '" + id + "'");
  return it->second;
}

std::vector<std::string> catalog_ids() {
  return {"mf-ou", "osgood", "sznitman", "brownian", "zero", "fixture-quadratic", "fixture-sqrt"};
}

CoefficientModel make_catalog_model(const std::string& id,
                                    const std::map<std::string, double>& params, std::size_t d) {
  auto p = catalog_schema(id);
  for (const auto& [key, value] : params) {
    if (!p.contains(key)) throw ConfigError("model '" + id + "' has no parameter '" + key + "'");
    p[key] = value;
  }
  if (id == "mf-ou") {
    require_nonnegative("mf-ou s", p["s"]);
    return make_mf_ou(p["theta"], p["alpha"], p["s"], d);
  }
  if (id == "osgood") {
    if (d != 1) throw ConfigError("model 'osgood' is one-dimensional");
    require_nonnegative("osgood s", p["s"]);
    return make_osgood(p["c"], p["beta"], p["s"], p["eta"]);
  }
  if (id == "sznitman") return make_sznitman(p["s"], d);
  if (id == "brownian") return make_brownian(p["s"], d);
  if (id == "zero") return make_zero(d);
  if (id == "fixture-quadratic") return make_quadratic_fixture(d);
  return make_sqrt_fixture(d);
}

// ---- checkers --------------------------------------------------------------

namespace {

/// Random empirical measure with `atoms` points around `center`.
EmpiricalMeasure random_measure(std::uint64_t seed, std::uint32_t sample, std::size_t d,
                                std::size_t atoms, double center_scale, double spread,
                                std::uint32_t salt) {
  std::vector<double> pts(atoms * d);
  for (std::size_t k = 0; k < d; ++k) {
    const double center =
        center_scale * (2.0 * counter_uniform(seed, Stream::kChecker, sample,
                                              static_cast<std::uint32_t>(k), salt) - 1.0);
    for (std::size_t a = 0; a < atoms; ++a) {
      pts[a * d + k] = center + spread * counter_normal(seed, Stream::kChecker, sample,
                                                        static_cast<std::uint32_t>(k + d * (a + 1)),
                                                        salt + 1);
    }
  }
  return EmpiricalMeasure(d, std::move(pts));
}

double frobenius_sq(std::span<const double> m) {
  double s = 0.0;
  for (double v : m) s += v * v;
  return s;
}

/// Evaluate without the checked wrappers' exceptions; non-finite values are
/// reported by the caller as offending samples.
void raw_eval(const CoefficientModel& model, std::span<const double> x, const EmpiricalMeasure& mu,
              std::vector<double>& b, std::vector<double>& sig) {
  b.assign(model.dimension, 0.0);
  sig.assign(model.dimension * model.dimension, 0.0);
  model.drift(x, mu, b);
  model.diffusion(x, mu, sig);
}

struct PairSample {
  std::vector<double> x1, x2;
  EmpiricalMeasure mu1, mu2;
  double gap;
};

PairSample sample_pair(const PairSampleSpec& spec, std::size_t d, std::uint64_t seed,
                       std::size_t i) {
  const auto idx = static_cast<std::uint32_t>(i);
  const double frac = spec.count > 1 ? static_cast<double>(i) / static_cast<double>(spec.count - 1) : 0.0;
  const double gap = spec.max_gap * std::pow(spec.min_gap / spec.max_gap, frac);
  std::vector<double> x1(d), dir(d);
  // Base point magnitude log-uniform in [gap, base_scale] so near-origin pairs
  // are sampled at every gap size.
  for (std::size_t k = 0; k < d; ++k) {
    const auto kk = static_cast<std::uint32_t>(k);
    const double w = counter_uniform(seed, Stream::kChecker, idx, kk, 100);
    const double sign = counter_uniform(seed, Stream::kChecker, idx, kk, 101) < 0.5 ? -1.0 : 1.0;
    const double lo = std::min(gap, spec.base_scale);
    x1[k] = sign * lo * std::pow(spec.base_scale / lo, w);
    dir[k] = counter_normal(seed, Stream::kChecker, idx, kk, 102);
  }
  const double dn = norm(dir);
  std::vector<double> x2 = x1;
  for (std::size_t k = 0; k < d; ++k) x2[k] += gap * (dn > 0 ? dir[k] / dn : (k == 0 ? 1.0 : 0.0));
  const double actual_gap = [&] {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += (x2[k] - x1[k]) * (x2[k] - x1[k]);
    return std::sqrt(s);
  }();

  EmpiricalMeasure mu1 = random_measure(seed, idx, d, spec.atoms, spec.base_scale, spec.base_scale, 200);
  std::vector<double> pts = mu1.support();
  // Odd samples perturb the measure by at most `gap` per atom; even samples
  // keep it fixed so the state term is probed in isolation.
  if (i % 2 == 1) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      pts[j] += gap * (2.0 * counter_uniform(seed, Stream::kChecker, idx,
                                             static_cast<std::uint32_t>(j), 300) - 1.0);
    }
  }
  return PairSample{std::move(x1), std::move(x2), std::move(mu1),
                    EmpiricalMeasure(d, std::move(pts)), actual_gap};
}

/// Stability rule shared by all checkers.
bool stable(double first, double second) { return second <= 2.0 * first + 1e-300; }

}  // namespace

LinearGrowthReport check_linear_growth(const CoefficientModel& model, const LinearGrowthSpec& spec,
                                       std::uint64_t seed) {
  if (spec.count < 1000) throw ParameterError("check_linear_growth: need at least 1000 samples");
  if (!(spec.min_scale > 0.0) || !(spec.max_scale > spec.min_scale)) {
    throw ParameterError("check_linear_growth: scale ladder must satisfy 0 < min < max");
  }
  const std::size_t d = model.dimension;
  LinearGrowthReport rep;
  rep.samples = spec.count;
  const std::size_t half = spec.count / 2;
  std::vector<double> x(d), b, sig;
  double worst = -1.0;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const auto idx = static_cast<std::uint32_t>(i);
    const double frac = static_cast<double>(i) / static_cast<double>(spec.count - 1);
    const double scale = spec.min_scale * std::pow(spec.max_scale / spec.min_scale, frac);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = scale * (2.0 * counter_uniform(seed, Stream::kChecker, idx,
                                            static_cast<std::uint32_t>(k), 0) - 1.0);
    }
    const double spread = scale * counter_uniform(seed, Stream::kChecker, idx, 0, 1);
    const EmpiricalMeasure mu = random_measure(seed, idx, d, spec.atoms, scale, spread, 2);
    raw_eval(model, x, mu, b, sig);
    const double xn = norm(x);
    const double ratio = (frobenius_sq(b) + frobenius_sq(sig)) / (1.0 + xn * xn + lambda2_norm_squared(mu));
    if (!std::isfinite(ratio)) {
      rep.passed = false;
      rep.offending = OffendingSample{i, x, ratio};
      rep.reason = "non-finite growth ratio";
      return rep;
    }
    (i < half ? rep.first_half_max : rep.second_half_max) =
        std::max(i < half ? rep.first_half_max : rep.second_half_max, ratio);
    if (ratio > worst) {
      worst = ratio;
      rep.offending = OffendingSample{i, x, ratio};
    }
  }
  rep.fitted_l1 = std::max(rep.first_half_max, rep.second_half_max);
  rep.passed = stable(rep.first_half_max, rep.second_half_max);
  if (rep.passed) {
    rep.offending.reset();
  } else {
    std::ostringstream os;
    os << "growth ratio unstable along the scale ladder: second-half max " << rep.second_half_max
       << " exceeds twice first-half max " << rep.first_half_max;
    rep.reason = os.str();
  }
  return rep;
}

std::function<double(double)> log_gamma(double eta) {
  check_eta(eta);
  const double cap = -std::log(eta);
  return [=](double r) { return r <= eta ? -std::log(r) : cap; };
}

H2PrimeReport check_h2prime(const CoefficientModel& model, const PairSampleSpec& spec,
                            std::uint64_t seed, double eta, std::function<double(double)> gamma1,
                            std::function<double(double)> gamma2) {
  if (!gamma1) gamma1 = log_gamma(eta);
  if (!gamma2) gamma2 = log_gamma(eta);
  if (spec.count < 1000) throw ParameterError("check_h2prime: need at least 1000 pairs");
  const std::size_t d = model.dimension;
  H2PrimeReport rep;
  rep.samples = spec.count;
  const std::size_t half = spec.count / 2;
  double l1_first = 0.0, l1_second = 0.0, l2_first = 0.0, l2_second = 0.0;
  std::vector<double> b1, s1, b2, s2;
  double worst = -1.0;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const PairSample ps = sample_pair(spec, d, seed, i);
    raw_eval(model, ps.x1, ps.mu1, b1, s1);
    raw_eval(model, ps.x2, ps.mu2, b2, s2);
    const double rho = rho_upper(ps.mu1, ps.mu2);
    double db2 = 0.0, ds2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) db2 += (b1[k] - b2[k]) * (b1[k] - b2[k]);
    for (std::size_t k = 0; k < d * d; ++k) ds2 += (s1[k] - s2[k]) * (s1[k] - s2[k]);
    const double r = ps.gap;
    const double drift_ratio = std::sqrt(db2) / (r * gamma1(r) + rho);
    const double diff_ratio = ds2 / (r * r * gamma2(r) + rho * rho);
    if (!std::isfinite(drift_ratio) || !std::isfinite(diff_ratio)) {
      rep.offending = OffendingSample{i, ps.x1, std::isfinite(drift_ratio) ? diff_ratio : drift_ratio};
      rep.reason = "non-finite continuity ratio";
      return rep;
    }
    if (i < half) {
      l1_first = std::max(l1_first, drift_ratio);
      l2_first = std::max(l2_first, diff_ratio);
    } else {
      l1_second = std::max(l1_second, drift_ratio);
      l2_second = std::max(l2_second, diff_ratio);
    }
    const double w = std::max(drift_ratio, diff_ratio);
    if (w > worst) {
      worst = w;
      rep.offending = OffendingSample{i, ps.x1, w};
    }
  }
  rep.fitted_lambda1 = std::max(l1_first, l1_second);
  rep.fitted_lambda2 = std::max(l2_first, l2_second);
  const bool drift_ok = stable(l1_first, l1_second);
  const bool diff_ok = stable(l2_first, l2_second);
  rep.passed = drift_ok && diff_ok;
  if (rep.passed) {
    rep.offending.reset();
  } else {
    std::ostringstream os;
    os << (drift_ok ? "diffusion" : "drift")
       << " continuity ratio grows as the gap shrinks (first half max "
       << (drift_ok ? l2_first : l1_first) << ", second half max "
       << (drift_ok ? l2_second : l1_second) << ")";
    rep.reason = os.str();
  }
  return rep;
}

H2Report check_h2(const CoefficientModel& model, const PairSampleSpec& spec, std::uint64_t seed,
                  const Modulus& kappa1, const Modulus& kappa2) {
  if (spec.count < 1000) throw ParameterError("check_h2: need at least 1000 pairs");
  const std::size_t d = model.dimension;
  H2Report rep;
  rep.samples = spec.count;
  const std::size_t half = spec.count / 2;
  double first = 0.0, second = 0.0, worst = -1.0;
  std::vector<double> b1, s1, b2, s2;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const PairSample ps = sample_pair(spec, d, seed, i);
    raw_eval(model, ps.x1, ps.mu1, b1, s1);
    raw_eval(model, ps.x2, ps.mu2, b2, s2);
    const double rho = rho_upper(ps.mu1, ps.mu2);
    double inner = 0.0, ds2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) inner += (ps.x1[k] - ps.x2[k]) * (b1[k] - b2[k]);
    for (std::size_t k = 0; k < d * d; ++k) ds2 += (s1[k] - s2[k]) * (s1[k] - s2[k]);
    const double lhs = std::max(0.0, 2.0 * inner + ds2);
    const double rhs = kappa1(ps.gap * ps.gap) + kappa2(rho * rho);
    const double ratio = lhs / rhs;
    if (!std::isfinite(ratio)) {
      rep.offending = OffendingSample{i, ps.x1, ratio};
      rep.reason = "non-finite monotonicity ratio";
      return rep;
    }
    (i < half ? first : second) = std::max(i < half ? first : second, ratio);
    if (ratio > worst) {
      worst = ratio;
      rep.offending = OffendingSample{i, ps.x1, ratio};
    }
  }
  rep.fitted_l2 = std::max(first, second);
  rep.passed = stable(first, second);
  if (rep.passed) {
    rep.offending.reset();
  } else {
    std::ostringstream os;
    os << "monotonicity ratio grows as the gap shrinks (first half max " << first
       << ", second half max " << second << ")";
    rep.reason = os.str();
  }
  return rep;
}

}  // namespace mvsde
