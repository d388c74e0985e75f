#include <doctest.h>

#include <cmath>
#include <limits>

#include "mvsde/error.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/random.hpp"

using namespace mvsde;

namespace {

double uniform(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  return counter_uniform(seed, Stream::kValidation, a, b, 0);
}

// Random index-coupled triple of uniform measures.
std::vector<EmpiricalMeasure> coupled(std::uint32_t trial, std::size_t count) {
  const std::size_t d = 1 + trial % 3;
  const std::size_t n = 1 + trial % 17;
  std::vector<EmpiricalMeasure> out;
  for (std::size_t m = 0; m < count; ++m) {
    std::vector<double> pts(n * d);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      pts[i] = 6.0 * uniform(99, trial, static_cast<std::uint32_t>(m * 1000 + i)) - 3.0;
    }
    out.emplace_back(d, std::move(pts));
  }
  return out;
}

}  // namespace

TEST_CASE("lambda2 norm examples") {
  CHECK(lambda2_norm_squared(EmpiricalMeasure(1, {0.0})) == 1.0);
  CHECK(lambda2_norm_squared(EmpiricalMeasure(2, {0.6, 0.8})) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(lambda2_norm_squared(EmpiricalMeasure(3, {0, 0, 0, 2, 0, 0}, {0.5, 0.5})) == 5.0);
  // Grows as (1 + |x|)^2 for a single atom.
  for (double r : {0.5, 3.0, 100.0}) {
    CHECK(lambda2_norm_squared(EmpiricalMeasure(1, {-r})) == doctest::Approx((1 + r) * (1 + r)));
  }
  for (std::uint32_t t = 0; t < 50; ++t) CHECK(lambda2_norm_squared(coupled(t, 1)[0]) >= 1.0);
}

TEST_CASE("measure invariants are enforced") {
  CHECK_THROWS_AS(EmpiricalMeasure(1, {}), Error);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {0.5, 0.6}), ValidationError);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {1.5, -0.5}), ValidationError);
  CHECK_THROWS_AS(EmpiricalMeasure(2, {0.0, 1.0, 2.0}), DimensionError);
  try {
    EmpiricalMeasure(1, {0.0, 1.0, std::numeric_limits<double>::quiet_NaN()});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("particle 2") != std::string::npos);
  }
  // Many uniform weights still sum to one within tolerance.
  CHECK_NOTHROW(EmpiricalMeasure(1, std::vector<double>(1000003, 0.25)));
  const EmpiricalMeasure mu(1, {0.0, 2.0});
  CHECK(mu.mean()[0] == 1.0);
}

TEST_CASE("rho_upper examples") {
  const EmpiricalMeasure mu(2, {1.0, 2.0, 3.0, 4.0});
  CHECK(rho_upper(mu, mu) == 0.0);
  CHECK(rho_upper(EmpiricalMeasure(2, {0.0, 0.0}), EmpiricalMeasure(2, {1.0, 0.0})) == 1.0);
  CHECK(rho_upper(EmpiricalMeasure(1, {0.0, 1.0}), EmpiricalMeasure(1, {0.5, 1.5})) == 0.5);
  CHECK_THROWS_AS(rho_upper(EmpiricalMeasure(1, {0.0}), EmpiricalMeasure(1, {0.0, 1.0})), CouplingError);
  CHECK_THROWS_AS(rho_upper(EmpiricalMeasure(1, {0.0, 1.0}, {0.25, 0.75}), EmpiricalMeasure(1, {0.0, 1.0})),
                  CouplingError);
}

TEST_CASE("test function validation") {
  const SampleBox box = SampleBox::cube(1, 5.0, 1000);
  const auto zero = validate_test_function([](std::span<const double>) { return 0.0; }, box, 1);
  CHECK(zero.passed);
  CHECK(zero.norm == 0.0);

  const auto id = validate_test_function([](std::span<const double> x) { return x[0]; }, box, 1);
  CHECK_FALSE(id.passed);
  CHECK(id.norm > 1.2);

  const auto scaled = validate_test_function([](std::span<const double> x) { return 0.8 * x[0]; }, box, 1);
  CHECK(scaled.passed);
  CHECK(scaled.norm == doctest::Approx(1.0).epsilon(1e-3));

  CHECK_THROWS_AS(validate_test_function([](std::span<const double>) { return 0.0; },
                                         SampleBox::cube(1, 1.0, 99), 1),
                  ParameterError);
  CHECK_THROWS_AS(validate_test_function([](std::span<const double>) { return std::nan(""); }, box, 1),
                  ValidationError);
}

TEST_CASE("rho_lower examples and dictionary guards") {
  TestFunctionDictionary dict(1);
  dict.add("0.8x", [](std::span<const double> x) { return 0.8 * x[0]; });
  dict.validate(SampleBox::cube(1, 5.0, 1000), 3);
  CHECK(rho_lower(EmpiricalMeasure(1, {0.0}), EmpiricalMeasure(1, {1.0}), dict) == doctest::Approx(0.8));
  const EmpiricalMeasure mu(1, {0.3, -2.0});
  CHECK(rho_lower(mu, mu, dict) == 0.0);

  TestFunctionDictionary empty(1);
  CHECK_THROWS_AS(rho_lower(mu, mu, empty), ValidationError);

  TestFunctionDictionary unchecked(1);
  unchecked.add("half", [](std::span<const double> x) { return 0.5 * x[0]; });
  CHECK_THROWS_AS(rho_lower(mu, mu, unchecked), ValidationError);

  TestFunctionDictionary bad(1);
  bad.add("identity", [](std::span<const double> x) { return x[0]; });
  try {
    bad.validate(SampleBox::cube(1, 5.0, 1000), 3);
    FAIL("expected validation failure");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("identity") != std::string::npos);
  }
  CHECK_THROWS_AS(bad.add("big", [](std::span<const double>) { return 0.0; }, 1.5), ParameterError);
}

TEST_CASE("default dictionary validates in several dimensions") {
  for (std::size_t d : {1, 2, 3}) {
    const TestFunctionDictionary dict = default_dictionary(d);
    CHECK(dict.size() == 2 * d + 1);
    for (const auto& e : dict.entries()) CHECK(e.status == TestFunctionDictionary::Status::kPassed);
  }
}

TEST_CASE("metric bracket properties on random coupled measures") {
  const TestFunctionDictionary d1 = default_dictionary(1), d2 = default_dictionary(2), d3 = default_dictionary(3);
  const TestFunctionDictionary* dicts[] = {&d1, &d2, &d3};
  for (std::uint32_t t = 0; t < 100; ++t) {
    const auto m = coupled(t, 3);
    const auto& dict = *dicts[t % 3];
    const double up = rho_upper(m[0], m[1]);
    const double lo = rho_lower(m[0], m[1], dict);
    CHECK(lo <= up);
    CHECK(up == rho_upper(m[1], m[0]));
    CHECK(lo == rho_lower(m[1], m[0], dict));
    CHECK(rho_upper(m[0], m[2]) <= up + rho_upper(m[1], m[2]) + 1e-15);
    CHECK(rho_upper(m[0], m[0]) == 0.0);
    CHECK(rho_lower(m[0], m[0], dict) == 0.0);
  }
}
