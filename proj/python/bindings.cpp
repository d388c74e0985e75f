#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mvsde/analysis.hpp"
#include "mvsde/cli.hpp"
#include "mvsde/error.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/models.hpp"
#include "mvsde/paths.hpp"
#include "mvsde/solver.hpp"

namespace py = pybind11;
using namespace mvsde;

namespace {

py::array_t<double> states_array(const TrajectorySet& t) {
  py::array_t<double> out({t.records(), t.particles, t.dimension});
  std::copy(t.states.begin(), t.states.end(), out.mutable_data());
  return out;
}

EmpiricalMeasure measure_from(py::array_t<double, py::array::c_style | py::array::forcecast> pts) {
  if (pts.ndim() == 1) {
    return EmpiricalMeasure(1, std::vector<double>(pts.data(), pts.data() + pts.size()));
  }
  if (pts.ndim() != 2) throw DimensionError("points must be an (N,) or (N, d) array");
  return EmpiricalMeasure(static_cast<std::size_t>(pts.shape(1)),
                          std::vector<double>(pts.data(), pts.data() + pts.size()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Interacting-particle Euler-Maruyama for McKean-Vlasov SDEs";

  // Translators run newest first, so the base class goes in first.
  const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<BlowUpError>(m, "BlowUpError", base.ptr());

  m.attr("DEFAULT_ETA") = kDefaultEta;
  m.def("kappa_eta", &kappa_eta, py::arg("x"), py::arg("eta") = kDefaultEta);
  m.def("grid_points", [](double horizon, unsigned level) { return make_grid(horizon, level).points(); },
        py::arg("horizon"), py::arg("level"));

  py::class_<CoefficientModel>(m, "Model")
      .def_readonly("id", &CoefficientModel::id)
      .def_readonly("dimension", &CoefficientModel::dimension)
      .def_readonly("parameters", &CoefficientModel::parameters)
      .def_property_readonly("assumption_class",
                             [](const CoefficientModel& c) { return to_string(c.assumption_class); })
      .def("drift", [](const CoefficientModel& c, std::vector<double> x, py::array_t<double> points) {
        return drift_eval(c, x, measure_from(points));
      })
      .def("diffusion", [](const CoefficientModel& c, std::vector<double> x, py::array_t<double> points) {
        return diffusion_eval(c, x, measure_from(points));
      })
      .def("oracle_second_moment", [](const CoefficientModel& c, std::vector<double> m0, double u0, double t) {
        if (!c.has_moment_oracle()) throw ParameterError("model has no moment oracle");
        return c.moment_oracle(m0, u0).second_moment(t);
      });

  m.def("catalog_ids", &catalog_ids);
  m.def("make_model", &make_catalog_model, py::arg("id"),
        py::arg("params") = std::map<std::string, double>{}, py::arg("dimension") = 1);

  m.def(
      "em_run",
      [](const CoefficientModel& model, std::vector<double> x0, std::size_t particles, unsigned level,
         double horizon, std::uint64_t seed, unsigned threads) {
        const ParticleEnsemble init = sample_initial(LawSpec::point_mass(std::move(x0)), particles, seed);
        const BrownianLattice lat(seed, particles, model.dimension, level, horizon);
        RunOptions ro;
        ro.threads = threads;
        const TrajectorySet t = em_run(model, init, level, lat, {}, ro);
        return py::make_tuple(t.times, states_array(t));
      },
      py::arg("model"), py::arg("x0"), py::arg("particles"), py::arg("level"), py::arg("horizon") = 1.0,
      py::arg("seed") = 1, py::arg("threads") = 1,
      "Run from a point mass; returns (times, states[record, particle, dim]).");

  m.def(
      "rate_study",
      [](const CoefficientModel& model, std::vector<double> mean, std::vector<double> cov,
         std::vector<unsigned> levels, unsigned finest_level, std::size_t particles, std::uint64_t seed) {
        MultilevelSpec spec;
        spec.levels = levels;
        spec.finest_level = finest_level;
        spec.particles = particles;
        spec.seed = seed;
        const auto runs = em_multilevel(model, LawSpec::gaussian(std::move(mean), std::move(cov)), spec);
        std::vector<double> errs, ses;
        for (unsigned n : levels) {
          const ErrorEstimate e = strong_error(runs.at(finest_level), runs.at(n));
          errs.push_back(e.value);
          ses.push_back(e.standard_error);
        }
        const RateReport r = fit_rate(levels, errs, ses);
        py::dict out;
        out["errors"] = errs;
        out["stderr"] = ses;
        out["slope"] = r.slope;
        out["slope_stderr"] = r.slope_standard_error;
        return out;
      },
      py::arg("model"), py::arg("mean"), py::arg("cov"), py::arg("levels"), py::arg("finest_level"),
      py::arg("particles"), py::arg("seed") = 1);

  m.def(
      "fit_rate",
      [](std::vector<unsigned> levels, std::vector<double> errors) {
        const RateReport r = fit_rate(levels, errors);
        return py::make_tuple(r.slope, r.intercept);
      },
      "Least-squares slope and intercept of log2(error) on level.");

  m.def(
      "osgood_integral",
      [](const std::string& kind, double epsilon, double upper, double eta) {
        const Modulus k = kind == "identity" ? Modulus::identity() : Modulus::kappa(eta);
        const OsgoodResult r = osgood_integral(k, epsilon, upper);
        return py::make_tuple(r.value, r.closed_form);
      },
      py::arg("kind") = "kappa", py::arg("epsilon"), py::arg("upper") = 1.0, py::arg("eta") = kDefaultEta);

  m.def(
      "bihari",
      [](double scale, double epsilon, double horizon, std::size_t samples) {
        const BihariReport r = bihari_ode_check(Modulus::kappa(), scale, epsilon, horizon, samples);
        return py::make_tuple(r.times, r.numeric, r.closed_form);
      },
      py::arg("scale"), py::arg("epsilon"), py::arg("horizon"), py::arg("samples") = 101);

  m.def("rho_upper", [](py::array_t<double> a, py::array_t<double> b) {
    return rho_upper(measure_from(a), measure_from(b));
  });
  m.def("rho_lower", [](py::array_t<double> a, py::array_t<double> b) {
    const EmpiricalMeasure mu = measure_from(a);
    return rho_lower(mu, measure_from(b), default_dictionary(mu.dimension()));
  });

  m.def("format_double", &format_double);
}
