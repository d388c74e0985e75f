#include "mvsde/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvsde/error.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/random.hpp"

namespace mvsde {

LawSpec LawSpec::point_mass(StateVector x0) {
  if (x0.empty()) throw DimensionError("point mass: empty location");
  LawSpec s;
  s.kind = Kind::kPointMass;
  s.location = std::move(x0);
  return s;
}

LawSpec LawSpec::gaussian(StateVector mean, std::vector<double> covariance) {
  const std::size_t d = mean.size();
  if (d == 0) throw DimensionError("gaussian law: empty mean");
  if (covariance.size() != d * d) throw DimensionError("gaussian law: covariance must be d x d");
  LawSpec s;
  s.kind = Kind::kGaussian;
  s.location = std::move(mean);
  s.covariance = std::move(covariance);
  return s;
}

LawSpec LawSpec::uniform_box(StateVector lower, StateVector upper) {
  if (lower.empty() || lower.size() != upper.size()) throw DimensionError("uniform box: malformed bounds");
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (!(lower[k] <= upper[k])) throw ParameterError("uniform box: lower bound exceeds upper bound");
  }
  LawSpec s;
  s.kind = Kind::kUniformBox;
  s.location = std::move(lower);
  s.upper = std::move(upper);
  return s;
}

StateVector LawSpec::mean() const {
  if (kind != Kind::kUniformBox) return location;
  StateVector m(location.size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = 0.5 * (location[k] + upper[k]);
  return m;
}

double LawSpec::second_moment() const {
  double s = 0.0;
  const std::size_t d = dimension();
  switch (kind) {
    case Kind::kPointMass:
      for (double v : location) s += v * v;
      break;
    case Kind::kGaussian:
      for (std::size_t k = 0; k < d; ++k) s += location[k] * location[k] + covariance[k * d + k];
      break;
    case Kind::kUniformBox:
      for (std::size_t k = 0; k < d; ++k) {
        const double a = location[k], b = upper[k];
        s += (a * a + a * b + b * b) / 3.0;
      }
      break;
  }
  return s;
}

ParticleEnsemble sample_initial(const LawSpec& law, std::size_t particles, std::uint64_t seed) {
  if (particles == 0) throw ParameterError("sample_initial: need at least one particle");
  const std::size_t d = law.dimension();
  ParticleEnsemble ens;
  ens.particles = particles;
  ens.dimension = d;
  ens.states.resize(particles * d);

  switch (law.kind) {
    case LawSpec::Kind::kPointMass:
      for (std::size_t p = 0; p < particles; ++p) std::copy(law.location.begin(), law.location.end(), ens.state(p).begin());
      break;
    case LawSpec::Kind::kGaussian: {
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
          law.covariance.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
      if (!(asym <= 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))) {
        throw ParameterError("gaussian law: covariance is not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
      const Eigen::VectorXd lambda = eig.eigenvalues();
      const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
      if (lambda.minCoeff() < -1e-12 * scale) {
        throw ParameterError("gaussian law: covariance is not positive semidefinite");
      }
      const Eigen::MatrixXd factor =
          eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (std::size_t p = 0; p < particles; ++p) {
        for (std::size_t k = 0; k < d; ++k) {
          z[static_cast<Eigen::Index>(k)] = counter_normal(seed, Stream::kInitialLaw, static_cast<std::uint32_t>(p),
                                                           static_cast<std::uint32_t>(k), 0);
        }
        const Eigen::VectorXd x = factor * z;
        for (std::size_t k = 0; k < d; ++k) ens.states[p * d + k] = law.location[k] + x[static_cast<Eigen::Index>(k)];
      }
      break;
    }
    case LawSpec::Kind::kUniformBox:
      for (std::size_t p = 0; p < particles; ++p) {
        for (std::size_t k = 0; k < d; ++k) {
          const double u = counter_uniform(seed, Stream::kInitialLaw, static_cast<std::uint32_t>(p),
                                           static_cast<std::uint32_t>(k), 1);
          ens.states[p * d + k] = law.location[k] + (law.upper[k] - law.location[k]) * u;
        }
      }
      break;
  }
  return ens;
}

EmpiricalMeasure to_measure(const ParticleEnsemble& ensemble) {
  return EmpiricalMeasure(ensemble.dimension, ensemble.states);
}

EmpiricalMeasure TrajectorySet::measure(std::size_t record) const {
  const auto snap = snapshot(record);
  return EmpiricalMeasure(dimension, std::vector<double>(snap.begin(), snap.end()));
}

namespace {

struct Workspace {
  std::vector<double> drift, diffusion, dw, partial;
  explicit Workspace(std::size_t d) : drift(d), diffusion(d * d), dw(d), partial(d) {}
};

}  // namespace

TrajectorySet em_run(const CoefficientModel& model, const ParticleEnsemble& initial, unsigned level,
                     const BrownianLattice& lattice, const RecordSpec& record,
                     const RunOptions& options) {
  const std::size_t d = model.dimension;
  const std::size_t n_part = initial.particles;
  if (initial.dimension != d || lattice.dimension() != d) {
    throw DimensionError("em_run: model, ensemble and lattice dimensions differ");
  }
  if (lattice.particles() != n_part) throw DimensionError("em_run: lattice particle count differs from ensemble");
  if (level > lattice.finest_level()) throw ParameterError("em_run: run level is finer than the lattice");
  const unsigned rec_level = record.level.value_or(level);
  if (rec_level > level && !record.interpolate) {
    throw ParameterError("em_run: record grid finer than the run grid requires interpolation");
  }
  if (rec_level > lattice.finest_level()) throw ParameterError("em_run: record grid finer than the lattice");

  const double horizon = lattice.horizon();
  const DyadicGrid grid(horizon, level);
  const DyadicGrid rec_grid(horizon, rec_level);
  const double h = grid.step_size();
  const std::uint64_t cells = grid.steps();

  TrajectorySet out;
  out.model_id = model.id;
  out.seed = lattice.seed();
  out.horizon = horizon;
  out.level = level;
  out.record_level = rec_level;
  out.particles = n_part;
  out.dimension = d;
  out.times = rec_grid.points();
  out.states.resize(out.times.size() * n_part * d);

  std::vector<double> x = initial.states;
  const std::uint64_t stride = rec_level <= level ? (std::uint64_t{1} << (level - rec_level)) : 1;
  const std::uint64_t sub = rec_level > level ? (std::uint64_t{1} << (rec_level - level)) : 1;
  const std::uint64_t sub_width = std::uint64_t{1} << (lattice.finest_level() - rec_level);

  auto store = [&](std::uint64_t rec, const std::vector<double>& src) {
    std::copy(src.begin(), src.end(), out.states.begin() + static_cast<std::ptrdiff_t>(rec * n_part * d));
  };

  std::vector<unsigned char> blown(n_part, 0);
  for (std::uint64_t i = 0; i < cells; ++i) {
    if (rec_level <= level && i % stride == 0) store(i / stride, x);
    // Frozen law for this step, reduced in ascending particle order.
    const EmpiricalMeasure mu(d, x);

    parallel_for(n_part, options.threads, [&](std::size_t begin, std::size_t end) {
      Workspace ws(d);
      for (std::size_t p = begin; p < end; ++p) {
        const std::span<double> xp(x.data() + p * d, d);
        model.drift(xp, mu, ws.drift);
        model.diffusion(xp, mu, ws.diffusion);

        if (rec_level > level) {
          for (std::uint64_t j = 0; j < sub; ++j) {
            const double dt = std::ldexp(static_cast<double>(j), -static_cast<int>(rec_level)) * horizon;
            for (std::size_t k = 0; k < d; ++k) {
              ws.partial[k] = lattice.range_sum(p, k, (i * sub) * sub_width, j * sub_width);
            }
            double* dst = out.states.data() + ((i * sub + j) * n_part + p) * d;
            for (std::size_t k = 0; k < d; ++k) {
              double v = xp[k] + ws.drift[k] * dt;
              for (std::size_t m = 0; m < d; ++m) v += ws.diffusion[k * d + m] * ws.partial[m];
              dst[k] = v;
            }
          }
        }

        for (std::size_t k = 0; k < d; ++k) ws.dw[k] = lattice.cell_increment(p, level, i, k);
        double r2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          double inc = ws.drift[k] * h;
          for (std::size_t m = 0; m < d; ++m) inc += ws.diffusion[k * d + m] * ws.dw[m];
          ws.partial[k] = xp[k] + inc;
          r2 += ws.partial[k] * ws.partial[k];
        }
        // Per-particle update is safe in place: mu holds its own copy.
        std::copy(ws.partial.begin(), ws.partial.end(), xp.begin());
        if (!std::isfinite(r2) || std::sqrt(r2) > options.blowup_threshold) blown[p] = 1;
      }
    }, 64);

    const auto first_bad = std::find(blown.begin(), blown.end(), 1);
    if (first_bad != blown.end()) {
      const auto p = static_cast<std::size_t>(first_bad - blown.begin());
      std::vector<double> snap(x.begin() + static_cast<std::ptrdiff_t>(p * d),
                               x.begin() + static_cast<std::ptrdiff_t>((p + 1) * d));
      std::ostringstream os;
      os.precision(17);
      os << "em_run: blow-up in model '" << model.id << "' at step " << i + 1 << " (t = "
         << grid.point(i + 1) << "), particle " << p << ", state (";
      for (std::size_t k = 0; k < d; ++k) os << (k ? ", " : "") << snap[k];
      os << ")";
      throw BlowUpError(os.str(), static_cast<std::size_t>(i + 1), p, std::move(snap));
    }
  }
  store(out.times.size() - 1, x);
  return out;
}

std::map<unsigned, TrajectorySet> em_multilevel(const CoefficientModel& model, const LawSpec& law,
                                                const MultilevelSpec& spec) {
  if (spec.levels.empty()) throw ParameterError("em_multilevel: no levels given");
  for (std::size_t i = 1; i < spec.levels.size(); ++i) {
    if (spec.levels[i] <= spec.levels[i - 1]) throw ParameterError("em_multilevel: levels must be strictly increasing");
  }
  if (spec.levels.back() >= spec.finest_level) {
    throw ParameterError("em_multilevel: every level must be coarser than the finest level");
  }
  if (law.dimension() != model.dimension) throw DimensionError("em_multilevel: law and model dimensions differ");

  const ParticleEnsemble initial = sample_initial(law, spec.particles, spec.seed);
  LatticeOptions lat_opts = spec.lattice;
  lat_opts.threads = spec.run.threads;
  const BrownianLattice lattice(spec.seed, spec.particles, model.dimension, spec.finest_level,
                                spec.horizon, lat_opts);
  RecordSpec rec = spec.record;
  if (!rec.level) rec.level = spec.levels.front();

  std::map<unsigned, TrajectorySet> runs;
  for (unsigned n : spec.levels) runs.emplace(n, em_run(model, initial, n, lattice, rec, spec.run));
  runs.emplace(spec.finest_level, em_run(model, initial, spec.finest_level, lattice, rec, spec.run));
  return runs;
}

}  // namespace mvsde
