#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/measure.hpp"
#include "mvsde/models.hpp"
#include "mvsde/paths.hpp"

namespace mvsde {

/// Initial law with all moments finite.
struct LawSpec {
  enum class Kind { kPointMass, kGaussian, kUniformBox };

  Kind kind = Kind::kPointMass;
  StateVector location;            // x0, Gaussian mean, or box lower corner
  std::vector<double> covariance;  // d x d row-major, Gaussian only
  StateVector upper;               // box upper corner

  static LawSpec point_mass(StateVector x0);
  static LawSpec gaussian(StateVector mean, std::vector<double> covariance);
  static LawSpec uniform_box(StateVector lower, StateVector upper);

  std::size_t dimension() const noexcept { return location.size(); }
  StateVector mean() const;
  /// E|xi|^2.
  double second_moment() const;
};

/// N particle states in R^d, row-major.
struct ParticleEnsemble {
  std::size_t particles = 0;
  std::size_t dimension = 0;
  std::vector<double> states;
  std::uint64_t time_index = 0;

  std::span<const double> state(std::size_t i) const { return {states.data() + i * dimension, dimension}; }
  std::span<double> state(std::size_t i) { return {states.data() + i * dimension, dimension}; }
};

/// N i.i.d. draws, deterministic in seed. Throws ParameterError for a
/// covariance that is not symmetric positive semidefinite.
ParticleEnsemble sample_initial(const LawSpec& law, std::size_t particles, std::uint64_t seed);

/// Uniform empirical measure on the current states.
EmpiricalMeasure to_measure(const ParticleEnsemble& ensemble);

struct RecordSpec {
  /// Record-grid level; defaults to the run level (every grid point).
  std::optional<unsigned> level;
  /// Permit a record grid finer than the run level. Off-grid states come
  /// from the in-cell identity X_{t_i} + b (r - t_i) + sigma (W_r - W_{t_i}).
  bool interpolate = false;
};

struct RunOptions {
  unsigned threads = 1;
  /// Abort when any |state| exceeds this.
  double blowup_threshold = 1e8;
};

/// Particle paths at the record-grid points of one run.
struct TrajectorySet {
  std::string model_id;
  std::uint64_t seed = 0;
  double horizon = 1.0;
  unsigned level = 0;
  unsigned record_level = 0;
  std::size_t particles = 0;
  std::size_t dimension = 0;
  std::vector<double> times;
  std::vector<double> states;  // [record][particle][dim]

  std::size_t records() const noexcept { return times.size(); }
  double at(std::size_t record, std::size_t particle, std::size_t dim) const {
    return states[(record * particles + particle) * dimension + dim];
  }
  std::span<const double> snapshot(std::size_t record) const {
    return {states.data() + record * particles * dimension, particles * dimension};
  }
  EmpiricalMeasure measure(std::size_t record) const;
};

/// Interacting-particle Euler-Maruyama on the level-n dyadic grid:
///   X_k <- X_k + b(X_k, mu) h + sigma(X_k, mu) dW_k,
/// with mu the empirical law of all particles at the start of the step and
/// dW_k the level-n coarsening of the lattice. Results do not depend on
/// `options.threads`.
TrajectorySet em_run(const CoefficientModel& model, const ParticleEnsemble& initial,
                     unsigned level, const BrownianLattice& lattice, const RecordSpec& record = {},
                     const RunOptions& options = {});

struct MultilevelSpec {
  std::vector<unsigned> levels;  // strictly increasing, max < finest_level
  unsigned finest_level = 12;
  std::size_t particles = 2000;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  RecordSpec record;  // level defaults to min(levels)
  RunOptions run;
  LatticeOptions lattice;
};

/// Runs every level plus the finest level on one lattice and one initial
/// ensemble. The result is keyed by level and includes the finest level.
std::map<unsigned, TrajectorySet> em_multilevel(const CoefficientModel& model, const LawSpec& law,
                                                const MultilevelSpec& spec);

}  // namespace mvsde
