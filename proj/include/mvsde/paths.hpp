#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mvsde {

/// Dyadic grid t_i = i T / 2^n, i = 0..2^n.
class DyadicGrid {
 public:
  DyadicGrid(double horizon, unsigned level);

  double horizon() const noexcept { return horizon_; }
  unsigned level() const noexcept { return level_; }
  std::uint64_t steps() const noexcept { return std::uint64_t{1} << level_; }
  double step_size() const noexcept;

  /// t_i. Bit-identical to the matching point of any finer grid.
  double point(std::uint64_t i) const noexcept;
  std::vector<double> points() const;

  /// Index i of the grid point t_n = floor(2^n t / T) T / 2^n, which is <= t.
  std::uint64_t cell_index(double t) const;
  double floor_point(double t) const { return point(cell_index(t)); }

 private:
  double horizon_;
  unsigned level_;
};

inline DyadicGrid make_grid(double horizon, unsigned level) { return DyadicGrid(horizon, level); }

struct LatticeOptions {
  /// Generate increments on demand instead of storing them.
  bool streaming = false;
  std::size_t memory_cap_bytes = std::size_t{2} << 30;
  unsigned threads = 1;
};

/// Increments of coarse cells for every particle, row-major [particle][cell][dim].
struct CoarseIncrements {
  std::size_t particles = 0;
  std::size_t dimension = 0;
  unsigned level = 0;
  std::uint64_t cells = 0;
  std::vector<double> data;

  double at(std::size_t particle, std::uint64_t cell, std::size_t dim) const {
    return data[(particle * cells + cell) * dimension + dim];
  }
};

/// Finest-level Brownian increments for N independent d-dimensional paths.
///
/// Each increment is a pure function of (seed, particle, step, dim) through a
/// counter-based generator, then rounded to a power-of-two quantum far below
/// its standard deviation. All partial sums of consecutive increments are
/// therefore exact in double precision, and coarsening to any level is exact
/// regardless of grouping.
class BrownianLattice {
 public:
  static constexpr unsigned kMaxStoredLevel = 30;
  static constexpr unsigned kMaxStreamingLevel = 40;

  BrownianLattice(std::uint64_t seed, std::size_t particles, std::size_t dimension,
                  unsigned finest_level, double horizon, const LatticeOptions& options = {});

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t particles() const noexcept { return particles_; }
  std::size_t dimension() const noexcept { return dim_; }
  unsigned finest_level() const noexcept { return level_; }
  double horizon() const noexcept { return horizon_; }
  std::uint64_t steps() const noexcept { return std::uint64_t{1} << level_; }
  bool streaming() const noexcept { return data_.empty(); }
  double quantum() const noexcept { return quantum_; }

  /// Level-L increment.
  double increment(std::size_t particle, std::uint64_t step, std::size_t dim) const;

  /// Sum of `count` consecutive level-L increments starting at `first`, in
  /// ascending order.
  double range_sum(std::size_t particle, std::size_t dim, std::uint64_t first,
                   std::uint64_t count) const;

  /// Increment over cell `cell` of the level-n grid.
  double cell_increment(std::size_t particle, unsigned level, std::uint64_t cell,
                        std::size_t dim) const;

  /// Bytes a stored lattice with these dimensions would need.
  static std::size_t storage_bytes(std::size_t particles, std::size_t dimension, unsigned level);

  const std::vector<double>& stored() const noexcept { return data_; }

  /// Little-endian dump: "MVBL1" padded to 8 bytes, then seed, N, d, L as
  /// u64 and T as f64, then increments row-major [particle][step][dim] as f64.
  void write(std::ostream& out) const;
  static BrownianLattice read(std::istream& in);

  friend bool operator==(const BrownianLattice& a, const BrownianLattice& b);

 private:
  BrownianLattice() = default;
  double generate(std::size_t particle, std::uint64_t step, std::size_t dim) const noexcept;

  std::uint64_t seed_ = 0;
  std::size_t particles_ = 0;
  std::size_t dim_ = 0;
  unsigned level_ = 0;
  double horizon_ = 1.0;
  double stddev_ = 1.0;
  double quantum_ = 0.0;
  int quantum_exp_ = 0;
  std::vector<double> data_;
};

inline BrownianLattice sample_lattice(std::uint64_t seed, std::size_t particles,
                                      std::size_t dimension, unsigned finest_level,
                                      double horizon, const LatticeOptions& options = {}) {
  return BrownianLattice(seed, particles, dimension, finest_level, horizon, options);
}

/// Level-n increments; exact sums of the level-L children.
CoarseIncrements coarsen(const BrownianLattice& lattice, unsigned level, unsigned threads = 1);

}  // namespace mvsde
