#include "mvsde/paths.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "mvsde/error.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/random.hpp"

namespace mvsde {

DyadicGrid::DyadicGrid(double horizon, unsigned level) : horizon_(horizon), level_(level) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ParameterError("dyadic grid: horizon must be positive and finite");
  }
  if (level > 62) throw ParameterError("dyadic grid: level exceeds 62, index arithmetic would overflow");
}

double DyadicGrid::step_size() const noexcept { return std::ldexp(horizon_, -static_cast<int>(level_)); }

double DyadicGrid::point(std::uint64_t i) const noexcept {
  if (i == steps()) return horizon_;
  return std::ldexp(static_cast<double>(i), -static_cast<int>(level_)) * horizon_;
}

std::vector<double> DyadicGrid::points() const {
  std::vector<double> pts(steps() + 1);
  for (std::uint64_t i = 0; i <= steps(); ++i) pts[i] = point(i);
  return pts;
}

std::uint64_t DyadicGrid::cell_index(double t) const {
  if (!(t >= 0.0) || !(t <= horizon_)) throw DomainError("dyadic grid: time outside [0, T]");
  const double scaled = std::ldexp(t / horizon_, static_cast<int>(level_));
  auto i = static_cast<std::uint64_t>(std::floor(scaled));
  if (i > steps()) i = steps();
  while (i > 0 && point(i) > t) --i;
  return i;
}

namespace {

constexpr char kMagic[8] = {'M', 'V', 'B', 'L', '1', '\0', '\0', '\0'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw ValidationError("lattice file: truncated");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return v;
}

}  // namespace

std::size_t BrownianLattice::storage_bytes(std::size_t particles, std::size_t dimension,
                                           unsigned level) {
  const long double bytes = static_cast<long double>(particles) * dimension *
                            std::ldexp(1.0L, static_cast<int>(level)) * sizeof(double);
  if (bytes > static_cast<long double>(SIZE_MAX)) return SIZE_MAX;
  return static_cast<std::size_t>(bytes);
}

BrownianLattice::BrownianLattice(std::uint64_t seed, std::size_t particles, std::size_t dimension,
                                 unsigned finest_level, double horizon,
                                 const LatticeOptions& options)
    : seed_(seed), particles_(particles), dim_(dimension), level_(finest_level), horizon_(horizon) {
  if (particles == 0 || dimension == 0) {
    throw ParameterError("brownian lattice: particle count and dimension must be positive");
  }
  if (particles > UINT32_MAX || dimension > UINT32_MAX) {
    throw ParameterError("brownian lattice: particle count and dimension must fit in 32 bits");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ParameterError("brownian lattice: horizon must be positive and finite");
  }
  const unsigned cap = options.streaming ? kMaxStreamingLevel : kMaxStoredLevel;
  if (finest_level > cap) {
    std::ostringstream os;
    os << "brownian lattice: finest level " << finest_level << " exceeds " << cap
       << (options.streaming ? "" : " (enable streaming mode for deeper lattices)");
    throw ParameterError(os.str());
  }
  stddev_ = std::sqrt(std::ldexp(horizon, -static_cast<int>(finest_level)));
  // Partial sums of m increments have magnitude far below 64 sqrt(m) sd <=
  // 2^(L/2 + 6) sd; the quantum keeps those sums under 2^53 quanta.
  const int k = 46 - static_cast<int>((finest_level + 1) / 2);
  quantum_exp_ = std::ilogb(stddev_) - k;
  quantum_ = std::ldexp(1.0, quantum_exp_);

  if (options.streaming) return;
  const std::size_t bytes = storage_bytes(particles, dimension, finest_level);
  if (bytes > options.memory_cap_bytes) {
    std::ostringstream os;
    os << "brownian lattice: storing " << bytes << " bytes exceeds the memory cap of "
       << options.memory_cap_bytes << " bytes; enable streaming mode";
    throw MemoryCapError(os.str());
  }
  data_.resize(particles * steps() * dimension);
  const std::uint64_t nsteps = steps();
  parallel_for(particles, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      double* row = data_.data() + p * nsteps * dim_;
      for (std::uint64_t s = 0; s < nsteps; ++s) {
        for (std::size_t k2 = 0; k2 < dim_; ++k2) row[s * dim_ + k2] = generate(p, s, k2);
      }
    }
  }, 1);
}

double BrownianLattice::generate(std::size_t particle, std::uint64_t step,
                                 std::size_t dim) const noexcept {
  // Step indices above 2^32 only occur in streaming mode; fold the high word
  // into the dimension slot's upper bits.
  const auto lo = static_cast<std::uint32_t>(step);
  const auto hi = static_cast<std::uint32_t>(step >> 32);
  const double z = counter_normal(seed_, Stream::kBrownian, lo,
                                  static_cast<std::uint32_t>(dim) ^ (hi << 24),
                                  static_cast<std::uint32_t>(particle));
  const double scaled = std::ldexp(z * stddev_, -quantum_exp_);
  return std::ldexp(std::nearbyint(scaled), quantum_exp_);
}

double BrownianLattice::increment(std::size_t particle, std::uint64_t step, std::size_t dim) const {
  if (data_.empty()) return generate(particle, step, dim);
  return data_[(particle * steps() + step) * dim_ + dim];
}

double BrownianLattice::range_sum(std::size_t particle, std::size_t dim, std::uint64_t first,
                                  std::uint64_t count) const {
  double s = 0.0;
  if (data_.empty()) {
    for (std::uint64_t k = first; k < first + count; ++k) s += generate(particle, k, dim);
    return s;
  }
  const double* row = data_.data() + particle * steps() * dim_ + dim;
  for (std::uint64_t k = first; k < first + count; ++k) s += row[k * dim_];
  return s;
}

double BrownianLattice::cell_increment(std::size_t particle, unsigned level, std::uint64_t cell,
                                       std::size_t dim) const {
  if (level > level_) throw ParameterError("brownian lattice: requested level is finer than the lattice");
  const std::uint64_t width = std::uint64_t{1} << (level_ - level);
  return range_sum(particle, dim, cell * width, width);
}

void BrownianLattice::write(std::ostream& out) const {
  out.write(kMagic, 8);
  put_u64(out, seed_);
  put_u64(out, particles_);
  put_u64(out, dim_);
  put_u64(out, level_);
  put_u64(out, std::bit_cast<std::uint64_t>(horizon_));
  for (std::size_t p = 0; p < particles_; ++p) {
    for (std::uint64_t s = 0; s < steps(); ++s) {
      for (std::size_t k = 0; k < dim_; ++k) put_u64(out, std::bit_cast<std::uint64_t>(increment(p, s, k)));
    }
  }
}

BrownianLattice BrownianLattice::read(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw ValidationError("lattice file: bad magic");
  BrownianLattice lat;
  lat.seed_ = get_u64(in);
  lat.particles_ = get_u64(in);
  lat.dim_ = get_u64(in);
  const std::uint64_t level = get_u64(in);
  lat.horizon_ = std::bit_cast<double>(get_u64(in));
  if (level > kMaxStoredLevel || lat.particles_ == 0 || lat.dim_ == 0 || !(lat.horizon_ > 0.0)) {
    throw ValidationError("lattice file: header out of range");
  }
  lat.level_ = static_cast<unsigned>(level);
  lat.stddev_ = std::sqrt(std::ldexp(lat.horizon_, -static_cast<int>(lat.level_)));
  lat.quantum_exp_ = std::ilogb(lat.stddev_) - (46 - static_cast<int>((lat.level_ + 1) / 2));
  lat.quantum_ = std::ldexp(1.0, lat.quantum_exp_);
  lat.data_.resize(lat.particles_ * lat.steps() * lat.dim_);
  for (double& v : lat.data_) v = std::bit_cast<double>(get_u64(in));
  return lat;
}

bool operator==(const BrownianLattice& a, const BrownianLattice& b) {
  if (a.seed_ != b.seed_ || a.particles_ != b.particles_ || a.dim_ != b.dim_ ||
      a.level_ != b.level_ || std::bit_cast<std::uint64_t>(a.horizon_) != std::bit_cast<std::uint64_t>(b.horizon_)) {
    return false;
  }
  for (std::size_t p = 0; p < a.particles_; ++p) {
    for (std::uint64_t s = 0; s < a.steps(); ++s) {
      for (std::size_t k = 0; k < a.dim_; ++k) {
        if (std::bit_cast<std::uint64_t>(a.increment(p, s, k)) !=
            std::bit_cast<std::uint64_t>(b.increment(p, s, k))) {
          return false;
        }
      }
    }
  }
  return true;
}

CoarseIncrements coarsen(const BrownianLattice& lattice, unsigned level, unsigned threads) {
  if (level > lattice.finest_level()) {
    throw ParameterError("coarsen: target level is finer than the lattice");
  }
  CoarseIncrements out;
  out.particles = lattice.particles();
  out.dimension = lattice.dimension();
  out.level = level;
  out.cells = std::uint64_t{1} << level;
  out.data.resize(out.particles * out.cells * out.dimension);
  parallel_for(out.particles, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      for (std::uint64_t c = 0; c < out.cells; ++c) {
        for (std::size_t k = 0; k < out.dimension; ++k) {
          out.data[(p * out.cells + c) * out.dimension + k] = lattice.cell_increment(p, level, c, k);
        }
      }
    }
  }, 1);
  return out;
}

}  // namespace mvsde
