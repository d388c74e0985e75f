#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output is a pure function of (key, counter).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

/// Stream tags keep independent uses of one seed apart.
enum class Stream : std::uint32_t {
  kBrownian = 0,
  kInitialLaw = 1,
  kValidation = 2,
  kChecker = 3,
};

/// Deterministic standard normal keyed by (seed, stream, a, b, c).
/// Box-Muller on two 53-bit uniforms; u1 is in (0, 1] so the log is finite.
inline double counter_normal(std::uint64_t seed, Stream stream, std::uint32_t a,
                             std::uint32_t b, std::uint32_t c) noexcept {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const auto r = Philox4x32::generate({a, b, c, static_cast<std::uint32_t>(stream)}, key);
  const std::uint64_t w0 = (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
  const std::uint64_t w1 = (static_cast<std::uint64_t>(r[2]) << 32 | r[3]) >> 11;
  constexpr double kInv53 = 1.0 / 9007199254740992.0;
  const double u1 = static_cast<double>(w0 + 1) * kInv53;
  const double u2 = static_cast<double>(w1) * kInv53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Deterministic uniform on [0, 1) keyed like counter_normal.
inline double counter_uniform(std::uint64_t seed, Stream stream, std::uint32_t a,
                              std::uint32_t b, std::uint32_t c) noexcept {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const auto r = Philox4x32::generate({a, b, c, static_cast<std::uint32_t>(stream)}, key);
  const std::uint64_t w0 = (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
  return static_cast<double>(w0) * (1.0 / 9007199254740992.0);
}

}  // namespace mvsde
