#pragma once

// Counter-based random streams.
//
// Every random decision in the samplers has a fixed address
// (iteration, block, coordinate) and reads a short sequence of draws from
// Philox4x32-10 keyed by (seed, stream).  Two chains that read the same
// address see the same numbers, which is how common random numbers are
// implemented.  Because nothing is consumed from a shared sequential state,
// the order in which coordinates are processed never changes results.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace shrinkcoup {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t M0 = 0xD2511F53, M1 = 0xCD9E8D57;
  constexpr std::uint32_t W0 = 0x9E3779B9, W1 = 0xBB67AE85;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{M0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{M1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

/// Logical blocks of randomness.  The numeric values are part of the
/// reproducibility contract; append new blocks at the end.
enum class Block : std::uint32_t {
  EtaSlice = 0,   // slice auxiliary uniform, per coordinate
  EtaInv,         // inverse-CDF uniform, per coordinate
  EtaMaxcW,       // maximal coupling acceptance uniform
  EtaResid,       // maximal coupling residual draws of the second chain
  XiProp,         // log-normal random-walk increment
  XiMaxc,
  XiResid,
  XiAccept,
  XiGrid,
  Sigma2,
  Sigma2Maxc,
  Sigma2Resid,
  BetaR,
  BetaDelta,
  Metric,
  Permute,
  Init,
};

/// Sequential draws from one address.  Each Philox call yields two uniforms.
class RngCursor {
 public:
  RngCursor(PhiloxKey key, std::uint64_t iteration, Block block, std::uint32_t coord)
      : key_(key),
        c0_(coord),
        c1_(static_cast<std::uint32_t>(block) << 24),
        c2_(static_cast<std::uint32_t>(iteration)),
        c3_(static_cast<std::uint32_t>(iteration >> 32)) {}

  std::uint64_t next_u64() {
    if (pos_ == 2) refill();
    const std::uint64_t v = (std::uint64_t{buf_[2 * pos_]} << 32) | buf_[2 * pos_ + 1];
    ++pos_;
    return v;
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal by Box-Muller; consumes two uniforms.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n) by rejection on the top bits.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      const std::uint64_t v = next_u64();
      if (v < limit) return v % n;
    }
  }

  /// Gamma(shape, 1) by Marsaglia-Tsang; shapes below one use the
  /// U^{1/shape} boost.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::exp(std::log(uniform()) / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

 private:
  void refill() {
    buf_ = philox4x32_10({c0_, c1_ | block_idx_, c2_, c3_}, key_);
    block_idx_ = (block_idx_ + 1) & 0xFFFFFF;
    pos_ = 0;
  }

  PhiloxKey key_;
  std::uint32_t c0_, c1_, c2_, c3_;
  std::uint32_t block_idx_ = 0;
  PhiloxCounter buf_{};
  int pos_ = 2;
};

/// A keyed stream; cheap to copy.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  RngCursor at(std::uint64_t iteration, Block block, std::uint32_t coord = 0) const {
    return RngCursor(key_, iteration, block, coord);
  }

  PhiloxKey key() const { return key_; }
  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  PhiloxKey key_{};
};

/// Stream roles used by coupled pairs.  The kernel stream is shared by both
/// chains; initial states come from separate streams.
enum class StreamRole : std::uint64_t { Kernel = 0, LeadInit = 1, LagInit = 2, Data = 3 };

inline RngStream make_stream(std::uint64_t seed, StreamRole role) {
  return RngStream(seed, static_cast<std::uint64_t>(role));
}

/// Seed of replicate r in a fleet driven by one master seed.
inline std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate) {
  return splitmix64(master ^ splitmix64(replicate));
}

}  // namespace shrinkcoup
