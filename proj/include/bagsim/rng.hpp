#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bagsim {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is identified by (seed, stream index); the 128-bit counter is
/// (block, block_hi, stream_lo, stream_hi), so every inference batch owns an
/// independent, reproducible stream regardless of execution order. Satisfies
/// UniformRandomBitGenerator with 64-bit output.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;

  explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (lane_ == 4) refill();
    std::uint64_t hi = out_[lane_++];
    std::uint64_t lo = out_[lane_++];
    return (hi << 32) | lo;
  }

  /// Positions the generator at the start of counter block `block` (4 words, two outputs).
  void seek(std::uint64_t block) noexcept {
    block_ = block;
    lane_ = 4;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Bernoulli draw: true iff uniform() < p. p = 1 always succeeds, p = 0 never does.
  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  void refill() noexcept {
    std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block_),
                                     static_cast<std::uint32_t>(block_ >> 32),
                                     static_cast<std::uint32_t>(stream_),
                                     static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    out_ = ctr;
    ++block_;
    lane_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> out_{};
  int lane_ = 4;
};

}  // namespace bagsim
