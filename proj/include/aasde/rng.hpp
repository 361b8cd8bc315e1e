#pragma once

#include <array>
#include <cstdint>

namespace aasde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The output is a pure function of (key, counter); there is no hidden state,
/// so any (seed, stream, position) triple can be evaluated independently of
/// all the others.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr int kRounds = 10;

  static Counter block(Counter counter, Key key) noexcept;
};

/// Stream of uniform and normal variates addressed by (seed, stream, index).
///
/// `stream` is the split axis (one per Monte Carlo path); `index` is the
/// position inside the stream and may be negative.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Two independent 53-bit uniforms in (0, 1] from block `block_index`.
  std::array<double, 2> uniform_pair(std::int64_t block_index) const noexcept;

  /// Two independent standard normals (Box-Muller on `uniform_pair`).
  std::array<double, 2> normal_pair(std::int64_t block_index) const noexcept;

  /// Standard normal number `index`; indices 2k and 2k+1 share one block.
  double normal(std::int64_t index) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  Philox4x32::Key key_;
};

}  // namespace aasde
