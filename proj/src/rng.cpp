#include "aasde/rng.hpp"

#include <cmath>
#include <numbers>

namespace aasde {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline double to_unit_interval(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  // (0, 1]: never zero so log() below is finite
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
  for (int round = 0; round < kRounds; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMul0, ctr[0], lo0, hi0);
    mulhilo(kMul1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed),
      stream_(stream),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

std::array<double, 2> CounterRng::uniform_pair(std::int64_t block_index) const noexcept {
  const auto idx = static_cast<std::uint64_t>(block_index);
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32),
                                static_cast<std::uint32_t>(stream_),
                                static_cast<std::uint32_t>(stream_ >> 32)};
  const auto out = Philox4x32::block(ctr, key_);
  return {to_unit_interval(out[0], out[1]), to_unit_interval(out[2], out[3])};
}

std::array<double, 2> CounterRng::normal_pair(std::int64_t block_index) const noexcept {
  const auto [u1, u2] = uniform_pair(block_index);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

double CounterRng::normal(std::int64_t index) const noexcept {
  // floor division so that negative indices pair up as (-2,-1), (-4,-3), ...
  const std::int64_t block = index >= 0 ? index / 2 : -((-index + 1) / 2);
  const auto pair = normal_pair(block);
  return pair[static_cast<std::size_t>(index - 2 * block)];
}

}  // namespace aasde
