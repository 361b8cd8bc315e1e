#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aasde/rng.hpp"

namespace aasde {

/// Uniform time grid on the lattice step * Z.
///
/// Node i sits at time (first_index + i) * step, so grids with the same step
/// share nodes exactly and a grid contains t = 0 as a node whenever
/// first_index <= 0 <= first_index + n_steps.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(std::int64_t first_index, std::size_t n_steps, double step);

  /// Smallest lattice grid covering [t_min, t_max] (endpoints snap outward,
  /// with a relative allowance of 1e-9 steps).
  static TimeGrid covering(double t_min, double t_max, double step);

  std::int64_t first_index() const noexcept { return first_index_; }
  std::int64_t last_index() const noexcept {
    return first_index_ + static_cast<std::int64_t>(n_steps_);
  }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
  double step() const noexcept { return step_; }

  double time(std::size_t node) const noexcept {
    return static_cast<double>(first_index_ + static_cast<std::int64_t>(node)) * step_;
  }
  double t_min() const noexcept { return time(0); }
  double t_max() const noexcept { return time(n_steps_); }

  bool contains_zero() const noexcept { return first_index_ <= 0 && last_index() >= 0; }
  /// Node index of t = 0; throws InvalidArgument if the grid does not contain 0.
  std::size_t zero_node() const;

  /// Node nearest to t, clamped to the grid.
  std::size_t nearest_node(double t) const noexcept;

  /// Same grid with `span` (rounded up to whole steps) prepended.
  TimeGrid extended_back(double span) const;
  /// Number of whole steps needed to cover `span`.
  std::size_t steps_for(double span) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  std::int64_t first_index_ = 0;
  std::size_t n_steps_ = 0;
  double step_ = 1.0;
};

/// One realization of a two-sided standard Brownian motion on a grid.
struct WienerPath {
  TimeGrid grid;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
};

/// Brownian increments W((k+1)h) - W(kh) = sqrt(h) xi_k for every lattice
/// step k in Z, where xi_k is normal number k of the (seed, path_index)
/// counter-based stream.
class WienerSource {
 public:
  WienerSource(std::uint64_t seed, std::uint64_t path_index) noexcept : rng_(seed, path_index) {}

  std::uint64_t seed() const noexcept { return rng_.seed(); }
  std::uint64_t path_index() const noexcept { return rng_.stream(); }

  /// Increments over every step of `grid` (out.size() == grid.n_steps()).
  void increments(const TimeGrid& grid, std::span<double> out) const;
  std::vector<double> increments(const TimeGrid& grid) const;

 private:
  CounterRng rng_;
};

/// W(0) = 0; forward values are cumulative sums from node 0 up to t_max,
/// backward values independent cumulative sums from 0 down to t_min.
WienerPath sample_wiener(const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index);

/// Left-point sum of h(t_i) (W(t_{i+1}) - W(t_i)) over nodes [from, to).
double ito_integral(std::span<const double> h, const WienerPath& path, std::size_t from,
                    std::size_t to);

}  // namespace aasde
