#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aasde/noise.hpp"
#include "aasde/semigroup.hpp"
#include "aasde/signals.hpp"

namespace aasde {

/// dx = (A x + f(t, x)) dt + g(t, x) dW.
struct Equation {
  SemigroupOperator semigroup = SemigroupOperator::scalar(1.0);
  NonlinearField drift;
  NonlinearField diffusion;

  std::size_t dim() const noexcept { return semigroup.dim(); }
  /// Throws DimensionMismatch if the fields do not match the semigroup.
  void validate() const;
};

/// One sample path x(t) on a grid, stored node-major.
struct Trajectory {
  TimeGrid grid;
  std::size_t dim = 0;
  std::vector<double> states;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  std::span<const double> state(std::size_t node) const {
    return {states.data() + node * dim, dim};
  }
};

/// M paths on a shared grid; storage is [path][node][component].
class TrajectoryEnsemble {
 public:
  TrajectoryEnsemble() = default;
  TrajectoryEnsemble(TimeGrid grid, std::size_t dim, std::size_t n_paths, std::uint64_t master_seed);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_nodes() const noexcept { return grid_.n_nodes(); }
  std::uint64_t master_seed() const noexcept { return master_seed_; }

  std::span<const double> state(std::size_t path, std::size_t node) const {
    return {data_.data() + (path * n_nodes() + node) * dim_, dim_};
  }
  std::span<double> state(std::size_t path, std::size_t node) {
    return {data_.data() + (path * n_nodes() + node) * dim_, dim_};
  }
  std::span<const double> path_states(std::size_t path) const {
    return {data_.data() + path * n_nodes() * dim_, n_nodes() * dim_};
  }
  std::span<double> path_states(std::size_t path) {
    return {data_.data() + path * n_nodes() * dim_, n_nodes() * dim_};
  }
  const std::vector<double>& data() const noexcept { return data_; }

  Trajectory trajectory(std::size_t path) const;

  bool operator==(const TrajectoryEnsemble&) const = default;

 private:
  TimeGrid grid_;
  std::size_t dim_ = 0;
  std::size_t n_paths_ = 0;
  std::uint64_t master_seed_ = 0;
  std::vector<double> data_;
};

/// Exponential Euler step: exp(A dt) (x + f_val dt + g_val dW).
StateVector mild_step(const SemigroupOperator& T, double t, std::span<const double> x, double dt,
                      std::span<const double> f_val, std::span<const double> g_val, double dW);

/// Simulates on `grid` (a lattice sub-grid of `path.grid`) starting from x0 at
/// grid.t_min(). Fields are evaluated at t + time_shift, which realizes the
/// time-shifted equation driven by the same noise increments.
Trajectory simulate(const Equation& eq, std::span<const double> x0, const TimeGrid& grid,
                    const WienerPath& path, double time_shift = 0.0);

/// Same, drawing the increments directly from a counter-based source.
Trajectory simulate(const Equation& eq, std::span<const double> x0, const TimeGrid& grid,
                    const WienerSource& noise, double time_shift = 0.0);

/// Truncated convolution integral_{t-L}^{t} T(t-s) f(s) ds with the tail
/// length L chosen so that the neglected part is <= tol, by composite
/// Simpson quadrature with step <= max_step.
StateVector convolution_solution(const SemigroupOperator& T, const ForcingSpec& f, double t,
                                 double tol, double max_step);

/// State at grid.t_min() after simulating from t_min - burn_in_span with
/// initial state 0 (a realization of the bounded solution up to
/// K e^{-omega burn_in_span} times its sup-norm).
StateVector aa_initial_value(const Equation& eq, const TimeGrid& grid, const WienerSource& noise,
                             double burn_in_span, double time_shift = 0.0);
StateVector aa_initial_value(const Equation& eq, const TimeGrid& grid, const WienerPath& path,
                             double burn_in_span, double time_shift = 0.0);

struct EnsembleSpec {
  TimeGrid window;
  /// Length of the unrecorded lead-in before window.t_min().
  double burn_in_span = 0.0;
  std::size_t n_paths = 1;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  double time_shift = 0.0;
};

/// Parallel map over path indices. Path i uses WienerSource(master_seed, i)
/// and starts from x0 (zero if empty) at window.t_min() - burn_in_span; only
/// the window nodes are stored.
TrajectoryEnsemble simulate_ensemble(const Equation& eq, const EnsembleSpec& spec,
                                     std::span<const double> x0 = {});

}  // namespace aasde
