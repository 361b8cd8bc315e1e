#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aasde/integrator.hpp"

namespace aasde {

/// Contraction constant 2 K^2 L / omega^2 + K^2 L' / omega, with L and L'
/// the mean-square Lipschitz constants of the drift and diffusion fields.
double eta(double K, double omega, double L, double L_prime);

/// Wiener increments of every path over the burn-in-extended grid, held
/// fixed across Picard sweeps.
class FrozenNoise {
 public:
  FrozenNoise(const TimeGrid& window, double burn_in_span, std::size_t n_paths,
              std::uint64_t master_seed, unsigned workers = 1);

  const TimeGrid& window() const noexcept { return window_; }
  const TimeGrid& extended() const noexcept { return extended_; }
  std::size_t lead_steps() const noexcept { return extended_.n_steps() - window_.n_steps(); }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::uint64_t master_seed() const noexcept { return master_seed_; }

  std::span<const double> increments(std::size_t path) const {
    return {data_.data() + path * extended_.n_steps(), extended_.n_steps()};
  }

 private:
  TimeGrid window_;
  TimeGrid extended_;
  std::size_t n_paths_;
  std::uint64_t master_seed_;
  std::vector<double> data_;
};

/// (S x)(t) = int_{-inf}^t T(t-s) f(s, x(s)) ds + int_{-inf}^t T(t-s) g(s, x(s)) dW(s),
/// discretized with the exponential Euler quadrature of the integrator. The
/// lower limit is truncated at window.t_min() - burn_in, and x is held at its
/// first window value on the lead-in.
TrajectoryEnsemble apply_S(const Equation& eq, const TrajectoryEnsemble& x, const FrozenNoise& noise,
                           unsigned workers = 1);

/// Single-path form on the path's own grid; `x.grid` must equal the path
/// grid minus its first `burn_in_span` worth of steps.
Trajectory apply_S(const Equation& eq, const Trajectory& x, const WienerPath& path,
                   double burn_in_span);

struct PicardOptions {
  double burn_in_span = 20.0;
  /// Stop once the sup square-mean distance between sweeps is <= tol^2.
  double tol = 1e-2;
  std::size_t max_iter = 50;
  /// Allowed excess of the observed ratio over eta; default 0.15 eta + 0.02.
  std::optional<double> ratio_slack;
  /// Run even when eta >= 1 (recorded as a warning).
  bool force = false;
  /// Starting trajectory x(t) = c on every path and component.
  double initial_constant = 0.0;
  unsigned workers = 1;
};

struct IterateRecord {
  std::size_t index = 0;
  double distance = 0.0;  // sup-grid E|x_k - x_{k-1}|^2
};

struct ContractionReport {
  double K = 0.0;
  double omega = 0.0;
  double L = 0.0;
  double L_prime = 0.0;
  double eta = 0.0;
  std::vector<IterateRecord> iterates;
  bool converged = false;
  /// Geometric mean of d_k / d_{k-1} for k >= 2.
  double observed_ratio = 0.0;
  double ratio_bound = 0.0;
  bool ratio_within_bound = false;
  /// sup-grid E|S x* - x*|^2 from one extra sweep on the converged ensemble.
  double residual = 0.0;
  std::vector<std::string> warnings;
};

struct PicardResult {
  TrajectoryEnsemble solution;
  ContractionReport report;
};

/// Picard iteration of S on a frozen Wiener ensemble.
///
/// Throws HypothesisViolation when eta >= 1 (unless options.force), and
/// NonConvergence carrying the distance history when max_iter sweeps do not
/// reach tol^2.
PicardResult picard_solve(const Equation& eq, double K, double omega, const TimeGrid& grid,
                          std::uint64_t ensemble_seed, std::size_t n_paths,
                          const PicardOptions& options = {});

/// Geometric mean of successive ratios d_k / d_{k-1} (0 if any ratio is 0).
double geometric_mean_ratio(const std::vector<IterateRecord>& iterates);

}  // namespace aasde
