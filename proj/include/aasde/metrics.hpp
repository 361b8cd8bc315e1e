#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aasde/integrator.hpp"

namespace aasde {

/// Monte Carlo mean with standard error (sample std / sqrt(n)).
struct MCEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t n_paths = 0;
};

/// Welford mean/variance; exactly (v, 0) when every sample equals v.
MCEstimate estimate_mean(std::span<const double> samples);

/// Half-open node range [begin, end).
struct NodeRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  static NodeRange all(const TrajectoryEnsemble& ens) { return {0, ens.n_nodes()}; }
};

/// E|x(t)|^2 at one node.
MCEstimate second_moment(const TrajectoryEnsemble& ens, std::size_t node);

/// E|a(t) - b(t)|^2 for coupled ensembles (same grid, seed and path count).
MCEstimate square_mean_distance(const TrajectoryEnsemble& a, const TrajectoryEnsemble& b,
                                std::size_t node);

/// E x(t), componentwise.
StateVector ensemble_mean(const TrajectoryEnsemble& ens, std::size_t node);

std::vector<MCEstimate> second_moment_curve(const TrajectoryEnsemble& ens);
std::vector<MCEstimate> square_mean_distance_curve(const TrajectoryEnsemble& a,
                                                   const TrajectoryEnsemble& b);

/// max over the range of E|x(t)|^2.
double sup_square_mean(const TrajectoryEnsemble& ens, NodeRange range);
/// max over the range of E|a(t) - b(t)|^2.
double sup_square_mean(const TrajectoryEnsemble& a, const TrajectoryEnsemble& b, NodeRange range);

/// k = 3 K^2 L^2 (1 + 1/omega), margin = omega^2 - 3 K^2 L^2 (omega + 1),
/// with L the pathwise Lipschitz constant max(L_f, L_g).
struct StabilityConstants {
  double k = 0.0;
  double margin = 0.0;
};

StabilityConstants stability_constants(double K, double omega, double L_hat);

struct StabilityOptions {
  double envelope_slack = 1.10;  // multiplies the envelope
  double rate_slack = 0.85;      // multiplies the required decay rate
  double se_band = 3.0;          // standard errors allowed above the envelope
  unsigned workers = 1;
};

struct StabilityPoint {
  double t = 0.0;
  MCEstimate y_hat;
  double envelope = 0.0;
};

struct StabilityReport {
  double K = 0.0;
  double omega = 0.0;
  double L_hat = 0.0;
  double k = 0.0;
  double margin = 0.0;
  double y0_distance = 0.0;  // Y(0) = |x0 - y0|^2
  std::vector<StabilityPoint> curve;
  /// Least-squares slope of log Y_hat(t); -inf when fewer than two positive points.
  double fitted_rate = 0.0;
  bool envelope_ok = false;
  bool rate_ok = false;
  bool hypothesis_margin_nonpositive = false;
  bool passes = false;
};

/// Simulates coupled ensembles from x0 and y0 on shared paths over `grid`
/// and compares Y_hat(t) = E|x(t) - y(t)|^2 against the exponential
/// envelope 3 K^2 Y(0) exp(-(omega - k)(t - t0)).
///
/// A nonpositive margin is reported (passes = false, flag set), not thrown.
StabilityReport stability_verify(const Equation& eq, double K, double omega, double L_hat,
                                 std::span<const double> x0, std::span<const double> y0,
                                 const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                 const StabilityOptions& options = {});

/// Least-squares slope of log(values) against times over strictly positive values.
double fit_log_slope(std::span<const double> times, std::span<const double> values);

}  // namespace aasde
