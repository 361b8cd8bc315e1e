#include "aasde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aasde/error.hpp"

namespace aasde {

namespace {

void require_coupled(const TrajectoryEnsemble& a, const TrajectoryEnsemble& b) {
  if (!(a.grid() == b.grid())) throw InvalidArgument("ensembles live on different grids");
  if (a.n_paths() != b.n_paths()) throw InvalidArgument("ensembles have different path counts");
  if (a.master_seed() != b.master_seed()) {
    throw InvalidArgument("ensembles were driven by different Wiener path sets");
  }
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
}

void require_node(const TrajectoryEnsemble& ens, std::size_t node) {
  if (ens.n_paths() == 0) throw InvalidArgument("empty ensemble");
  if (node >= ens.n_nodes()) throw InvalidArgument("node outside the ensemble grid");
}

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double v) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }

  MCEstimate result() const {
    MCEstimate e{mean, 0.0, n};
    if (n > 1) e.std_err = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    return e;
  }
};

}  // namespace

MCEstimate estimate_mean(std::span<const double> samples) {
  Welford acc;
  for (double v : samples) acc.push(v);
  return acc.result();
}

MCEstimate second_moment(const TrajectoryEnsemble& ens, std::size_t node) {
  require_node(ens, node);
  Welford acc;
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    double sq = 0.0;
    for (double v : ens.state(p, node)) sq += v * v;
    acc.push(sq);
  }
  return acc.result();
}

MCEstimate square_mean_distance(const TrajectoryEnsemble& a, const TrajectoryEnsemble& b,
                                std::size_t node) {
  require_coupled(a, b);
  require_node(a, node);
  Welford acc;
  for (std::size_t p = 0; p < a.n_paths(); ++p) {
    const auto xa = a.state(p, node);
    const auto xb = b.state(p, node);
    double sq = 0.0;
    for (std::size_t i = 0; i < xa.size(); ++i) sq += (xa[i] - xb[i]) * (xa[i] - xb[i]);
    acc.push(sq);
  }
  return acc.result();
}

StateVector ensemble_mean(const TrajectoryEnsemble& ens, std::size_t node) {
  require_node(ens, node);
  StateVector mean(ens.dim(), 0.0);
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    const auto x = ens.state(p, node);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += x[i];
  }
  for (double& m : mean) m /= static_cast<double>(ens.n_paths());
  return mean;
}

std::vector<MCEstimate> second_moment_curve(const TrajectoryEnsemble& ens) {
  std::vector<MCEstimate> out;
  out.reserve(ens.n_nodes());
  for (std::size_t n = 0; n < ens.n_nodes(); ++n) out.push_back(second_moment(ens, n));
  return out;
}

std::vector<MCEstimate> square_mean_distance_curve(const TrajectoryEnsemble& a,
                                                   const TrajectoryEnsemble& b) {
  require_coupled(a, b);
  std::vector<MCEstimate> out;
  out.reserve(a.n_nodes());
  for (std::size_t n = 0; n < a.n_nodes(); ++n) out.push_back(square_mean_distance(a, b, n));
  return out;
}

namespace {

void require_range(const TrajectoryEnsemble& ens, NodeRange range) {
  if (range.begin >= range.end) throw InvalidArgument("empty node range");
  if (range.end > ens.n_nodes()) throw InvalidArgument("node range outside the grid");
}

}  // namespace

double sup_square_mean(const TrajectoryEnsemble& ens, NodeRange range) {
  require_range(ens, range);
  double best = 0.0;
  for (std::size_t n = range.begin; n < range.end; ++n) {
    best = std::max(best, second_moment(ens, n).value);
  }
  return best;
}

double sup_square_mean(const TrajectoryEnsemble& a, const TrajectoryEnsemble& b, NodeRange range) {
  require_range(a, range);
  double best = 0.0;
  for (std::size_t n = range.begin; n < range.end; ++n) {
    best = std::max(best, square_mean_distance(a, b, n).value);
  }
  return best;
}

StabilityConstants stability_constants(double K, double omega, double L_hat) {
  if (!(K > 0.0) || !(omega > 0.0)) throw InvalidArgument("K and omega must be > 0");
  if (!(L_hat >= 0.0)) throw InvalidArgument("L_hat must be >= 0");
  const double c = 3.0 * K * K * L_hat * L_hat;
  return {c * (1.0 + 1.0 / omega), omega * omega - c * (omega + 1.0)};
}

double fit_log_slope(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw DimensionMismatch(times.size(), values.size());
  double n = 0.0, st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (values[i] > 0.0 && std::isfinite(values[i])) {
      n += 1.0;
      st += times[i];
      sy += std::log(values[i]);
    }
  }
  if (n < 2.0) return -std::numeric_limits<double>::infinity();
  const double tbar = st / n;
  const double ybar = sy / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (values[i] > 0.0 && std::isfinite(values[i])) {
      const double dt = times[i] - tbar;
      sxy += dt * (std::log(values[i]) - ybar);
      sxx += dt * dt;
    }
  }
  if (sxx == 0.0) return -std::numeric_limits<double>::infinity();
  return sxy / sxx;
}

StabilityReport stability_verify(const Equation& eq, double K, double omega, double L_hat,
                                 std::span<const double> x0, std::span<const double> y0,
                                 const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                 const StabilityOptions& options) {
  if (x0.size() != eq.dim()) throw DimensionMismatch(eq.dim(), x0.size());
  if (y0.size() != eq.dim()) throw DimensionMismatch(eq.dim(), y0.size());

  StabilityReport report;
  report.K = K;
  report.omega = omega;
  report.L_hat = L_hat;
  const auto constants = stability_constants(K, omega, L_hat);
  report.k = constants.k;
  report.margin = constants.margin;
  report.hypothesis_margin_nonpositive = !(constants.margin > 0.0);
  for (std::size_t i = 0; i < x0.size(); ++i) report.y0_distance += (x0[i] - y0[i]) * (x0[i] - y0[i]);

  EnsembleSpec spec{grid, 0.0, n_paths, seed, options.workers, 0.0};
  const auto xs = simulate_ensemble(eq, spec, x0);
  const auto ys = simulate_ensemble(eq, spec, y0);
  const auto curve = square_mean_distance_curve(xs, ys);

  const double rate = omega - constants.k;
  const double t0 = grid.t_min();
  std::vector<double> times(curve.size()), values(curve.size());
  report.envelope_ok = true;
  report.curve.reserve(curve.size());
  for (std::size_t n = 0; n < curve.size(); ++n) {
    const double t = grid.time(n);
    const double envelope = 3.0 * K * K * report.y0_distance * std::exp(-rate * (t - t0));
    report.curve.push_back({t, curve[n], envelope});
    times[n] = t;
    values[n] = curve[n].value;
    if (curve[n].value - options.se_band * curve[n].std_err > envelope * options.envelope_slack) {
      report.envelope_ok = false;
    }
  }
  report.fitted_rate = fit_log_slope(times, values);
  report.rate_ok = report.fitted_rate <= -rate * options.rate_slack;
  report.passes = !report.hypothesis_margin_nonpositive && report.envelope_ok && report.rate_ok;
  return report;
}

}  // namespace aasde
