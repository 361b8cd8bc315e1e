#include "aasde/fixed_point.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aasde/error.hpp"
#include "aasde/metrics.hpp"
#include "aasde/parallel.hpp"
#include "detail/stepper.hpp"

namespace aasde {

double eta(double K, double omega, double L, double L_prime) {
  if (!(K > 0.0) || !(omega > 0.0)) throw InvalidArgument("eta needs K > 0 and omega > 0");
  if (!(L >= 0.0) || !(L_prime >= 0.0)) throw InvalidArgument("eta needs L, L' >= 0");
  return 2.0 * K * K * L / (omega * omega) + K * K * L_prime / omega;
}

FrozenNoise::FrozenNoise(const TimeGrid& window, double burn_in_span, std::size_t n_paths,
                         std::uint64_t master_seed, unsigned workers)
    : window_(window),
      extended_(window.extended_back(burn_in_span)),
      n_paths_(n_paths),
      master_seed_(master_seed),
      data_(n_paths * extended_.n_steps()) {
  parallel_for(n_paths, workers, [&](std::size_t p) {
    WienerSource(master_seed, p)
        .increments(extended_, std::span<double>(data_.data() + p * extended_.n_steps(),
                                                 extended_.n_steps()));
  });
}

namespace {

// One path of S: states of x live on the window, increments on the extension.
void apply_S_path(const detail::Stepper& stepper, std::size_t lead, std::span<const double> x,
                  std::span<const double> dw, std::span<double> out) {
  const std::size_t d = stepper.dim();
  const std::size_t steps = stepper.grid().n_steps();
  std::vector<double> state(d, 0.0), scratch(d);
  if (lead == 0) std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    const std::size_t arg_node = j > lead ? j - lead : 0;
    stepper.advance(j, state, x.subspan(arg_node * d, d), dw[j], scratch);
    if (!detail::all_finite(state)) throw DivergenceError(j + 1, stepper.grid().time(j + 1));
    if (j + 1 >= lead) {
      std::copy(state.begin(), state.end(), out.begin() + static_cast<std::ptrdiff_t>((j + 1 - lead) * d));
    }
  }
}

}  // namespace

TrajectoryEnsemble apply_S(const Equation& eq, const TrajectoryEnsemble& x, const FrozenNoise& noise,
                           unsigned workers) {
  if (!(x.grid() == noise.window())) throw InvalidArgument("iterate grid differs from the noise window");
  if (x.n_paths() != noise.n_paths()) throw InvalidArgument("iterate and noise path counts differ");
  if (x.dim() != eq.dim()) throw DimensionMismatch(eq.dim(), x.dim());
  const detail::Stepper stepper(eq, noise.extended(), 0.0);
  TrajectoryEnsemble out(x.grid(), x.dim(), x.n_paths(), noise.master_seed());
  parallel_for(x.n_paths(), workers, [&](std::size_t p) {
    apply_S_path(stepper, noise.lead_steps(), x.path_states(p), noise.increments(p), out.path_states(p));
  });
  return out;
}

Trajectory apply_S(const Equation& eq, const Trajectory& x, const WienerPath& path,
                   double burn_in_span) {
  const TimeGrid extended = x.grid.extended_back(burn_in_span);
  if (!(extended == path.grid)) {
    throw InvalidArgument("Wiener path grid must be the iterate grid extended by the burn-in span");
  }
  if (x.dim != eq.dim()) throw DimensionMismatch(eq.dim(), x.dim);
  std::vector<double> dw(extended.n_steps());
  for (std::size_t n = 0; n < dw.size(); ++n) dw[n] = path.values[n + 1] - path.values[n];
  const detail::Stepper stepper(eq, extended, 0.0);
  Trajectory out{x.grid, x.dim, std::vector<double>(x.states.size()), path.seed, path.path_index};
  apply_S_path(stepper, extended.n_steps() - x.grid.n_steps(), x.states, dw, out.states);
  return out;
}

double geometric_mean_ratio(const std::vector<IterateRecord>& iterates) {
  if (iterates.size() < 2) return 0.0;
  double log_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 1; k < iterates.size(); ++k) {
    const double prev = iterates[k - 1].distance;
    const double cur = iterates[k].distance;
    if (prev == 0.0) break;
    if (cur == 0.0) return 0.0;
    log_sum += std::log(cur / prev);
    ++count;
  }
  return count == 0 ? 0.0 : std::exp(log_sum / static_cast<double>(count));
}

PicardResult picard_solve(const Equation& eq, double K, double omega, const TimeGrid& grid,
                          std::uint64_t ensemble_seed, std::size_t n_paths,
                          const PicardOptions& options) {
  eq.validate();
  if (!(options.tol > 0.0)) throw InvalidArgument("picard tolerance must be > 0");
  if (n_paths == 0) throw InvalidArgument("picard_solve needs at least one path");

  ContractionReport report;
  report.K = K;
  report.omega = omega;
  report.L = eq.drift.declared_L;
  report.L_prime = eq.diffusion.declared_L;
  report.eta = eta(K, omega, report.L, report.L_prime);
  report.ratio_bound = report.eta + options.ratio_slack.value_or(0.15 * report.eta + 0.02);
  if (report.eta >= 1.0) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "contraction constant eta = " << report.eta << " >= 1";
    if (!options.force) throw HypothesisViolation(msg.str());
    report.warnings.push_back(msg.str() + " (forced)");
  }

  const FrozenNoise noise(grid, options.burn_in_span, n_paths, ensemble_seed, options.workers);
  TrajectoryEnsemble current(grid, eq.dim(), n_paths, ensemble_seed);
  if (options.initial_constant != 0.0) {
    for (std::size_t p = 0; p < n_paths; ++p) {
      auto s = current.path_states(p);
      std::fill(s.begin(), s.end(), options.initial_constant);
    }
  }

  const NodeRange all = NodeRange::all(current);
  std::vector<double> history;
  for (std::size_t k = 1; k <= options.max_iter; ++k) {
    TrajectoryEnsemble next = apply_S(eq, current, noise, options.workers);
    const double d = sup_square_mean(next, current, all);
    report.iterates.push_back({k, d});
    history.push_back(d);
    current = std::move(next);
    if (d <= options.tol * options.tol) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "picard iteration did not reach tol^2 = " << options.tol * options.tol << " in "
        << options.max_iter << " sweeps (last distance " << history.back() << ")";
    throw NonConvergence(msg.str(), std::move(history));
  }

  report.observed_ratio = geometric_mean_ratio(report.iterates);
  report.ratio_within_bound = report.observed_ratio <= report.ratio_bound;
  const TrajectoryEnsemble again = apply_S(eq, current, noise, options.workers);
  report.residual = sup_square_mean(again, current, all);
  return PicardResult{std::move(current), std::move(report)};
}

}  // namespace aasde
