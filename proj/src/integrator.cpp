#include "aasde/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aasde/error.hpp"
#include "aasde/parallel.hpp"
#include "detail/stepper.hpp"

namespace aasde {

void Equation::validate() const {
  if (drift.dim() != dim()) throw DimensionMismatch(dim(), drift.dim());
  if (diffusion.dim() != dim()) throw DimensionMismatch(dim(), diffusion.dim());
}

TrajectoryEnsemble::TrajectoryEnsemble(TimeGrid grid, std::size_t dim, std::size_t n_paths,
                                       std::uint64_t master_seed)
    : grid_(grid),
      dim_(dim),
      n_paths_(n_paths),
      master_seed_(master_seed),
      data_(n_paths * grid.n_nodes() * dim, 0.0) {}

Trajectory TrajectoryEnsemble::trajectory(std::size_t path) const {
  const auto s = path_states(path);
  return Trajectory{grid_, dim_, std::vector<double>(s.begin(), s.end()), master_seed_, path};
}

StateVector mild_step(const SemigroupOperator& T, double /*t*/, std::span<const double> x, double dt,
                      std::span<const double> f_val, std::span<const double> g_val, double dW) {
  if (!(dt > 0.0)) throw InvalidArgument("mild_step needs dt > 0");
  const std::size_t d = T.dim();
  if (x.size() != d) throw DimensionMismatch(d, x.size());
  if (f_val.size() != d) throw DimensionMismatch(d, f_val.size());
  if (g_val.size() != d) throw DimensionMismatch(d, g_val.size());
  if (!detail::all_finite(x) || !detail::all_finite(f_val) || !detail::all_finite(g_val) ||
      !std::isfinite(dW)) {
    throw InvalidArgument("mild_step received non-finite input");
  }
  StateVector y(d);
  for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + f_val[i] * dt + g_val[i] * dW;
  return T.apply(dt, y);
}

namespace {

// Runs the stepper over every step of `stepper.grid()` from `state`, writing
// nodes [record_from, n_nodes) into `out` (if nonempty) relative to record_from.
void run_path(const detail::Stepper& stepper, std::span<const double> increments,
              std::span<double> state, std::size_t record_from, std::span<double> out) {
  const auto& grid = stepper.grid();
  const std::size_t d = stepper.dim();
  std::vector<double> scratch(d);
  if (!detail::all_finite(state)) throw DivergenceError(0, grid.time(0));
  auto record = [&](std::size_t node) {
    if (!out.empty() && node >= record_from) {
      std::copy(state.begin(), state.end(), out.begin() + (node - record_from) * d);
    }
  };
  record(0);
  for (std::size_t n = 0; n < grid.n_steps(); ++n) {
    stepper.advance(n, state, state, increments[n], scratch);
    if (!detail::all_finite(state)) throw DivergenceError(n + 1, grid.time(n + 1));
    record(n + 1);
  }
}

void check_subgrid(const TimeGrid& grid, const TimeGrid& outer) {
  if (grid.step() != outer.step() || grid.first_index() < outer.first_index() ||
      grid.last_index() > outer.last_index()) {
    throw InvalidArgument("simulation grid is not a sub-grid of the Wiener path grid");
  }
}

}  // namespace

Trajectory simulate(const Equation& eq, std::span<const double> x0, const TimeGrid& grid,
                    const WienerPath& path, double time_shift) {
  check_subgrid(grid, path.grid);
  if (x0.size() != eq.dim()) throw DimensionMismatch(eq.dim(), x0.size());
  const auto offset = static_cast<std::size_t>(grid.first_index() - path.grid.first_index());
  std::vector<double> dw(grid.n_steps());
  for (std::size_t n = 0; n < dw.size(); ++n) {
    dw[n] = path.values[offset + n + 1] - path.values[offset + n];
  }
  const detail::Stepper stepper(eq, grid, time_shift);
  Trajectory traj{grid, eq.dim(), std::vector<double>(grid.n_nodes() * eq.dim()), path.seed,
                  path.path_index};
  StateVector state(x0.begin(), x0.end());
  run_path(stepper, dw, state, 0, traj.states);
  return traj;
}

Trajectory simulate(const Equation& eq, std::span<const double> x0, const TimeGrid& grid,
                    const WienerSource& noise, double time_shift) {
  if (x0.size() != eq.dim()) throw DimensionMismatch(eq.dim(), x0.size());
  const detail::Stepper stepper(eq, grid, time_shift);
  const auto dw = noise.increments(grid);
  Trajectory traj{grid, eq.dim(), std::vector<double>(grid.n_nodes() * eq.dim()), noise.seed(),
                  noise.path_index()};
  StateVector state(x0.begin(), x0.end());
  run_path(stepper, dw, state, 0, traj.states);
  return traj;
}

StateVector convolution_solution(const SemigroupOperator& T, const ForcingSpec& f, double t,
                                 double tol, double max_step) {
  if (f.dim() != T.dim()) throw DimensionMismatch(T.dim(), f.dim());
  if (!(tol > 0.0)) throw InvalidArgument("convolution tolerance must be > 0");
  if (!(max_step > 0.0)) throw InvalidArgument("convolution step must be > 0");
  if (!f.bounded()) throw HypothesisViolation("convolution_solution: forcing is unbounded");
  const double bound = f.declared_bound();
  StateVector acc(T.dim(), 0.0);
  if (bound == 0.0) return acc;

  const auto& cert = T.cert();
  const double tail = std::max(0.0, std::log(cert.K * bound / (cert.omega * tol)) / cert.omega);
  auto n = static_cast<std::size_t>(std::ceil(tail / max_step));
  n = std::max<std::size_t>(2, n + (n % 2));
  const double h = tail / static_cast<double>(n);
  if (h == 0.0) return acc;

  // Horner form of sum_j w_j T(j h) f(t - j h) with Simpson weights 1,4,2,...,4,1
  const Propagator step = T.propagator(h);
  StateVector fj(T.dim()), scratch(T.dim());
  for (std::size_t j = n + 1; j-- > 0;) {
    const double w = (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    if (j != n) {
      step.apply(acc, scratch);
      acc.swap(scratch);
    }
    f.eval(t - static_cast<double>(j) * h, fj);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * fj[i];
  }
  for (double& v : acc) v *= h / 3.0;
  return acc;
}

StateVector aa_initial_value(const Equation& eq, const TimeGrid& grid, const WienerSource& noise,
                             double burn_in_span, double time_shift) {
  if (!(burn_in_span > 0.0)) throw InvalidArgument("burn-in span must be > 0");
  const std::size_t steps = grid.steps_for(burn_in_span);
  const TimeGrid lead(grid.first_index() - static_cast<std::int64_t>(steps), steps, grid.step());
  const detail::Stepper stepper(eq, lead, time_shift);
  StateVector state(eq.dim(), 0.0);
  run_path(stepper, noise.increments(lead), state, 0, {});
  return state;
}

StateVector aa_initial_value(const Equation& eq, const TimeGrid& grid, const WienerPath& path,
                             double burn_in_span, double time_shift) {
  if (!(burn_in_span > 0.0)) throw InvalidArgument("burn-in span must be > 0");
  const std::size_t steps = grid.steps_for(burn_in_span);
  const TimeGrid lead(grid.first_index() - static_cast<std::int64_t>(steps), steps, grid.step());
  StateVector zero(eq.dim(), 0.0);
  const auto traj = simulate(eq, zero, lead, path, time_shift);
  const auto last = traj.state(lead.n_steps());
  return StateVector(last.begin(), last.end());
}

TrajectoryEnsemble simulate_ensemble(const Equation& eq, const EnsembleSpec& spec,
                                     std::span<const double> x0) {
  eq.validate();
  if (!x0.empty() && x0.size() != eq.dim()) throw DimensionMismatch(eq.dim(), x0.size());
  if (spec.n_paths == 0) throw InvalidArgument("ensemble needs at least one path");
  const TimeGrid full = spec.burn_in_span > 0.0 ? spec.window.extended_back(spec.burn_in_span)
                                                : spec.window;
  const std::size_t record_from = full.n_nodes() - spec.window.n_nodes();
  const detail::Stepper stepper(eq, full, spec.time_shift);
  TrajectoryEnsemble ens(spec.window, eq.dim(), spec.n_paths, spec.master_seed);
  parallel_for(spec.n_paths, spec.workers, [&](std::size_t p) {
    const WienerSource noise(spec.master_seed, p);
    const auto dw = noise.increments(full);
    StateVector state = x0.empty() ? StateVector(eq.dim(), 0.0) : StateVector(x0.begin(), x0.end());
    run_path(stepper, dw, state, record_from, ens.path_states(p));
  });
  return ens;
}

}  // namespace aasde
