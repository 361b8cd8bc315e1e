#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "aasde/integrator.hpp"

namespace aasde::detail {

/// Exponential Euler stepper for one equation on one lattice grid.
///
/// The state-independent parts of both fields are tabulated once per grid,
/// so a step only evaluates the saturating term.
class Stepper {
 public:
  Stepper(const Equation& eq, const TimeGrid& grid, double time_shift)
      : eq_(&eq), grid_(grid), dim_(eq.dim()), propagator_(eq.semigroup.propagator(grid.step())) {
    eq.validate();
    const std::size_t nodes = grid.n_nodes();
    drift_base_.resize(nodes * dim_);
    diffusion_base_.resize(nodes * dim_);
    for (std::size_t n = 0; n < nodes; ++n) {
      const double t = grid.time(n) + time_shift;
      eq.drift.base.eval(t, std::span<double>(drift_base_.data() + n * dim_, dim_));
      eq.diffusion.base.eval(t, std::span<double>(diffusion_base_.data() + n * dim_, dim_));
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  const TimeGrid& grid() const noexcept { return grid_; }

  /// state <- exp(A h)(state + f(t_n, arg) h + g(t_n, arg) dW); `scratch` has dim() slots.
  void advance(std::size_t node, std::span<double> state, std::span<const double> arg, double dW,
               std::span<double> scratch) const {
    const double h = grid_.step();
    const double* fb = drift_base_.data() + node * dim_;
    const double* gb = diffusion_base_.data() + node * dim_;
    const auto& f = eq_->drift;
    const auto& g = eq_->diffusion;
    for (std::size_t i = 0; i < dim_; ++i) {
      double fv = fb[i];
      double gv = gb[i];
      if (f.gain != 0.0) fv += f.gain * saturate(f.phi, arg[i]);
      if (g.gain != 0.0) gv += g.gain * saturate(g.phi, arg[i]);
      scratch[i] = state[i] + fv * h + gv * dW;
    }
    propagator_.apply(scratch, state);
  }

 private:
  const Equation* eq_;
  TimeGrid grid_;
  std::size_t dim_;
  Propagator propagator_;
  std::vector<double> drift_base_;
  std::vector<double> diffusion_base_;
};

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace aasde::detail
