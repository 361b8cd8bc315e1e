#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace aasde {

using StateVector = std::vector<double>;

struct SineTerm {
  double amplitude = 1.0;
  double frequency = 1.0;
  double phase = 0.0;
};

/// Deterministic scalar test signal.
///
/// A small expression tree over a fixed catalog: constants, sines,
/// quasi-periodic sums, the Levitan almost automorphic (but not almost
/// periodic) function sin(1 / (2 + cos t + cos(sqrt(2) t))), the unbounded
/// `linear_growth` control, and the `sum` / `scaled` combinators. Signals are
/// immutable and cheap to copy.
class ScalarSignal {
 public:
  enum class Kind { constant, sine, quasi_periodic, levitan, linear_growth, sum, scaled };

  struct Constant {
    double value;
  };
  struct Sine {
    SineTerm term;
  };
  struct QuasiPeriodic {
    std::vector<SineTerm> terms;
  };
  struct Levitan {};
  struct LinearGrowth {
    double slope;
  };
  struct Sum {
    std::vector<ScalarSignal> terms;
  };
  struct Scaled {
    double factor;
    std::shared_ptr<const ScalarSignal> inner;
  };
  using Node = std::variant<Constant, Sine, QuasiPeriodic, Levitan, LinearGrowth, Sum, Scaled>;

  ScalarSignal() : ScalarSignal(Constant{0.0}) {}

  static ScalarSignal constant(double value);
  static ScalarSignal sine(double amplitude, double frequency, double phase = 0.0);
  static ScalarSignal quasi_periodic(std::vector<SineTerm> terms);
  static ScalarSignal levitan();
  static ScalarSignal linear_growth(double slope);
  static ScalarSignal sum(std::vector<ScalarSignal> terms);
  static ScalarSignal scaled(double factor, ScalarSignal inner);

  Kind kind() const noexcept;
  const Node& node() const noexcept { return *node_; }

  double operator()(double t) const;

  /// sup_t |s(t)| as computed from the structure; +inf when unbounded.
  double declared_bound() const;
  bool bounded() const;

  /// C such that |s(t + h) - s(t)| <= C * max_i dist(h w_i, 2 pi Z) over the
  /// signal's frequencies w_i; +inf for levitan and nonzero linear_growth.
  double shift_sensitivity() const;

  /// Base frequencies appearing in the signal (duplicates removed, zero
  /// frequencies dropped). The Levitan function contributes 1 and sqrt(2).
  std::vector<double> frequencies() const;

 private:
  explicit ScalarSignal(Node node) : node_(std::make_shared<const Node>(std::move(node))) {}

  std::shared_ptr<const Node> node_;
};

double eval_signal(const ScalarSignal& s, double t);

/// Deterministic vector forcing, one signal per state component.
struct ForcingSpec {
  enum class Role { drift_f, diffusion_g };

  std::vector<ScalarSignal> components;
  Role role = Role::drift_f;

  std::size_t dim() const noexcept { return components.size(); }
  void eval(double t, std::span<double> out) const;
  StateVector eval(double t) const;
  double declared_bound() const;  // Euclidean bound, +inf if any component is unbounded
  bool bounded() const;
  /// Euclidean combination of the component shift sensitivities.
  double shift_sensitivity() const;
  std::vector<double> frequencies() const;
};

enum class Saturation { identity, tanh };

/// Elementwise map used by nonlinear fields; both variants are 1-Lipschitz.
inline double saturate(Saturation phi, double u);

/// f(t, x) = base(t) + gain * phi(x), evaluated elementwise.
struct NonlinearField {
  ForcingSpec base;
  double gain = 0.0;
  Saturation phi = Saturation::identity;
  /// Declared mean-square Lipschitz constant: E|f(t,x)-f(t,y)|^2 <= L E|x-y|^2.
  double declared_L = 0.0;

  std::size_t dim() const noexcept { return base.dim(); }
  bool state_dependent() const noexcept { return gain != 0.0; }

  /// Field that ignores the state.
  static NonlinearField from_forcing(ForcingSpec forcing);
};

StateVector eval_field(const NonlinearField& field, double t, std::span<const double> x);

/// Largest observed |f(t,x)-f(t,y)|^2 / |x-y|^2 over `samples` random pairs
/// drawn uniformly from the cube of half-width `domain_radius`.
double audit_lipschitz(const NonlinearField& field, std::size_t samples, double domain_radius,
                       std::uint64_t rng_seed);

/// Pathwise (norm-level) counterpart: largest |f(t,x)-f(t,y)| / |x-y|.
double audit_lipschitz_pathwise(const NonlinearField& field, std::size_t samples,
                                double domain_radius, std::uint64_t rng_seed);

/// Audit verdict with a relative allowance of 1e-9 for rounding.
bool lipschitz_audit_passes(double observed, double declared);

inline double saturate(Saturation phi, double u) {
  return phi == Saturation::identity ? u : std::tanh(u);
}

}  // namespace aasde
