#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "aasde/signals.hpp"

namespace aasde {

/// Certified exponential envelope |T(t)| <= K exp(-omega t).
struct DissipationCert {
  enum class Method { exact_diagonal, sampled_fit };

  double K = 1.0;
  double omega = 0.0;
  Method method = Method::exact_diagonal;
  /// Horizon over which a sampled fit was verified (0 for exact certificates).
  double verified_t_max = 0.0;
};

/// exp(A dt) for one fixed dt, ready for repeated application.
class Propagator {
 public:
  std::size_t dim() const noexcept;
  bool is_diagonal() const noexcept { return dense_.size() == 0; }

  /// y = exp(A dt) x; `y` and `x` may alias only in the diagonal case.
  void apply(std::span<const double> x, std::span<double> y) const;
  void apply_in_place(std::span<double> x) const;

  /// Diagonal factors exp(-lambda_i dt) (empty for dense propagators).
  const std::vector<double>& factors() const noexcept { return factors_; }
  const Eigen::MatrixXd& matrix() const noexcept { return dense_; }

 private:
  friend class SemigroupOperator;
  std::vector<double> factors_;
  Eigen::MatrixXd dense_;
};

/// Generator A and semigroup T(t) = exp(A t).
///
/// Three representations: scalar (A = -rate), diagonal spectral truncation
/// (A = diag(-lambda_i)) and a small dense Hurwitz matrix. The dissipation
/// certificate is computed once at construction and never changes.
class SemigroupOperator {
 public:
  enum class Repr { scalar, diagonal, dense };

  static SemigroupOperator scalar(double rate);
  static SemigroupOperator diagonal(std::vector<double> spectrum);
  /// Throws InvalidArgument unless every eigenvalue has negative real part.
  static SemigroupOperator dense(Eigen::MatrixXd generator, double cert_t_max = 60.0,
                                 std::size_t cert_grid_points = 600);

  Repr repr() const noexcept { return repr_; }
  std::size_t dim() const noexcept;
  const std::vector<double>& spectrum() const noexcept { return spectrum_; }
  const Eigen::MatrixXd& generator() const noexcept { return generator_; }
  const DissipationCert& cert() const noexcept { return cert_; }

  /// Largest real part of the spectrum of A (negative).
  double spectral_abscissa() const;

  Propagator propagator(double dt) const;
  StateVector apply(double dt, std::span<const double> x) const;

  /// Spectral norm of exp(A t).
  double operator_norm(double t) const;

 private:
  SemigroupOperator() = default;

  Repr repr_ = Repr::scalar;
  std::vector<double> spectrum_;  // rates lambda_i > 0 (scalar/diagonal)
  Eigen::MatrixXd generator_;     // dense only
  DissipationCert cert_;
};

StateVector apply(const SemigroupOperator& T, double dt, std::span<const double> x);

/// Exact certificate for scalar/diagonal generators; sampled fit for dense
/// ones (omega = 0.95 |abscissa|, K = 1.05 max_grid |exp(At)| e^{omega t}),
/// verified afterwards on a grid four times finer.
DissipationCert certify_dissipation(const SemigroupOperator& T, double t_max,
                                    std::size_t grid_points);

bool semigroup_property_check(const SemigroupOperator& T, double s, double t,
                              std::span<const double> x, double tol);

/// Checks |T(t)| <= K e^{-omega t} (relative allowance 1e-12) on a uniform grid.
bool envelope_holds(const SemigroupOperator& T, double K, double omega, double t_max,
                    std::size_t grid_points);

}  // namespace aasde
