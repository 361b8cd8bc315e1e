#include "aasde/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "aasde/error.hpp"

namespace aasde {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

double norm(std::span<const double> x) { return as_vector(x).norm(); }

void require_nonnegative_step(double dt) {
  if (!(dt >= 0.0)) throw InvalidArgument("semigroup time step must be >= 0, got " + std::to_string(dt));
}

}  // namespace

std::size_t Propagator::dim() const noexcept {
  return is_diagonal() ? factors_.size() : static_cast<std::size_t>(dense_.rows());
}

void Propagator::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t d = dim();
  if (x.size() != d) throw DimensionMismatch(d, x.size());
  if (y.size() != d) throw DimensionMismatch(d, y.size());
  if (is_diagonal()) {
    for (std::size_t i = 0; i < d; ++i) y[i] = factors_[i] * x[i];
  } else {
    Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(d)).noalias() =
        dense_ * as_vector(x);
  }
}

void Propagator::apply_in_place(std::span<double> x) const {
  if (is_diagonal()) {
    if (x.size() != factors_.size()) throw DimensionMismatch(factors_.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= factors_[i];
  } else {
    const Eigen::VectorXd tmp = as_vector(x);
    apply(std::span<const double>(tmp.data(), x.size()), x);
  }
}

SemigroupOperator SemigroupOperator::scalar(double rate) {
  auto op = diagonal({rate});
  op.repr_ = Repr::scalar;
  return op;
}

SemigroupOperator SemigroupOperator::diagonal(std::vector<double> spectrum) {
  if (spectrum.empty()) throw InvalidArgument("diagonal semigroup needs a nonempty spectrum");
  for (double lambda : spectrum) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw InvalidArgument("diagonal semigroup rates must be finite and > 0, got " +
                            std::to_string(lambda));
    }
  }
  SemigroupOperator op;
  op.repr_ = Repr::diagonal;
  op.spectrum_ = std::move(spectrum);
  op.cert_ = DissipationCert{1.0, *std::min_element(op.spectrum_.begin(), op.spectrum_.end()),
                             DissipationCert::Method::exact_diagonal, 0.0};
  return op;
}

SemigroupOperator SemigroupOperator::dense(Eigen::MatrixXd generator, double cert_t_max,
                                           std::size_t cert_grid_points) {
  if (generator.rows() == 0 || generator.rows() != generator.cols()) {
    throw InvalidArgument("dense generator must be a nonempty square matrix");
  }
  if (!generator.allFinite()) throw InvalidArgument("dense generator has non-finite entries");
  SemigroupOperator op;
  op.repr_ = Repr::dense;
  op.generator_ = std::move(generator);
  const double abscissa = op.spectral_abscissa();
  if (!(abscissa < 0.0)) {
    throw InvalidArgument("dense generator has nonnegative spectral abscissa " +
                          std::to_string(abscissa));
  }
  op.cert_ = certify_dissipation(op, cert_t_max, cert_grid_points);
  return op;
}

std::size_t SemigroupOperator::dim() const noexcept {
  return repr_ == Repr::dense ? static_cast<std::size_t>(generator_.rows()) : spectrum_.size();
}

double SemigroupOperator::spectral_abscissa() const {
  if (repr_ != Repr::dense) return -*std::min_element(spectrum_.begin(), spectrum_.end());
  Eigen::EigenSolver<Eigen::MatrixXd> solver(generator_, false);
  return solver.eigenvalues().real().maxCoeff();
}

Propagator SemigroupOperator::propagator(double dt) const {
  require_nonnegative_step(dt);
  Propagator p;
  if (repr_ == Repr::dense) {
    p.dense_ = (generator_ * dt).exp();
  } else {
    p.factors_.resize(spectrum_.size());
    for (std::size_t i = 0; i < spectrum_.size(); ++i) p.factors_[i] = std::exp(-spectrum_[i] * dt);
  }
  return p;
}

StateVector SemigroupOperator::apply(double dt, std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionMismatch(dim(), x.size());
  StateVector y(x.size());
  propagator(dt).apply(x, y);
  return y;
}

double SemigroupOperator::operator_norm(double t) const {
  require_nonnegative_step(t);
  if (repr_ != Repr::dense) return std::exp(spectral_abscissa() * t);
  const Eigen::MatrixXd e = (generator_ * t).exp();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  return svd.singularValues()(0);
}

StateVector apply(const SemigroupOperator& T, double dt, std::span<const double> x) {
  return T.apply(dt, x);
}

bool envelope_holds(const SemigroupOperator& T, double K, double omega, double t_max,
                    std::size_t grid_points) {
  if (grid_points < 2) throw InvalidArgument("envelope check needs at least 2 grid points");
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double t = t_max * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    if (T.operator_norm(t) > K * std::exp(-omega * t) * (1.0 + 1e-12)) return false;
  }
  return true;
}

DissipationCert certify_dissipation(const SemigroupOperator& T, double t_max,
                                    std::size_t grid_points) {
  if (!(t_max > 0.0)) throw InvalidArgument("certification horizon must be > 0");
  if (grid_points < 2) throw InvalidArgument("certification needs at least 2 grid points");
  if (T.repr() != SemigroupOperator::Repr::dense) {
    return DissipationCert{1.0, -T.spectral_abscissa(), DissipationCert::Method::exact_diagonal, 0.0};
  }

  const double abscissa = T.spectral_abscissa();
  if (!(abscissa < 0.0)) throw InvalidArgument("generator is not dissipative");
  const double omega = 0.95 * -abscissa;

  double peak = 0.0;
  std::size_t peak_at = 0;
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double t = t_max * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    const double scaled = T.operator_norm(t) * std::exp(omega * t);
    if (scaled > peak) {
      peak = scaled;
      peak_at = k;
    }
  }
  if (peak_at + 1 == grid_points) {
    throw InvalidArgument("certification horizon too short: |exp(At)| e^{omega t} still growing at t_max=" +
                          std::to_string(t_max));
  }
  DissipationCert cert{1.05 * peak, omega, DissipationCert::Method::sampled_fit, t_max};
  if (!envelope_holds(T, cert.K, cert.omega, t_max, 4 * (grid_points - 1) + 1)) {
    throw Error("sampled dissipation certificate failed its verification grid");
  }
  return cert;
}

bool semigroup_property_check(const SemigroupOperator& T, double s, double t,
                              std::span<const double> x, double tol) {
  if (!(s >= 0.0) || !(t >= 0.0)) throw InvalidArgument("semigroup times must be >= 0");
  const auto direct = T.apply(s + t, x);
  const auto inner = T.apply(t, x);
  const auto composed = T.apply(s, inner);
  double diff = 0.0;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    diff += (direct[i] - composed[i]) * (direct[i] - composed[i]);
  }
  return std::sqrt(diff) <= tol * norm(x);
}

}  // namespace aasde
