#include "aasde/signals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "aasde/error.hpp"
#include "aasde/rng.hpp"

namespace aasde {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

double eval_term(const SineTerm& s, double t) {
  return s.amplitude * std::sin(s.frequency * t + s.phase);
}

void collect_frequencies(const ScalarSignal& s, std::vector<double>& out) {
  std::visit(overloaded{
                 [](const ScalarSignal::Constant&) {},
                 [&](const ScalarSignal::Sine& n) {
                   if (n.term.frequency != 0.0 && n.term.amplitude != 0.0) {
                     out.push_back(std::abs(n.term.frequency));
                   }
                 },
                 [&](const ScalarSignal::QuasiPeriodic& n) {
                   for (const auto& term : n.terms) {
                     if (term.frequency != 0.0 && term.amplitude != 0.0) {
                       out.push_back(std::abs(term.frequency));
                     }
                   }
                 },
                 [&](const ScalarSignal::Levitan&) {
                   out.push_back(1.0);
                   out.push_back(std::numbers::sqrt2);
                 },
                 [](const ScalarSignal::LinearGrowth&) {},
                 [&](const ScalarSignal::Sum& n) {
                   for (const auto& term : n.terms) collect_frequencies(term, out);
                 },
                 [&](const ScalarSignal::Scaled& n) {
                   if (n.factor != 0.0) collect_frequencies(*n.inner, out);
                 },
             },
             s.node());
}

}  // namespace

ScalarSignal ScalarSignal::constant(double value) { return ScalarSignal(Constant{value}); }

ScalarSignal ScalarSignal::sine(double amplitude, double frequency, double phase) {
  return ScalarSignal(Sine{SineTerm{amplitude, frequency, phase}});
}

ScalarSignal ScalarSignal::quasi_periodic(std::vector<SineTerm> terms) {
  return ScalarSignal(QuasiPeriodic{std::move(terms)});
}

ScalarSignal ScalarSignal::levitan() { return ScalarSignal(Levitan{}); }

ScalarSignal ScalarSignal::linear_growth(double slope) { return ScalarSignal(LinearGrowth{slope}); }

ScalarSignal ScalarSignal::sum(std::vector<ScalarSignal> terms) {
  return ScalarSignal(Sum{std::move(terms)});
}

ScalarSignal ScalarSignal::scaled(double factor, ScalarSignal inner) {
  return ScalarSignal(Scaled{factor, std::make_shared<const ScalarSignal>(std::move(inner))});
}

ScalarSignal::Kind ScalarSignal::kind() const noexcept { return static_cast<Kind>(node_->index()); }

double ScalarSignal::operator()(double t) const {
  return std::visit(
      overloaded{
          [](const Constant& n) { return n.value; },
          [t](const Sine& n) { return eval_term(n.term, t); },
          [t](const QuasiPeriodic& n) {
            double acc = 0.0;
            for (const auto& term : n.terms) acc += eval_term(term, t);
            return acc;
          },
          [t](const Levitan&) {
            return std::sin(1.0 / (2.0 + std::cos(t) + std::cos(std::numbers::sqrt2 * t)));
          },
          [t](const LinearGrowth& n) { return n.slope * t; },
          [t](const Sum& n) {
            double acc = 0.0;
            for (const auto& term : n.terms) acc += term(t);
            return acc;
          },
          [t](const Scaled& n) { return n.factor * (*n.inner)(t); },
      },
      *node_);
}

double ScalarSignal::declared_bound() const {
  return std::visit(overloaded{
                        [](const Constant& n) { return std::abs(n.value); },
                        [](const Sine& n) { return std::abs(n.term.amplitude); },
                        [](const QuasiPeriodic& n) {
                          double acc = 0.0;
                          for (const auto& term : n.terms) acc += std::abs(term.amplitude);
                          return acc;
                        },
                        [](const Levitan&) { return 1.0; },
                        [](const LinearGrowth& n) { return n.slope == 0.0 ? 0.0 : kInf; },
                        [](const Sum& n) {
                          double acc = 0.0;
                          for (const auto& term : n.terms) acc += term.declared_bound();
                          return acc;
                        },
                        [](const Scaled& n) {
                          return n.factor == 0.0 ? 0.0 : std::abs(n.factor) * n.inner->declared_bound();
                        },
                    },
                    *node_);
}

double ScalarSignal::shift_sensitivity() const {
  return std::visit(overloaded{
                        [](const Constant&) { return 0.0; },
                        [](const Sine& n) {
                          return n.term.frequency == 0.0 ? 0.0 : std::abs(n.term.amplitude);
                        },
                        [](const QuasiPeriodic& n) {
                          double acc = 0.0;
                          for (const auto& term : n.terms) {
                            if (term.frequency != 0.0) acc += std::abs(term.amplitude);
                          }
                          return acc;
                        },
                        [](const Levitan&) { return kInf; },
                        [](const LinearGrowth& n) { return n.slope == 0.0 ? 0.0 : kInf; },
                        [](const Sum& n) {
                          double acc = 0.0;
                          for (const auto& term : n.terms) acc += term.shift_sensitivity();
                          return acc;
                        },
                        [](const Scaled& n) {
                          return n.factor == 0.0 ? 0.0 : std::abs(n.factor) * n.inner->shift_sensitivity();
                        },
                    },
                    *node_);
}

bool ScalarSignal::bounded() const { return std::isfinite(declared_bound()); }

std::vector<double> ScalarSignal::frequencies() const {
  std::vector<double> out;
  collect_frequencies(*this, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double eval_signal(const ScalarSignal& s, double t) { return s(t); }

void ForcingSpec::eval(double t, std::span<double> out) const {
  if (out.size() != components.size()) throw DimensionMismatch(components.size(), out.size());
  for (std::size_t i = 0; i < components.size(); ++i) out[i] = components[i](t);
}

StateVector ForcingSpec::eval(double t) const {
  StateVector out(components.size());
  eval(t, out);
  return out;
}

double ForcingSpec::declared_bound() const {
  double sq = 0.0;
  for (const auto& c : components) {
    const double b = c.declared_bound();
    if (!std::isfinite(b)) return kInf;
    sq += b * b;
  }
  return std::sqrt(sq);
}

double ForcingSpec::shift_sensitivity() const {
  double sq = 0.0;
  for (const auto& c : components) {
    const double b = c.shift_sensitivity();
    if (!std::isfinite(b)) return kInf;
    sq += b * b;
  }
  return std::sqrt(sq);
}

bool ForcingSpec::bounded() const { return std::isfinite(declared_bound()); }

std::vector<double> ForcingSpec::frequencies() const {
  std::vector<double> out;
  for (const auto& c : components) {
    auto f = c.frequencies();
    out.insert(out.end(), f.begin(), f.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NonlinearField NonlinearField::from_forcing(ForcingSpec forcing) {
  NonlinearField field;
  field.base = std::move(forcing);
  return field;
}

StateVector eval_field(const NonlinearField& field, double t, std::span<const double> x) {
  if (x.size() != field.dim()) throw DimensionMismatch(field.dim(), x.size());
  StateVector out = field.base.eval(t);
  if (field.gain != 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += field.gain * saturate(field.phi, x[i]);
  }
  return out;
}

namespace {

// Max of |f(t,x)-f(t,y)|^2 / |x-y|^2 over random pairs.
double max_squared_ratio(const NonlinearField& field, std::size_t samples, double radius,
                         std::uint64_t seed) {
  if (samples < 2) throw InvalidArgument("lipschitz audit needs at least 2 samples");
  if (!(radius > 0.0)) throw InvalidArgument("lipschitz audit needs a positive domain radius");
  const std::size_t d = field.dim();
  if (d == 0) return 0.0;
  const CounterRng rng(seed, 0xA0D17ull);
  std::int64_t counter = 0;
  auto uniform = [&]() {
    const auto u = rng.uniform_pair(counter++);
    return radius * (2.0 * u[0] - 1.0);
  };
  StateVector x(d), y(d);
  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = uniform();
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = uniform();
      y[i] = uniform();
    }
    const auto fx = eval_field(field, t, x);
    const auto fy = eval_field(field, t, y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      num += (fx[i] - fy[i]) * (fx[i] - fy[i]);
      den += (x[i] - y[i]) * (x[i] - y[i]);
    }
    if (den > 0.0) worst = std::max(worst, num / den);
  }
  return worst;
}

}  // namespace

double audit_lipschitz(const NonlinearField& field, std::size_t samples, double domain_radius,
                       std::uint64_t rng_seed) {
  return max_squared_ratio(field, samples, domain_radius, rng_seed);
}

double audit_lipschitz_pathwise(const NonlinearField& field, std::size_t samples,
                                double domain_radius, std::uint64_t rng_seed) {
  return std::sqrt(max_squared_ratio(field, samples, domain_radius, rng_seed));
}

bool lipschitz_audit_passes(double observed, double declared) {
  return observed <= declared * (1.0 + 1e-9);
}

}  // namespace aasde
