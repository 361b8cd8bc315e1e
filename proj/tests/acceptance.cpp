// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include "aasde/aa_test.hpp"
#include "aasde/fixed_point.hpp"
#include "aasde/integrator.hpp"
#include "aasde/metrics.hpp"
#include "aasde/noise.hpp"
#include "aasde/scenario.hpp"

using namespace aasde;

namespace {

constexpr double kPi = std::numbers::pi;

// FNV-1a over raw bytes
struct Digest {
  std::uint64_t h = 1469598103934665603ULL;

  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  }
  void add(double v) { bytes(&v, sizeof v); }
  void add(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  void add(const std::string& s) { bytes(s.data(), s.size()); }
  void add(const MCEstimate& e) {
    add(e.value);
    add(e.std_err);
  }
};

struct Result {
  bool pass = false;
  std::string detail;
  std::uint64_t digest = 0;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ForcingSpec forcing(ScalarSignal s) { return ForcingSpec{{std::move(s)}}; }

// dx = (-x + sin t + 0.2 tanh x) dt + 0.1 tanh x dW
Equation contraction_equation() {
  Equation eq;
  eq.semigroup = SemigroupOperator::scalar(1.0);
  eq.drift = NonlinearField{forcing(ScalarSignal::sine(1.0, 1.0)), 0.2, Saturation::tanh, 0.04};
  eq.diffusion = NonlinearField{forcing(ScalarSignal::constant(0.0)), 0.1, Saturation::tanh, 0.01};
  eq.diffusion.base.role = ForcingSpec::Role::diffusion_g;
  return eq;
}

Equation ou_equation(double g) {
  Equation eq;
  eq.semigroup = SemigroupOperator::scalar(1.0);
  eq.drift = NonlinearField::from_forcing(forcing(ScalarSignal::sine(1.0, 1.0)));
  eq.diffusion = NonlinearField::from_forcing(forcing(ScalarSignal::constant(g)));
  eq.diffusion.base.role = ForcingSpec::Role::diffusion_g;
  return eq;
}

const TimeGrid kPicardGrid = TimeGrid::covering(0.0, 10.0, 1.0 / 64.0);
constexpr std::size_t kPicardPaths = 2000;
constexpr std::uint64_t kSeed = 20240611;

PicardOptions picard_options(unsigned workers, double c0 = 0.0) {
  PicardOptions po;
  po.burn_in_span = 20.0;
  po.tol = 1e-2;
  po.max_iter = 50;
  po.initial_constant = c0;
  po.workers = workers;
  return po;
}

Result c1(unsigned) {
  const double a = eta(1, 1, 0.1, 0.1);
  const double b = eta(2, 3, 0.2, 0.3);
  const double b_exact = 2.0 * 4.0 * 0.2 / 9.0 + 4.0 * 0.3 / 3.0;
  Result r;
  r.pass = std::abs(a - 0.3) <= 1e-12 && std::abs(b - b_exact) <= 1e-12 &&
           std::abs(b - 0.5777777777777777) <= 1e-12;
  r.detail = fmt("eta(1,1,.1,.1)=%.15g eta(2,3,.2,.3)=%.15g", a, b);
  Digest d;
  d.add(a);
  d.add(b);
  r.digest = d.h;
  return r;
}

Result c2(unsigned workers) {
  const auto s1 = stability_constants(1, 1, 0.1);
  const auto s2 = stability_constants(1, 0.5, 0.5);

  Equation eq;
  eq.semigroup = SemigroupOperator::scalar(0.5);
  eq.drift = NonlinearField{forcing(ScalarSignal::constant(0.0)), 0.5, Saturation::tanh, 0.25};
  eq.diffusion = NonlinearField::from_forcing(forcing(ScalarSignal::constant(0.1)));
  StabilityOptions so;
  so.workers = workers;
  const auto rep = stability_verify(eq, 1.0, 0.5, 0.5, StateVector{1.0}, StateVector{0.0},
                                    TimeGrid::covering(0.0, 2.0, 1.0 / 32.0), 64, kSeed, so);
  Result r;
  r.pass = std::abs(s1.k - 0.06) <= 1e-12 && std::abs(s1.margin - 0.94) <= 1e-12 &&
           std::abs(s2.margin + 0.875) <= 1e-12 && rep.hypothesis_margin_nonpositive &&
           !rep.passes;
  r.detail = fmt("k=%.15g margin=%.15g margin(1,.5,.5)=%.15g flagged=%d", s1.k, s1.margin,
                 s2.margin, rep.hypothesis_margin_nonpositive ? 1 : 0);
  Digest d;
  d.add(s1.k);
  d.add(s1.margin);
  d.add(s2.margin);
  for (const auto& p : rep.curve) d.add(p.y_hat);
  r.digest = d.h;
  return r;
}

Result c3(unsigned workers) {
  const double dt = std::ldexp(1.0, -9);
  EnsembleSpec spec;
  spec.window = TimeGrid::covering(0.0, kPi / 2.0, dt);
  spec.burn_in_span = 30.0;
  spec.n_paths = 10000;
  spec.master_seed = kSeed;
  spec.workers = workers;
  const auto ens = simulate_ensemble(ou_equation(0.5), spec);

  Result r;
  r.pass = true;
  Digest d;
  for (double t : {0.0, kPi / 4.0, kPi / 2.0}) {
    const std::size_t node = ens.grid().nearest_node(t);
    const double tn = ens.grid().time(node);
    const double mean = (std::sin(tn) - std::cos(tn)) / 2.0;
    const double exact = mean * mean + 0.125;
    const auto est = second_moment(ens, node);
    const double err = std::abs(est.value - exact);
    const double tol = 3.0 * est.std_err + 5.0 * dt;
    r.pass = r.pass && err <= tol;
    r.detail += fmt("t=%.4f err=%.2e tol=%.2e; ", tn, err, tol);
    d.add(est);
  }
  r.digest = d.h;
  return r;
}

Result c4(unsigned workers) {
  const double dt = std::ldexp(1.0, -10);
  const TimeGrid grid = TimeGrid::covering(0.0, 1.0, dt);
  const std::size_t n_paths = 100000;
  std::vector<double> h(grid.n_nodes());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = grid.time(i);

  std::vector<double> sq(n_paths);
  std::vector<std::thread> pool;
  const unsigned w = std::max(1u, workers);
  for (unsigned k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      for (std::size_t p = k; p < n_paths; p += w) {
        const auto path = sample_wiener(grid, kSeed, p);
        const double I = ito_integral(h, path, 0, grid.n_steps());
        sq[p] = I * I;
      }
    });
  }
  for (auto& t : pool) t.join();
  const auto est = estimate_mean(sq);
  const double err = std::abs(est.value - 1.0 / 3.0);
  const double tol = 3.0 * est.std_err + 5.0 * dt;
  Result r;
  r.pass = err <= tol;
  r.detail = fmt("E[I^2]=%.6f err=%.2e tol=%.2e", est.value, err, tol);
  Digest d;
  d.add(est);
  r.digest = d.h;
  return r;
}

Result c5(unsigned workers) {
  Result r;
  r.pass = true;
  Digest d;
  for (double g : {0.5, 0.0}) {
    EnsembleSpec spec;
    spec.window = TimeGrid::covering(0.0, 5.0, 1.0 / 64.0);
    spec.n_paths = 500;
    spec.master_seed = kSeed;
    spec.workers = workers;
    const Equation eq = ou_equation(g);
    const auto x = simulate_ensemble(eq, spec, StateVector{1.0});
    const auto y = simulate_ensemble(eq, spec, StateVector{0.0});
    const auto curve = square_mean_distance_curve(x, y);
    double worst_rel = 0.0, worst_se = 0.0;
    for (std::size_t n = 0; n < curve.size(); ++n) {
      const double exact = std::exp(-2.0 * x.grid().time(n));
      worst_rel = std::max(worst_rel, std::abs(curve[n].value - exact) / exact);
      worst_se = std::max(worst_se, curve[n].std_err / curve[n].value);
      d.add(curve[n]);
    }
    // with g = 0 every path is identical and the spread is exactly zero
    const bool se_ok = g == 0.0 ? worst_se == 0.0 : worst_se <= 1e-10;
    r.pass = r.pass && worst_rel <= 1e-10 && se_ok;
    r.detail += fmt("g=%.1f max_rel=%.2e max_se/value=%.2e; ", g, worst_rel, worst_se);
  }
  r.digest = d.h;
  return r;
}

void digest_picard(Digest& d, const PicardResult& res) {
  d.add(std::span<const double>(res.solution.data()));
  for (const auto& it : res.report.iterates) d.add(it.distance);
  d.add(res.report.residual);
}

Result c6(unsigned workers) {
  const auto start = std::chrono::steady_clock::now();
  const auto res = picard_solve(contraction_equation(), 1.0, 1.0, kPicardGrid, kSeed, kPicardPaths,
                                picard_options(workers));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& rep = res.report;
  const double bound = 0.09 * 1.15 + 0.02;
  Result r;
  r.pass = std::abs(rep.eta - 0.09) <= 1e-12 && rep.converged && rep.iterates.size() <= 8 &&
           rep.residual <= 1e-4 && rep.observed_ratio <= bound && secs <= 300.0;
  r.detail = fmt("eta=%.4f sweeps=%zu residual=%.2e ratio=%.4f (<= %.4f) %.1fs", rep.eta,
                 rep.iterates.size(), rep.residual, rep.observed_ratio, bound, secs);
  Digest d;
  digest_picard(d, res);
  r.digest = d.h;
  return r;
}

Result c7(unsigned workers) {
  const Equation eq = contraction_equation();
  const auto a = picard_solve(eq, 1.0, 1.0, kPicardGrid, kSeed, kPicardPaths, picard_options(workers));
  const auto b =
      picard_solve(eq, 1.0, 1.0, kPicardGrid, kSeed, kPicardPaths, picard_options(workers, 5.0));
  const double dist = sup_square_mean(a.solution, b.solution, NodeRange::all(a.solution));
  const double bound = 2.0 * 1e-2 * 1e-2;
  Result r;
  r.pass = dist <= bound;
  r.detail = fmt("sweeps %zu/%zu sup E|x-y|^2=%.2e (<= %.0e)", a.report.iterates.size(),
                 b.report.iterates.size(), dist, bound);
  Digest d;
  digest_picard(d, a);
  digest_picard(d, b);
  r.digest = d.h;
  return r;
}

Result c8(unsigned workers) {
  const Equation eq = contraction_equation();
  double L_hat = 0.0;
  for (const auto* f : {&eq.drift, &eq.diffusion}) {
    L_hat = std::max(L_hat, audit_lipschitz_pathwise(*f, 4096, 10.0, 7));
  }
  const bool audit_ok = lipschitz_audit_passes(L_hat, 0.2);
  StabilityOptions so;
  so.workers = workers;
  const auto rep = stability_verify(eq, 1.0, 1.0, 0.2, StateVector{2.0}, StateVector{0.0},
                                    kPicardGrid, kPicardPaths, kSeed, so);
  double worst = 0.0;
  for (const auto& p : rep.curve) worst = std::max(worst, p.y_hat.value / p.envelope);
  Result r;
  r.pass = audit_ok && rep.margin > 0.0 && rep.envelope_ok && rep.rate_ok && rep.passes;
  r.detail = fmt("audited L_hat=%.4f k=%.3f margin=%.3f max Y/envelope=%.3f fitted=%.3f "
                 "(<= %.3f)",
                 L_hat, rep.k, rep.margin, worst, rep.fitted_rate,
                 -(rep.omega - rep.k) * so.rate_slack);
  Digest d;
  for (const auto& p : rep.curve) d.add(p.y_hat);
  r.digest = d.h;
  return r;
}

std::vector<double> uniform_nodes(double a, double b, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(a + (b - a) * i / static_cast<double>(n - 1));
  return out;
}

Result c9(unsigned) {
  const std::vector<double> freqs{1.0, std::numbers::sqrt2};
  const auto seq = near_period_shifts(freqs, 7);
  const SignalProcess x(ScalarSignal::quasi_periodic({{1.0, 1.0, 0.0}, {1.0, std::numbers::sqrt2, 0.0}}));
  const auto nodes = uniform_nodes(0.0, 40.0, 801);
  const auto v = bochner_test(x, seq, nodes);

  const long double q = 169.0L, p = 239.0L;
  const double defect_exact =
      static_cast<double>(2.0L * std::numbers::pi_v<long double> *
                          std::fabs(q * std::numbers::sqrt2_v<long double> - p));
  const double defect = v.defects.back();
  const double budget = 4.0 * defect * defect;
  const double last_shift_exact = 2.0 * kPi * 169.0;

  const SignalProcess growth(ScalarSignal::linear_growth(1.0));
  const auto g = bochner_test(growth, seq, nodes);

  Result r;
  r.pass = std::abs(v.shifts.back() - last_shift_exact) <= 1e-9 * last_shift_exact &&
           std::abs(defect - defect_exact) <= 1e-9 && v.forward_errors.back() <= budget &&
           v.backward_errors.back() <= budget && budget <= 1.4e-3 && v.passes &&
           g.boundedness_flag && !g.passes;
  r.detail = fmt("q=%.0f defect=%.5f fwd=%.3e bwd=%.3e (<= %.3e) growth flagged=%d",
                 v.shifts.back() / (2.0 * kPi), defect, v.forward_errors.back(),
                 v.backward_errors.back(), budget, g.boundedness_flag ? 1 : 0);
  Digest d;
  d.add(std::span<const double>(v.forward_errors));
  d.add(std::span<const double>(v.backward_errors));
  r.digest = d.h;
  return r;
}

Result c10(unsigned workers) {
  const Equation eq = contraction_equation();
  const SolutionProcess x(eq, 1.0 / 64.0, 20.0, kPicardPaths, kSeed, workers);
  const auto nodes = uniform_nodes(0.0, 10.0, 21);

  std::vector<double> user;
  for (int n = 1; n <= 8; ++n) user.push_back(2.0 * kPi * n + 0.5 / (n * n));
  const std::vector<double> freqs{1.0};
  const ShiftSequence sequences[] = {near_period_shifts(freqs, 6), user_shifts(user, freqs)};

  Result r;
  r.pass = true;
  Digest d;
  for (const auto& seq : sequences) {
    const auto v = composition_test(eq.drift, x, seq, nodes);
    double slack = 0.0;
    for (std::size_t n = 0; n < seq.shifts.size(); ++n) {
      slack = std::max(slack, v.composed.forward_errors[n] - v.forward_budget[n]);
      slack = std::max(slack, v.composed.backward_errors[n] - v.backward_budget[n]);
    }
    r.pass = r.pass && v.passes && v.within_budget;
    const double probe = v.composed.cauchy_error.value_or(v.composed.forward_errors.back());
    r.detail += fmt("%s: err=%.2e thr=%.2e max(err-budget)=%.1e; ",
                    seq.provenance == ShiftSequence::Provenance::near_periods ? "near-period"
                                                                              : "user",
                    probe, v.composed.threshold, slack);
    d.add(std::span<const double>(v.composed.forward_errors));
    d.add(std::span<const double>(v.composed.backward_errors));
    d.add(std::span<const double>(v.inner.forward_errors));
  }
  r.digest = d.h;
  return r;
}

// fixed-point scenario through the full artifact path
std::uint64_t scenario_digest(unsigned workers) {
  const char* text = R"({
    "schema_version": 1,
    "name": "contraction",
    "task": "fixed_point",
    "equation": {
      "semigroup": {"repr": "scalar", "rate": 1.0},
      "drift": {"base": [{"kind": "sine", "amplitude": 1.0, "frequency": 1.0}],
                "gain": 0.2, "phi": "saturating"},
      "diffusion": {"gain": 0.1, "phi": "saturating"},
      "constants": {"K": 1.0, "omega": 1.0, "L": 0.04, "L_prime": 0.01, "L_hat": 0.2}
    },
    "grid": {"t_min": 0.0, "t_max": 5.0, "step": 0.03125, "burn_in_span": 10.0},
    "mc": {"n_paths": 300, "master_seed": 99}
  })";
  const auto sc = parse_scenario(nlohmann::json::parse(text));
  const auto dir = std::filesystem::temp_directory_path() /
                   ("aasde_acceptance_w" + std::to_string(workers));
  std::filesystem::remove_all(dir);
  RunOptions opt;
  opt.out_dir = dir;
  opt.workers = workers;
  const auto out = run_scenario(sc, opt);
  Digest d;
  d.add(std::to_string(out.exit_code));
  for (const char* f : {"report.json", "moments.csv", "trajectories.csv"}) {
    std::ifstream in(dir / f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    d.add(ss.str());
  }
  std::filesystem::remove_all(dir);
  return d.h;
}

}  // namespace

int main() {
  using Fn = Result (*)(unsigned);
  const std::pair<const char*, Fn> criteria[] = {
      {"eta arithmetic", c1},
      {"stability constants and margin flag", c2},
      {"OU second-moment oracle", c3},
      {"Ito isometry", c4},
      {"coupled decay e^{-2t}", c5},
      {"Picard contraction", c6},
      {"Picard uniqueness", c7},
      {"stability envelope", c8},
      {"AA shift test", c9},
      {"composition budget", c10},
  };

  int failures = 0;
  std::vector<std::uint64_t> base;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    Result r;
    try {
      r = criteria[i].second(1);
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    base.push_back(r.digest);
    failures += r.pass ? 0 : 1;
    std::printf("[%s] %zu %s: %s\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                r.detail.c_str());
    std::fflush(stdout);
  }

  bool same = true;
  std::string detail;
  try {
    const std::uint64_t s1 = scenario_digest(1);
    for (unsigned w : {4u, 16u}) {
      int mismatched = 0;
      for (std::size_t i = 0; i < std::size(criteria); ++i) {
        if (criteria[i].second(w).digest != base[i]) {
          ++mismatched;
          detail += fmt("criterion %zu differs at workers=%u; ", i + 1, w);
        }
      }
      const bool scen = scenario_digest(w) == s1;
      if (!scen) detail += fmt("scenario artifacts differ at workers=%u; ", w);
      same = same && mismatched == 0 && scen;
    }
  } catch (const std::exception& e) {
    same = false;
    detail += std::string("exception: ") + e.what();
  }
  if (same) detail = "criteria 1-10 and scenario artifacts identical for workers 1, 4, 16";
  failures += same ? 0 : 1;
  std::printf("[%s] 11 determinism across workers: %s\n", same ? "PASS" : "FAIL", detail.c_str());
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
