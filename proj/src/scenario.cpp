#include "aasde/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "aasde/artifacts.hpp"
#include "aasde/error.hpp"
#include "aasde/fixed_point.hpp"
#include "aasde/metrics.hpp"

namespace aasde {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kAuditSeed = 0x6175646974ULL;

// Object view that remembers which keys were read, so that leftovers can be
// rejected as unknown.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) fail("missing key '" + key + "'");
    return *it;
  }
  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key) { return as_number(get(key), key); }
  std::optional<double> opt_number(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return as_number(*v, key);
  }
  double number_or(const std::string& key, double fallback) {
    return opt_number(key).value_or(fallback);
  }

  std::optional<std::uint64_t> opt_unsigned(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      fail("'" + key + "' must be a nonnegative integer");
    }
    return v->get<std::uint64_t>();
  }
  std::size_t count_or(const std::string& key, std::size_t fallback) {
    return static_cast<std::size_t>(opt_unsigned(key).value_or(fallback));
  }

  std::optional<std::string> opt_string(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail("'" + key + "' must be a string");
    return v->get<std::string>();
  }

  std::optional<bool> opt_bool(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) fail("'" + key + "' must be a boolean");
    return v->get<bool>();
  }

  std::optional<std::vector<double>> opt_vector(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail("'" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) out.push_back(as_number(e, key));
    return out;
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  /// Throws on any key that was never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail("unknown key '" + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

 private:
  double as_number(const json& v, const std::string& key) const {
    if (!v.is_number()) fail("'" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail("'" + key + "' must be finite");
    return x;
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ScalarSignal parse_signal(const json& j, const std::string& where);

std::vector<ScalarSignal> parse_signal_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of signals");
  std::vector<ScalarSignal> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(parse_signal(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

SineTerm parse_sine_term(Reader& r) {
  SineTerm term;
  term.amplitude = r.number_or("amplitude", 1.0);
  term.frequency = r.number("frequency");
  term.phase = r.number_or("phase", 0.0);
  return term;
}

ScalarSignal parse_signal(const json& j, const std::string& where) {
  if (j.is_number()) return ScalarSignal::constant(j.get<double>());
  Reader r(j, where);
  const auto kind = r.opt_string("kind");
  if (!kind) r.fail("missing key 'kind'");
  ScalarSignal out;
  if (*kind == "constant") {
    out = ScalarSignal::constant(r.number("value"));
  } else if (*kind == "sine") {
    const SineTerm t = parse_sine_term(r);
    out = ScalarSignal::sine(t.amplitude, t.frequency, t.phase);
  } else if (*kind == "quasi_periodic") {
    const json& terms = r.get("terms");
    if (!terms.is_array() || terms.empty()) r.fail("'terms' must be a nonempty array");
    std::vector<SineTerm> list;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      Reader tr(terms[i], r.path("terms") + "[" + std::to_string(i) + "]");
      list.push_back(parse_sine_term(tr));
      tr.finish();
    }
    out = ScalarSignal::quasi_periodic(std::move(list));
  } else if (*kind == "levitan") {
    out = ScalarSignal::levitan();
  } else if (*kind == "linear_growth") {
    out = ScalarSignal::linear_growth(r.number("slope"));
  } else if (*kind == "sum") {
    out = ScalarSignal::sum(parse_signal_list(r.get("terms"), r.path("terms")));
  } else if (*kind == "scaled") {
    const double factor = r.number("factor");
    out = ScalarSignal::scaled(factor, parse_signal(r.get("signal"), r.path("signal")));
  } else {
    r.fail("unknown signal kind '" + *kind + "'");
  }
  r.finish();
  return out;
}

SemigroupOperator parse_semigroup(const json& j, const std::string& where) {
  Reader r(j, where);
  const auto repr = r.opt_string("repr");
  if (!repr) r.fail("missing key 'repr'");
  try {
    if (*repr == "scalar") {
      const double rate = r.number("rate");
      r.finish();
      return SemigroupOperator::scalar(rate);
    }
    if (*repr == "diagonal") {
      auto spectrum = r.opt_vector("spectrum");
      if (!spectrum) r.fail("missing key 'spectrum'");
      r.finish();
      return SemigroupOperator::diagonal(std::move(*spectrum));
    }
    if (*repr == "dense") {
      const json& m = r.get("matrix");
      if (!m.is_array() || m.empty()) r.fail("'matrix' must be a nonempty array of rows");
      const std::size_t n = m.size();
      Eigen::MatrixXd A(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!m[i].is_array() || m[i].size() != n) r.fail("'matrix' must be square");
        for (std::size_t k = 0; k < n; ++k) {
          if (!m[i][k].is_number()) r.fail("'matrix' entries must be numbers");
          A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = m[i][k].get<double>();
        }
      }
      const double t_max = r.number_or("cert_t_max", 60.0);
      const std::size_t points = r.count_or("cert_grid_points", 600);
      r.finish();
      return SemigroupOperator::dense(std::move(A), t_max, points);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r.fail(e.what());
  }
  r.fail("unknown semigroup repr '" + *repr + "'");
}

struct FieldDraft {
  NonlinearField field;
  std::optional<double> declared_L;
};

FieldDraft parse_field(const json* j, std::size_t dim, ForcingSpec::Role role,
                       const std::string& where) {
  FieldDraft out;
  out.field.base.role = role;
  if (!j) {
    out.field.base.components.assign(dim, ScalarSignal::constant(0.0));
    return out;
  }
  if (j->is_array()) {
    out.field.base.components = parse_signal_list(*j, where);
  } else {
    Reader r(*j, where);
    if (const json* base = r.find("base")) {
      out.field.base.components = parse_signal_list(*base, r.path("base"));
    } else {
      out.field.base.components.assign(dim, ScalarSignal::constant(0.0));
    }
    out.field.gain = r.number_or("gain", 0.0);
    const auto phi = r.opt_string("phi").value_or("identity");
    if (phi == "identity") {
      out.field.phi = Saturation::identity;
    } else if (phi == "saturating" || phi == "tanh") {
      out.field.phi = Saturation::tanh;
    } else {
      r.fail("'phi' must be \"identity\" or \"saturating\"");
    }
    out.declared_L = r.opt_number("declared_L");
    r.finish();
  }
  if (out.field.base.dim() != dim) {
    throw ConfigError(where + ": " + std::to_string(out.field.base.dim()) +
                      " components for a state of dimension " + std::to_string(dim));
  }
  return out;
}

double resolve_lipschitz(const FieldDraft& draft, std::optional<double> constant,
                         const std::string& field_name, const std::string& constant_name) {
  if (draft.declared_L && constant && *draft.declared_L != *constant) {
    throw ConfigError("equation." + field_name + ".declared_L disagrees with equation.constants." +
                      constant_name);
  }
  const auto value = draft.declared_L ? draft.declared_L : constant;
  if (value) {
    if (*value < 0.0) throw ConfigError("equation.constants." + constant_name + " must be >= 0");
    return *value;
  }
  if (draft.field.gain == 0.0) return 0.0;
  throw ConfigError("missing constant " + constant_name + " for the state-dependent " +
                    field_name + " field");
}

StateVector parse_state(Reader& r, const std::string& key, std::size_t dim) {
  const json& v = r.get(key);
  if (v.is_number()) return StateVector(dim, v.get<double>());
  auto values = r.opt_vector(key);
  if (values->size() != dim) {
    r.fail("'" + key + "' has " + std::to_string(values->size()) + " components, expected " +
           std::to_string(dim));
  }
  return *values;
}

LimitCandidate parse_candidate(Reader& r, const std::string& name) {
  if (name == "unshifted") return LimitCandidate::unshifted;
  if (name == "deepest_shift") return LimitCandidate::deepest_shift;
  r.fail("'candidate' must be \"unshifted\" or \"deepest_shift\"");
}

AAConfig parse_aa(const json& j, std::size_t dim) {
  Reader r(j, "aa");
  AAConfig aa;
  const auto process = r.opt_string("process").value_or("signal");
  if (process == "signal") {
    aa.source = AAConfig::Source::signal;
    const json& s = r.get("signal");
    if (s.is_array()) {
      aa.signal.components = parse_signal_list(s, "aa.signal");
    } else {
      aa.signal.components = {parse_signal(s, "aa.signal")};
    }
    if (aa.signal.components.empty()) r.fail("'signal' is empty");
  } else if (process == "solution") {
    aa.source = AAConfig::Source::solution;
  } else if (process == "composition") {
    aa.source = AAConfig::Source::composition;
    const auto field = r.opt_string("composition_field").value_or("drift");
    if (field == "drift") {
      aa.composition_field = ForcingSpec::Role::drift_f;
    } else if (field == "diffusion") {
      aa.composition_field = ForcingSpec::Role::diffusion_g;
    } else {
      r.fail("'composition_field' must be \"drift\" or \"diffusion\"");
    }
  } else {
    r.fail("'process' must be \"signal\", \"solution\" or \"composition\"");
  }
  if (aa.source != AAConfig::Source::composition && r.has("composition_field")) {
    r.fail("'composition_field' only applies to process \"composition\"");
  }
  (void)dim;
  aa.frequencies = r.opt_vector("frequencies").value_or(std::vector<double>{});
  aa.depth = r.count_or("depth", 7);
  aa.shifts = r.opt_vector("shifts").value_or(std::vector<double>{});
  if (const auto c = r.opt_string("candidate")) aa.candidate = parse_candidate(r, *c);
  aa.test_nodes = r.opt_vector("test_nodes").value_or(std::vector<double>{});
  r.finish();
  return aa;
}

}  // namespace

Task parse_task(std::string_view name) {
  if (name == "simulate") return Task::simulate;
  if (name == "fixed_point" || name == "fixed-point") return Task::fixed_point;
  if (name == "stability") return Task::stability;
  if (name == "aa_test" || name == "aa-test") return Task::aa_test;
  if (name == "check_conditions" || name == "check-conditions") return Task::check_conditions;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::string_view task_name(Task task) {
  switch (task) {
    case Task::simulate: return "simulate";
    case Task::fixed_point: return "fixed_point";
    case Task::stability: return "stability";
    case Task::aa_test: return "aa_test";
    case Task::check_conditions: return "check_conditions";
  }
  return "unknown";
}

Scenario parse_scenario(const json& config) {
  Reader top(config, "config");
  Scenario sc;

  const auto version = top.opt_unsigned("schema_version");
  if (!version) top.fail("missing key 'schema_version'");
  if (*version != static_cast<std::uint64_t>(kSchemaVersion)) {
    top.fail("unsupported schema_version " + std::to_string(*version));
  }
  sc.name = top.opt_string("name").value_or("");
  if (sc.name.empty()) top.fail("missing key 'name'");
  if (const auto t = top.opt_string("task")) sc.task = parse_task(*t);

  {
    Reader eq(top.get("equation"), "equation");
    sc.equation.semigroup = parse_semigroup(eq.get("semigroup"), "equation.semigroup");
    const std::size_t dim = sc.equation.semigroup.dim();

    if (const json* c = eq.find("constants")) {
      Reader cr(*c, "equation.constants");
      sc.constants.K = cr.opt_number("K");
      sc.constants.omega = cr.opt_number("omega");
      sc.constants.L = cr.opt_number("L");
      sc.constants.L_prime = cr.opt_number("L_prime");
      sc.constants.L_hat = cr.opt_number("L_hat");
      cr.finish();
      if (sc.constants.K && *sc.constants.K < 1.0) cr.fail("K must be >= 1");
      if (sc.constants.omega && *sc.constants.omega <= 0.0) cr.fail("omega must be > 0");
      if (sc.constants.L_hat && *sc.constants.L_hat < 0.0) cr.fail("L_hat must be >= 0");
    }

    auto drift = parse_field(eq.find("drift"), dim, ForcingSpec::Role::drift_f, "equation.drift");
    auto diffusion = parse_field(eq.find("diffusion"), dim, ForcingSpec::Role::diffusion_g,
                                 "equation.diffusion");
    eq.finish();
    drift.field.declared_L = resolve_lipschitz(drift, sc.constants.L, "drift", "L");
    diffusion.field.declared_L =
        resolve_lipschitz(diffusion, sc.constants.L_prime, "diffusion", "L_prime");
    sc.equation.drift = std::move(drift.field);
    sc.equation.diffusion = std::move(diffusion.field);
  }
  const std::size_t dim = sc.equation.dim();

  {
    Reader g(top.get("grid"), "grid");
    sc.grid.t_min = g.number("t_min");
    sc.grid.t_max = g.number("t_max");
    sc.grid.step = g.number("step");
    sc.grid.burn_in_span = g.number_or("burn_in_span", 0.0);
    g.finish();
    if (!(sc.grid.step > 0.0)) g.fail("step must be > 0");
    if (!(sc.grid.t_max > sc.grid.t_min)) g.fail("t_max must exceed t_min");
    if (sc.grid.burn_in_span < 0.0) g.fail("burn_in_span must be >= 0");
  }

  if (const json* mc = top.find("mc")) {
    Reader m(*mc, "mc");
    sc.n_paths = m.count_or("n_paths", sc.n_paths);
    sc.master_seed = m.opt_unsigned("master_seed").value_or(0);
    m.finish();
    if (sc.n_paths == 0) m.fail("n_paths must be >= 1");
  }

  if (const json* init = top.find("initial")) {
    Reader r(*init, "initial");
    if (r.has("x0")) sc.x0 = parse_state(r, "x0", dim);
    if (r.has("y0")) sc.y0 = parse_state(r, "y0", dim);
    sc.initial_constant = r.number_or("constant", 0.0);
    r.finish();
  }

  if (const json* tol = top.find("tolerances")) {
    Reader r(*tol, "tolerances");
    Tolerances& t = sc.tolerances;
    t.picard_tol = r.number_or("picard_tol", t.picard_tol);
    t.max_iter = r.count_or("max_iter", t.max_iter);
    t.ratio_slack = r.opt_number("ratio_slack");
    t.envelope_slack = r.number_or("envelope_slack", t.envelope_slack);
    t.rate_slack = r.number_or("rate_slack", t.rate_slack);
    t.se_band = r.number_or("se_band", t.se_band);
    t.aa_threshold = r.opt_number("aa_threshold");
    t.moment_cap = r.number_or("moment_cap", t.moment_cap);
    t.lipschitz_samples = r.count_or("lipschitz_samples", t.lipschitz_samples);
    t.lipschitz_radius = r.number_or("lipschitz_radius", t.lipschitz_radius);
    t.dissipation_check_points = r.count_or("dissipation_check_points", t.dissipation_check_points);
    r.finish();
    if (!(t.picard_tol > 0.0)) r.fail("picard_tol must be > 0");
    if (t.max_iter == 0) r.fail("max_iter must be >= 1");
    if (t.lipschitz_samples == 0) r.fail("lipschitz_samples must be >= 1");
    if (!(t.lipschitz_radius > 0.0)) r.fail("lipschitz_radius must be > 0");
    if (t.dissipation_check_points < 2) r.fail("dissipation_check_points must be >= 2");
  }

  if (const json* aa = top.find("aa")) sc.aa = parse_aa(*aa, dim);

  if (const json* out = top.find("output")) {
    Reader r(*out, "output");
    sc.output.trajectories = r.opt_bool("trajectories").value_or(sc.output.trajectories);
    sc.output.trajectory_paths = r.count_or("trajectory_paths", sc.output.trajectory_paths);
    sc.output.dump_paths = r.opt_bool("dump_paths").value_or(sc.output.dump_paths);
    sc.output.plot = r.opt_bool("plot").value_or(sc.output.plot);
    r.finish();
  }
  sc.output_dir = top.opt_string("output_dir").value_or(sc.output_dir);
  top.finish();

  try {
    sc.equation.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("equation: ") + e.what());
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_scenario(j);
}

namespace {

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

ordered_json numbers(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

struct Constants {
  double K = 1.0;
  double omega = 0.0;
  double L = 0.0;
  double L_prime = 0.0;
  double L_hat = 0.0;
  bool L_hat_declared = false;
};

Constants resolve_constants(const Scenario& sc) {
  Constants c;
  const auto& cert = sc.equation.semigroup.cert();
  c.K = sc.constants.K.value_or(cert.K);
  c.omega = sc.constants.omega.value_or(cert.omega);
  c.L = sc.equation.drift.declared_L;
  c.L_prime = sc.equation.diffusion.declared_L;
  c.L_hat_declared = sc.constants.L_hat.has_value();
  // For elementwise 1-Lipschitz fields the pathwise constant is the square
  // root of the mean-square one.
  c.L_hat = sc.constants.L_hat.value_or(std::sqrt(std::max(c.L, c.L_prime)));
  return c;
}

double dissipation_horizon(double omega) { return std::max(10.0, 20.0 / omega); }

ordered_json run_audits(const Scenario& sc, const Constants& c) {
  ordered_json audits = ordered_json::array();
  auto record = [&](std::string name, double observed, double declared, bool ok) {
    ordered_json a;
    a["audit"] = std::move(name);
    a["observed"] = number(observed);
    a["declared"] = number(declared);
    a["passes"] = ok;
    audits.push_back(std::move(a));
  };

  const auto& T = sc.equation.semigroup;
  if (sc.constants.K || sc.constants.omega) {
    const double horizon = dissipation_horizon(c.omega);
    const bool ok = envelope_holds(T, c.K, c.omega, horizon, sc.tolerances.dissipation_check_points);
    double worst = 0.0;
    for (std::size_t i = 0; i < sc.tolerances.dissipation_check_points; ++i) {
      const double t = horizon * static_cast<double>(i) /
                       static_cast<double>(sc.tolerances.dissipation_check_points - 1);
      worst = std::max(worst, T.operator_norm(t) * std::exp(c.omega * t));
    }
    record("dissipation", worst, c.K, ok);
  }

  const auto& tol = sc.tolerances;
  const NonlinearField* fields[] = {&sc.equation.drift, &sc.equation.diffusion};
  const char* names[] = {"lipschitz_drift", "lipschitz_diffusion"};
  double pathwise = 0.0;
  for (int i = 0; i < 2; ++i) {
    const NonlinearField& f = *fields[i];
    const double observed = audit_lipschitz(f, tol.lipschitz_samples, tol.lipschitz_radius,
                                            kAuditSeed + static_cast<std::uint64_t>(i));
    record(names[i], observed, f.declared_L, lipschitz_audit_passes(observed, f.declared_L));
    pathwise = std::max(pathwise, audit_lipschitz_pathwise(f, tol.lipschitz_samples,
                                                           tol.lipschitz_radius,
                                                           kAuditSeed + static_cast<std::uint64_t>(i)));
  }
  record("lipschitz_pathwise", pathwise, c.L_hat, lipschitz_audit_passes(pathwise, c.L_hat));
  return audits;
}

bool audits_pass(const ordered_json& audits) {
  return std::all_of(audits.begin(), audits.end(),
                     [](const ordered_json& a) { return a["passes"].get<bool>(); });
}

ordered_json conditions_json(const Constants& c) {
  const double e = eta(c.K, c.omega, c.L, c.L_prime);
  const auto sc = stability_constants(c.K, c.omega, c.L_hat);
  ordered_json j;
  j["K"] = number(c.K);
  j["omega"] = number(c.omega);
  j["L"] = number(c.L);
  j["L_prime"] = number(c.L_prime);
  j["L_hat"] = number(c.L_hat);
  j["eta"] = number(e);
  j["k"] = number(sc.k);
  j["margin"] = number(sc.margin);
  j["contraction_ok"] = e < 1.0;
  j["stability_ok"] = sc.margin > 0.0;
  return j;
}

class Session {
 public:
  Session(const Scenario& sc, const RunOptions& opt, Task task)
      : sc_(sc), opt_(opt), task_(task) {
    dir_ = opt.out_dir.value_or(std::filesystem::path(sc.output_dir));
    seed_ = opt.seed.value_or(sc.master_seed);
    workers_ = std::max(1u, opt.workers);
  }

  const Scenario& sc_;
  const RunOptions& opt_;
  Task task_;
  std::filesystem::path dir_;
  std::uint64_t seed_ = 0;
  unsigned workers_ = 1;
  RunOutcome outcome;

  ordered_json header() const {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = sc_.name;
    j["task"] = std::string(task_name(task_));
    j["master_seed"] = seed_;
    return j;
  }

  void write(const std::string& file, const std::string& contents) {
    const auto path = dir_ / file;
    write_file_atomic(path, contents);
    outcome.artifacts.push_back(path);
  }
  void write_json(const std::string& file, const ordered_json& j) { write(file, j.dump(2) + "\n"); }

  bool plot() const { return opt_.plot || sc_.output.plot; }

  StateVector x0() const { return sc_.x0.value_or(StateVector(sc_.equation.dim(), 0.0)); }

  void write_trajectories(const TrajectoryEnsemble& ens) {
    if (!sc_.output.trajectories) return;
    const std::size_t paths =
        sc_.output.dump_paths ? ens.n_paths() : std::min(ens.n_paths(), sc_.output.trajectory_paths);
    std::vector<std::string> header{"t"};
    for (std::size_t p = 0; p < paths; ++p) {
      for (std::size_t d = 0; d < ens.dim(); ++d) {
        header.push_back("path_" + std::to_string(p) + "_dim_" + std::to_string(d));
      }
    }
    CsvTable csv(std::move(header));
    std::vector<double> row;
    for (std::size_t n = 0; n < ens.n_nodes(); ++n) {
      row.assign(1, ens.grid().time(n));
      for (std::size_t p = 0; p < paths; ++p) {
        const auto s = ens.state(p, n);
        row.insert(row.end(), s.begin(), s.end());
      }
      csv.add_row(row);
    }
    write("trajectories.csv", csv.str());
  }

  void write_moments(const TrajectoryEnsemble& ens) {
    CsvTable csv({"t", "mean_sq", "std_err"});
    const auto curve = second_moment_curve(ens);
    for (std::size_t n = 0; n < curve.size(); ++n) {
      csv.add_row({ens.grid().time(n), curve[n].value, curve[n].std_err});
    }
    write("moments.csv", csv.str());
  }

  void write_plot(const std::string& csv, const std::vector<std::pair<int, std::string>>& series,
                  const std::string& xlabel, bool logscale) {
    std::ostringstream gp;
    gp << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set xlabel '" << xlabel << "'\n";
    if (logscale) gp << "set logscale y\n";
    gp << "set terminal pngcairo size 900,600\n"
       << "set output '" << std::filesystem::path(csv).stem().string() << ".png'\n"
       << "plot ";
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (i) gp << ", \\\n     ";
      gp << "'" << csv << "' using 1:" << series[i].first << " with lines title '"
         << series[i].second << "'";
    }
    gp << "\n";
    write("plot.gp", gp.str());
  }
};

int run_simulate(Session& s) {
  const auto& sc = s.sc_;
  EnsembleSpec spec;
  spec.window = sc.grid.window();
  spec.burn_in_span = sc.grid.burn_in_span;
  spec.n_paths = sc.n_paths;
  spec.master_seed = s.seed_;
  spec.workers = s.workers_;
  const StateVector x0 = s.x0();
  const auto ens = simulate_ensemble(sc.equation, spec, x0);

  s.write_trajectories(ens);
  s.write_moments(ens);
  ordered_json report = s.header();
  report["n_paths"] = ens.n_paths();
  report["t_min"] = number(ens.grid().t_min());
  report["t_max"] = number(ens.grid().t_max());
  report["step"] = number(ens.grid().step());
  report["burn_in_span"] = number(sc.grid.burn_in_span);
  report["sup_mean_sq"] = number(sup_square_mean(ens, NodeRange::all(ens)));
  s.write_json("report.json", report);
  if (s.plot()) s.write_plot("moments.csv", {{2, "E|x(t)|^2"}}, "t", false);
  s.outcome.report = std::move(report);
  return kExitPass;
}

int run_fixed_point(Session& s, const Constants& c) {
  const auto& sc = s.sc_;
  PicardOptions po;
  po.burn_in_span = sc.grid.burn_in_span;
  po.tol = sc.tolerances.picard_tol;
  po.max_iter = sc.tolerances.max_iter;
  po.ratio_slack = sc.tolerances.ratio_slack;
  po.force = s.opt_.force;
  po.initial_constant = sc.initial_constant;
  po.workers = s.workers_;
  const auto result =
      picard_solve(sc.equation, c.K, c.omega, sc.grid.window(), s.seed_, sc.n_paths, po);
  const auto& r = result.report;

  ordered_json report = s.header();
  report["K"] = number(r.K);
  report["omega"] = number(r.omega);
  report["L"] = number(r.L);
  report["L_prime"] = number(r.L_prime);
  report["eta"] = number(r.eta);
  report["n_paths"] = sc.n_paths;
  report["tol"] = number(po.tol);
  ordered_json its = ordered_json::array();
  for (const auto& it : r.iterates) {
    ordered_json e;
    e["index"] = it.index;
    e["distance"] = number(it.distance);
    its.push_back(std::move(e));
  }
  report["iterates"] = std::move(its);
  report["converged"] = r.converged;
  report["observed_ratio"] = number(r.observed_ratio);
  report["ratio_bound"] = number(r.ratio_bound);
  report["ratio_within_bound"] = r.ratio_within_bound;
  report["residual"] = number(r.residual);
  report["warnings"] = r.warnings;
  report["passes"] = r.converged && r.ratio_within_bound;

  s.write_trajectories(result.solution);
  s.write_moments(result.solution);
  s.write_json("report.json", report);
  if (s.plot()) s.write_plot("moments.csv", {{2, "E|x*(t)|^2"}}, "t", false);
  const bool passes = report["passes"].get<bool>();
  s.outcome.report = std::move(report);
  return passes ? kExitPass : kExitNumericalFailure;
}

int run_stability(Session& s, const Constants& c) {
  const auto& sc = s.sc_;
  if (!sc.x0 || !sc.y0) throw ConfigError("task stability needs initial.x0 and initial.y0");
  StabilityOptions so;
  so.envelope_slack = sc.tolerances.envelope_slack;
  so.rate_slack = sc.tolerances.rate_slack;
  so.se_band = sc.tolerances.se_band;
  so.workers = s.workers_;
  const auto r = stability_verify(sc.equation, c.K, c.omega, c.L_hat, *sc.x0, *sc.y0,
                                  sc.grid.window(), sc.n_paths, s.seed_, so);

  ordered_json report = s.header();
  report["K"] = number(r.K);
  report["omega"] = number(r.omega);
  report["L_hat"] = number(r.L_hat);
  report["k"] = number(r.k);
  report["margin"] = number(r.margin);
  report["decay_rate"] = number(r.omega - r.k);
  report["y0_distance"] = number(r.y0_distance);
  report["n_paths"] = sc.n_paths;
  report["fitted_rate"] = number(r.fitted_rate);
  report["envelope_ok"] = r.envelope_ok;
  report["rate_ok"] = r.rate_ok;
  report["hypothesis_margin_nonpositive"] = r.hypothesis_margin_nonpositive;
  report["passes"] = r.passes;

  CsvTable csv({"t", "Y_hat", "std_err", "envelope"});
  for (const auto& p : r.curve) csv.add_row({p.t, p.y_hat.value, p.y_hat.std_err, p.envelope});
  s.write("stability.csv", csv.str());
  s.write_json("stability.json", report);
  if (s.plot()) s.write_plot("stability.csv", {{2, "Y_hat"}, {4, "envelope"}}, "t", true);
  s.outcome.report = std::move(report);
  if (r.hypothesis_margin_nonpositive) return kExitHypothesisViolation;
  return r.passes ? kExitPass : kExitNumericalFailure;
}

std::vector<double> merged_frequencies(std::initializer_list<const ForcingSpec*> specs) {
  std::vector<double> out;
  for (const ForcingSpec* f : specs) {
    for (double w : f->frequencies()) {
      const bool dup = std::any_of(out.begin(), out.end(), [&](double v) {
        return std::abs(v - w) <= 1e-14 * std::max(1.0, std::abs(w));
      });
      if (!dup) out.push_back(w);
    }
  }
  return out;
}

ordered_json verdict_json(const AAVerdict& v) {
  ordered_json j;
  j["candidate"] = v.candidate == LimitCandidate::unshifted ? "unshifted" : "deepest_shift";
  j["shifts"] = numbers(v.shifts);
  j["defects"] = numbers(v.defects);
  j["forward_errors"] = numbers(v.forward_errors);
  j["forward_std_errs"] = numbers(v.forward_std_errs);
  j["backward_errors"] = numbers(v.backward_errors);
  j["backward_std_errs"] = numbers(v.backward_std_errs);
  j["cauchy_error"] = v.cauchy_error ? number(*v.cauchy_error) : ordered_json(nullptr);
  j["max_second_moment"] = number(v.max_second_moment);
  j["threshold"] = number(v.threshold);
  j["boundedness_flag"] = v.boundedness_flag;
  j["passes"] = v.passes;
  return j;
}

void add_error_rows(CsvTable& csv, const AAVerdict& v) {
  for (std::size_t n = 0; n < v.shifts.size(); ++n) {
    const double defect = n < v.defects.size() ? v.defects[n]
                                               : std::numeric_limits<double>::quiet_NaN();
    csv.add_row({v.shifts[n], v.forward_errors[n], v.backward_errors[n], defect});
  }
}

int run_aa_test(Session& s) {
  const auto& sc = s.sc_;
  if (!sc.aa) throw ConfigError("task aa_test needs an 'aa' section");
  const AAConfig& aa = *sc.aa;

  std::vector<double> freqs = aa.frequencies;
  if (freqs.empty()) {
    freqs = aa.source == AAConfig::Source::signal
                ? aa.signal.frequencies()
                : merged_frequencies({&sc.equation.drift.base, &sc.equation.diffusion.base});
  }
  ShiftSequence seq;
  if (!aa.shifts.empty()) {
    seq = user_shifts(aa.shifts, freqs);
  } else {
    if (freqs.empty()) {
      throw ConfigError("aa: no frequencies to build near-period shifts; give aa.shifts");
    }
    seq = near_period_shifts(freqs, aa.depth);
  }

  std::vector<double> nodes = aa.test_nodes;
  if (nodes.empty()) {
    const double a = sc.grid.t_min, b = sc.grid.t_max;
    for (int i = 0; i <= 8; ++i) nodes.push_back(a + (b - a) * i / 8.0);
  }

  BochnerOptions bo;
  bo.threshold = sc.tolerances.aa_threshold;
  bo.moment_cap = sc.tolerances.moment_cap;
  bo.candidate = aa.candidate;

  ordered_json report = s.header();
  report["process"] = aa.source == AAConfig::Source::signal     ? "signal"
                      : aa.source == AAConfig::Source::solution ? "solution"
                                                                : "composition";
  report["frequencies"] = numbers(seq.frequencies);
  report["provenance"] =
      seq.provenance == ShiftSequence::Provenance::near_periods ? "near_periods" : "user_supplied";
  report["test_nodes"] = numbers(nodes);

  CsvTable csv({"shift", "forward_err", "backward_err", "defect"});
  bool flagged = false;
  bool passes = false;
  if (aa.source == AAConfig::Source::signal) {
    const SignalProcess process(aa.signal);
    const auto v = bochner_test(process, seq, nodes, bo);
    report["verdict"] = verdict_json(v);
    add_error_rows(csv, v);
    flagged = v.boundedness_flag;
    passes = v.passes;
  } else {
    const SolutionProcess process(sc.equation, sc.grid.step, sc.grid.burn_in_span, sc.n_paths,
                                  s.seed_, s.workers_);
    if (aa.source == AAConfig::Source::solution) {
      const auto v = bochner_test(process, seq, nodes, bo);
      report["verdict"] = verdict_json(v);
      add_error_rows(csv, v);
      flagged = v.boundedness_flag;
      passes = v.passes;
    } else {
      const NonlinearField& field = aa.composition_field == ForcingSpec::Role::drift_f
                                        ? sc.equation.drift
                                        : sc.equation.diffusion;
      const auto v = composition_test(field, process, seq, nodes, bo);
      report["inner"] = verdict_json(v.inner);
      report["verdict"] = verdict_json(v.composed);
      report["forward_budget"] = numbers(v.forward_budget);
      report["backward_budget"] = numbers(v.backward_budget);
      report["within_budget"] = v.within_budget;
      add_error_rows(csv, v.composed);
      flagged = v.inner.boundedness_flag || v.composed.boundedness_flag;
      passes = v.passes;
    }
  }
  report["passes"] = passes;
  s.write("aa_errors.csv", csv.str());
  s.write_json("verdict.json", report);
  if (s.plot()) {
    s.write_plot("aa_errors.csv", {{2, "forward"}, {3, "backward"}}, "shift", true);
  }
  s.outcome.report = std::move(report);
  if (flagged) return kExitHypothesisViolation;
  return passes ? kExitPass : kExitNumericalFailure;
}

int run_check_conditions(Session& s, const Constants& c) {
  ordered_json report = s.header();
  report.update(conditions_json(c));
  report["passes"] = report["contraction_ok"].get<bool>() && report["stability_ok"].get<bool>();
  s.write_json("conditions.json", report);
  const bool passes = report["passes"].get<bool>();
  s.outcome.report = std::move(report);
  return passes ? kExitPass : kExitHypothesisViolation;
}

}  // namespace

ordered_json check_conditions(const Scenario& scenario) {
  return conditions_json(resolve_constants(scenario));
}

RunOutcome run_scenario(const Scenario& scenario, const RunOptions& options) {
  std::optional<Task> task = options.task ? options.task : scenario.task;
  if (!task) throw ConfigError("no task given in the config or on the command line");
  Session s(scenario, options, *task);

  auto fail = [&](int code, const std::string& category, const std::string& message,
                  ordered_json details) {
    ordered_json d = s.header();
    d["exit_code"] = code;
    d["category"] = category;
    d["error"] = message;
    if (!details.is_null()) d["details"] = std::move(details);
    s.write_json("diagnostic.json", d);
    s.outcome.report = std::move(d);
    s.outcome.exit_code = code;
  };

  std::filesystem::create_directories(s.dir_);
  try {
    const Constants c = resolve_constants(scenario);
    const ordered_json audits = run_audits(scenario, c);
    if (!audits_pass(audits)) {
      fail(kExitConfigError, "audit_failure", "declared constants failed their audits", audits);
      return s.outcome;
    }
    switch (*task) {
      case Task::simulate: s.outcome.exit_code = run_simulate(s); break;
      case Task::fixed_point: s.outcome.exit_code = run_fixed_point(s, c); break;
      case Task::stability: s.outcome.exit_code = run_stability(s, c); break;
      case Task::aa_test: s.outcome.exit_code = run_aa_test(s); break;
      case Task::check_conditions: s.outcome.exit_code = run_check_conditions(s, c); break;
    }
    if (s.outcome.exit_code != kExitPass) {
      ordered_json details = s.outcome.report;
      fail(s.outcome.exit_code,
           s.outcome.exit_code == kExitHypothesisViolation ? "hypothesis_violation"
                                                           : "verdict_failure",
           "task " + std::string(task_name(*task)) + " did not pass", std::move(details));
    }
  } catch (const HypothesisViolation& e) {
    fail(kExitHypothesisViolation, "hypothesis_violation", e.what(), nullptr);
  } catch (const DivergenceError& e) {
    ordered_json d;
    d["node"] = e.node();
    d["time"] = number(e.time());
    fail(kExitNumericalFailure, "divergence", e.what(), std::move(d));
  } catch (const NonConvergence& e) {
    ordered_json d;
    d["history"] = numbers(e.history());
    fail(kExitNumericalFailure, "non_convergence", e.what(), std::move(d));
  } catch (const ConfigError& e) {
    fail(kExitConfigError, "config_error", e.what(), nullptr);
  } catch (const AuditFailure& e) {
    fail(kExitConfigError, "audit_failure", e.what(), nullptr);
  } catch (const InvalidArgument& e) {
    fail(kExitConfigError, "invalid_argument", e.what(), nullptr);
  } catch (const DimensionMismatch& e) {
    fail(kExitConfigError, "dimension_mismatch", e.what(), nullptr);
  }
  return s.outcome;
}

}  // namespace aasde
