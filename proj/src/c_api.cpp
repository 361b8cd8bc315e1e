#include "aasde/aasde.h"

#include <cmath>
#include <exception>
#include <new>
#include <string>

#include "aasde/artifacts.hpp"
#include "aasde/error.hpp"
#include "aasde/fixed_point.hpp"
#include "aasde/metrics.hpp"
#include "aasde/noise.hpp"
#include "aasde/scenario.hpp"
#include "aasde/semigroup.hpp"

struct aasde_semigroup {
  aasde::SemigroupOperator op;
};

struct aasde_scenario {
  aasde::Scenario sc;
};

namespace {

thread_local std::string g_last_error;

aasde_status set_error(aasde_status status, const char* msg) {
  g_last_error = msg;
  return status;
}

// Maps the active exception to a status code.
aasde_status translate() {
  try {
    throw;
  } catch (const aasde::DimensionMismatch& e) {
    return set_error(AASDE_DIMENSION, e.what());
  } catch (const aasde::InvalidArgument& e) {
    return set_error(AASDE_INVALID_ARGUMENT, e.what());
  } catch (const aasde::HypothesisViolation& e) {
    return set_error(AASDE_HYPOTHESIS, e.what());
  } catch (const aasde::DivergenceError& e) {
    return set_error(AASDE_NUMERICAL, e.what());
  } catch (const aasde::NonConvergence& e) {
    return set_error(AASDE_NUMERICAL, e.what());
  } catch (const aasde::ConfigError& e) {
    return set_error(AASDE_CONFIG, e.what());
  } catch (const aasde::AuditFailure& e) {
    return set_error(AASDE_CONFIG, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(AASDE_IO, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(AASDE_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(AASDE_INTERNAL, e.what());
  } catch (...) {
    return set_error(AASDE_INTERNAL, "unknown error");
  }
}

template <class F>
aasde_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return AASDE_OK;
  } catch (...) {
    return translate();
  }
}

aasde_status null_arg(const char* what) {
  return set_error(AASDE_INVALID_ARGUMENT, (std::string(what) + " is NULL").c_str());
}

aasde::RunOptions to_run_options(const aasde_run_options* o) {
  aasde::RunOptions out;
  if (!o) return out;
  if (o->out_dir) out.out_dir = std::filesystem::path(o->out_dir);
  out.workers = o->workers == 0 ? 1 : o->workers;
  out.force = o->force != 0;
  if (o->has_seed) out.seed = o->seed;
  out.plot = o->plot != 0;
  return out;
}

}  // namespace

extern "C" {

const char* aasde_last_error(void) { return g_last_error.c_str(); }

const char* aasde_version(void) { return "1.0.0"; }

aasde_status aasde_eta(double K, double omega, double L, double L_prime, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = aasde::eta(K, omega, L, L_prime); });
}

aasde_status aasde_stability_constants(double K, double omega, double L_hat, double* k,
                                       double* margin) {
  if (!k || !margin) return null_arg("k/margin");
  return guarded([&] {
    const auto c = aasde::stability_constants(K, omega, L_hat);
    *k = c.k;
    *margin = c.margin;
  });
}

aasde_status aasde_semigroup_create_diagonal(const double* spectrum, size_t dim,
                                             aasde_semigroup** out) {
  if (!spectrum || !out) return null_arg("spectrum/out");
  *out = nullptr;
  return guarded([&] {
    std::vector<double> s(spectrum, spectrum + dim);
    *out = new aasde_semigroup{aasde::SemigroupOperator::diagonal(std::move(s))};
  });
}

aasde_status aasde_semigroup_create_dense(const double* generator, size_t dim,
                                          aasde_semigroup** out) {
  if (!generator || !out) return null_arg("generator/out");
  *out = nullptr;
  return guarded([&] {
    const auto n = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd A(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) A(i, j) = generator[i * n + j];
    }
    *out = new aasde_semigroup{aasde::SemigroupOperator::dense(std::move(A))};
  });
}

size_t aasde_semigroup_dim(const aasde_semigroup* T) { return T ? T->op.dim() : 0; }

aasde_status aasde_semigroup_apply(const aasde_semigroup* T, double dt, const double* x,
                                   double* y) {
  if (!T || !x || !y) return null_arg("semigroup/x/y");
  return guarded([&] {
    const auto r = T->op.apply(dt, std::span<const double>(x, T->op.dim()));
    std::copy(r.begin(), r.end(), y);
  });
}

aasde_status aasde_semigroup_certificate(const aasde_semigroup* T, double* K, double* omega) {
  if (!T || !K || !omega) return null_arg("semigroup/K/omega");
  return guarded([&] {
    *K = T->op.cert().K;
    *omega = T->op.cert().omega;
  });
}

void aasde_semigroup_destroy(aasde_semigroup* T) { delete T; }

aasde_status aasde_grid_nodes(double t_min, double t_max, double step, size_t* n_nodes) {
  if (!n_nodes) return null_arg("n_nodes");
  return guarded([&] { *n_nodes = aasde::TimeGrid::covering(t_min, t_max, step).n_nodes(); });
}

aasde_status aasde_wiener_sample(double t_min, double t_max, double step, uint64_t seed,
                                 uint64_t path_index, double* times, double* values) {
  if (!values) return null_arg("values");
  return guarded([&] {
    const auto grid = aasde::TimeGrid::covering(t_min, t_max, step);
    const auto path = aasde::sample_wiener(grid, seed, path_index);
    for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
      if (times) times[i] = grid.time(i);
      values[i] = path.values[i];
    }
  });
}

aasde_status aasde_scenario_load(const char* path, aasde_scenario** out) {
  if (!path || !out) return null_arg("path/out");
  *out = nullptr;
  return guarded([&] { *out = new aasde_scenario{aasde::load_scenario(path)}; });
}

aasde_status aasde_scenario_parse(const char* json_text, aasde_scenario** out) {
  if (!json_text || !out) return null_arg("json_text/out");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      throw aasde::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    *out = new aasde_scenario{aasde::parse_scenario(j)};
  });
}

aasde_status aasde_scenario_set_task(aasde_scenario* sc, const char* task) {
  if (!sc || !task) return null_arg("scenario/task");
  return guarded([&] { sc->sc.task = aasde::parse_task(task); });
}

aasde_status aasde_scenario_run(const aasde_scenario* sc, const aasde_run_options* options,
                                int* exit_code) {
  if (!sc || !exit_code) return null_arg("scenario/exit_code");
  return guarded([&] {
    const auto outcome = aasde::run_scenario(sc->sc, to_run_options(options));
    *exit_code = outcome.exit_code;
    if (outcome.exit_code != aasde::kExitPass && outcome.report.contains("error")) {
      g_last_error = outcome.report["error"].get<std::string>();
    }
  });
}

void aasde_scenario_destroy(aasde_scenario* sc) { delete sc; }

aasde_status aasde_run_file(const char* path, const char* task, const aasde_run_options* options,
                            int* exit_code) {
  if (!path || !exit_code) return null_arg("path/exit_code");
  aasde_scenario* sc = nullptr;
  aasde_status st = aasde_scenario_load(path, &sc);
  if (st == AASDE_OK && task) st = aasde_scenario_set_task(sc, task);
  if (st != AASDE_OK) {
    aasde_scenario_destroy(sc);
    const std::string message = g_last_error;
    *exit_code = aasde::kExitConfigError;
    if (options && options->out_dir) {
      guarded([&] {
        nlohmann::ordered_json d;
        d["schema_version"] = aasde::kSchemaVersion;
        d["config"] = std::string(path);
        d["exit_code"] = aasde::kExitConfigError;
        d["category"] = "config_error";
        d["error"] = message;
        aasde::write_file_atomic(std::filesystem::path(options->out_dir) / "diagnostic.json",
                                 d.dump(2) + "\n");
      });
    }
    g_last_error = message;
    return AASDE_OK;
  }
  st = aasde_scenario_run(sc, options, exit_code);
  aasde_scenario_destroy(sc);
  return st;
}

}  // extern "C"
