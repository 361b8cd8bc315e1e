/* C interface to the aasde library. */
#ifndef AASDE_AASDE_H
#define AASDE_AASDE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(AASDE_BUILDING_LIBRARY)
#    define AASDE_API __declspec(dllexport)
#  else
#    define AASDE_API __declspec(dllimport)
#  endif
#else
#  define AASDE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aasde_status {
  AASDE_OK = 0,
  AASDE_INVALID_ARGUMENT = 1,
  AASDE_DIMENSION = 2,
  AASDE_HYPOTHESIS = 3,
  AASDE_NUMERICAL = 4,
  AASDE_CONFIG = 5,
  AASDE_IO = 6,
  AASDE_INTERNAL = 7
} aasde_status;

typedef struct aasde_semigroup aasde_semigroup;
typedef struct aasde_scenario aasde_scenario;

typedef struct aasde_run_options {
  const char* out_dir; /* NULL: output_dir from the config */
  unsigned workers;    /* 0 is treated as 1 */
  int force;
  int has_seed;
  uint64_t seed;
  int plot;
} aasde_run_options;

/* Message of the last failed call on this thread ("" if none). */
AASDE_API const char* aasde_last_error(void);
AASDE_API const char* aasde_version(void);

AASDE_API aasde_status aasde_eta(double K, double omega, double L, double L_prime, double* out);
AASDE_API aasde_status aasde_stability_constants(double K, double omega, double L_hat,
                                                 double* k, double* margin);

/* spectrum: rates lambda_i > 0, so that A = diag(-lambda_i). */
AASDE_API aasde_status aasde_semigroup_create_diagonal(const double* spectrum, size_t dim,
                                                       aasde_semigroup** out);
/* generator: row-major dim x dim matrix A. */
AASDE_API aasde_status aasde_semigroup_create_dense(const double* generator, size_t dim,
                                                    aasde_semigroup** out);
AASDE_API size_t aasde_semigroup_dim(const aasde_semigroup* T);
/* y = T(dt) x; x and y have length dim. */
AASDE_API aasde_status aasde_semigroup_apply(const aasde_semigroup* T, double dt, const double* x,
                                             double* y);
AASDE_API aasde_status aasde_semigroup_certificate(const aasde_semigroup* T, double* K,
                                                   double* omega);
AASDE_API void aasde_semigroup_destroy(aasde_semigroup* T);

/* Two-sided Wiener path on the lattice grid covering [t_min, t_max] (which
   must contain 0). values must hold aasde_grid_nodes(t_min, t_max, step). */
AASDE_API aasde_status aasde_grid_nodes(double t_min, double t_max, double step, size_t* n_nodes);
AASDE_API aasde_status aasde_wiener_sample(double t_min, double t_max, double step, uint64_t seed,
                                           uint64_t path_index, double* times, double* values);

AASDE_API aasde_status aasde_scenario_load(const char* path, aasde_scenario** out);
AASDE_API aasde_status aasde_scenario_parse(const char* json_text, aasde_scenario** out);
/* task: simulate | fixed_point | stability | aa_test | check_conditions */
AASDE_API aasde_status aasde_scenario_set_task(aasde_scenario* sc, const char* task);
/* Runs the scenario and writes its artifacts. exit_code follows the CLI
   convention: 0 pass, 1 hypothesis violated, 2 numerical failure, 3 config
   or audit failure. */
AASDE_API aasde_status aasde_scenario_run(const aasde_scenario* sc, const aasde_run_options* options,
                                          int* exit_code);
AASDE_API void aasde_scenario_destroy(aasde_scenario* sc);

/* Load, run and report in one call; config errors become exit code 3 with a
   diagnostic.json in the output directory (when one is known). task may be
   NULL. */
AASDE_API aasde_status aasde_run_file(const char* path, const char* task,
                                      const aasde_run_options* options, int* exit_code);

#ifdef __cplusplus
}
#endif

#endif
