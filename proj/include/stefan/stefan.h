/* C interface to the stefan library: forward simulation of the one-phase
 * Stefan problem with time-varying melting temperature, reconstruction of the
 * melting temperature from an observed boundary evolution, and the file
 * formats used by the command-line tool.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns a stefan_status;
 * stefan_last_error() describes the most recent failure on the calling thread.
 */
#ifndef STEFAN_STEFAN_H
#define STEFAN_STEFAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(STEFAN_BUILDING_LIBRARY)
#    define STEFAN_API __declspec(dllexport)
#  else
#    define STEFAN_API __declspec(dllimport)
#  endif
#else
#  define STEFAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum stefan_status {
    STEFAN_OK = 0,
    STEFAN_ERR_INVALID_ARGUMENT = 1,
    STEFAN_ERR_FOLDED_MESH = 2,
    STEFAN_ERR_NONPOSITIVE_RADIUS = 3,
    STEFAN_ERR_SOLVER = 4,
    STEFAN_ERR_DEGENERATE_SENSITIVITY = 5,
    STEFAN_ERR_IO = 6,
    STEFAN_ERR_CONFIG = 7,
    STEFAN_ERR_INTERNAL = 99
} stefan_status;

typedef struct stefan_config stefan_config;
typedef struct stefan_tube stefan_tube;
typedef struct stefan_schedule stefan_schedule;

STEFAN_API const char* stefan_version(void);

/* Message of the last failed call on this thread ("" if none). */
STEFAN_API const char* stefan_last_error(void);

/* Step index attached to the last failure, or -1. */
STEFAN_API int stefan_last_error_step(void);

/* ---- configuration ---------------------------------------------------- */

STEFAN_API stefan_status stefan_config_new(stefan_config** out);
STEFAN_API stefan_status stefan_config_load(const char* path, stefan_config** out);
STEFAN_API stefan_status stefan_config_parse(const char* json_text, stefan_config** out);
STEFAN_API void stefan_config_free(stefan_config* cfg);

/* Dotted keys address nested fields, e.g. "time.dt" or "schedule.preset". */
STEFAN_API stefan_status stefan_config_set_number(stefan_config* cfg, const char* key, double value);
STEFAN_API stefan_status stefan_config_set_integer(stefan_config* cfg, const char* key, int64_t value);
STEFAN_API stefan_status stefan_config_set_string(stefan_config* cfg, const char* key, const char* value);
STEFAN_API stefan_status stefan_config_remove(stefan_config* cfg, const char* key);

/* Checks the configuration without running it. */
STEFAN_API stefan_status stefan_config_validate(const stefan_config* cfg);

/* Runs the configured pipeline (forward, perturb, invert or roundtrip) and
 * writes its artifacts. Progress lines go to stderr when verbose != 0. */
STEFAN_API stefan_status stefan_run(const stefan_config* cfg, int verbose);

/* ---- tubes -------------------------------------------------------------- */

STEFAN_API stefan_status stefan_simulate(const stefan_config* cfg, stefan_tube** out);
STEFAN_API stefan_status stefan_tube_read(const char* path, stefan_tube** out);
STEFAN_API stefan_status stefan_tube_write(const stefan_tube* tube, const char* path);
STEFAN_API void stefan_tube_free(stefan_tube* tube);

STEFAN_API stefan_status stefan_tube_size(const stefan_tube* tube, size_t* records);
STEFAN_API stefan_status stefan_tube_order(const stefan_tube* tube, int* order);
STEFAN_API stefan_status stefan_tube_dt(const stefan_tube* tube, double* dt);

/* Copies record k: its time and 2M+1 coefficients [a_{-M}, ..., a_M]. */
STEFAN_API stefan_status stefan_tube_record(const stefan_tube* tube, size_t k, double* time,
                                            double* coeffs, size_t capacity);

/* Radius of record k at polar angle phi. */
STEFAN_API stefan_status stefan_tube_radius(const stefan_tube* tube, size_t k, double phi, double* radius);

/* Gaussian noise of relative level delta on records k >= 1; positivity is
 * checked at `samples` angles. */
STEFAN_API stefan_status stefan_tube_perturb(const stefan_tube* tube, double delta, uint64_t seed,
                                             size_t samples, stefan_tube** out);

/* ---- schedules ------------------------------------------------------------ */

/* Reconstructs the melting temperature from a tube with the inverse settings
 * of cfg (inverse.M, inverse.L, inverse.rings, inverse.um0). */
STEFAN_API stefan_status stefan_reconstruct(const stefan_tube* tube, const stefan_config* cfg,
                                            stefan_schedule** out);
STEFAN_API stefan_status stefan_schedule_read(const char* path, stefan_schedule** out);
STEFAN_API stefan_status stefan_schedule_write(const stefan_schedule* schedule, const char* path);
STEFAN_API void stefan_schedule_free(stefan_schedule* schedule);

/* Number of intervals K; values has K+1 entries, slopes K. */
STEFAN_API stefan_status stefan_schedule_steps(const stefan_schedule* schedule, size_t* steps);
STEFAN_API stefan_status stefan_schedule_dt(const stefan_schedule* schedule, double* dt);
STEFAN_API stefan_status stefan_schedule_values(const stefan_schedule* schedule, double* values,
                                                size_t capacity);
STEFAN_API stefan_status stefan_schedule_slopes(const stefan_schedule* schedule, double* slopes,
                                                size_t capacity);

#ifdef __cplusplus
}
#endif

#endif /* STEFAN_STEFAN_H */
