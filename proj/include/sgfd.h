#ifndef SGFD_H
#define SGFD_H

/* C interface to the stochastic geometric fluid toolkit.  All entry
 * points return sgfd_status; handles are opaque and must be released
 * with their matching free function.  Error text for the last failing
 * call on this thread is available via sgfd_last_error(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sgfd_status {
    SGFD_OK = 0,
    SGFD_ERR_INVALID = 1,   /* invalid argument or config */
    SGFD_ERR_USAGE = 2,     /* config/usage error (CLI exit code 2) */
    SGFD_ERR_NUMERICAL = 3, /* NaN/solver failure (CLI exit code 3) */
    SGFD_ERR_IO = 4
} sgfd_status;

const char* sgfd_version(void);
const char* sgfd_last_error(void);

/* ---- Brownian paths ---- */
typedef struct sgfd_wiener sgfd_wiener;

sgfd_status sgfd_wiener_create(uint64_t seed, int num_components, double dt,
                               int num_steps, sgfd_wiener** out);
void sgfd_wiener_free(sgfd_wiener* path);
sgfd_status sgfd_wiener_increment(const sgfd_wiener* path, int step, int component,
                                  double* out);
/* Quadratic covariation estimate, row-major K x K. */
sgfd_status sgfd_wiener_covariation(const sgfd_wiener* path, double* out_kxk);
sgfd_status sgfd_wiener_write_csv(const sgfd_wiener* path, const char* csv_path);

/* ---- Scalar fields on periodic grids ---- */
typedef struct sgfd_field sgfd_field;

sgfd_status sgfd_field_read(const char* path, sgfd_field** out);
sgfd_status sgfd_field_write(const sgfd_field* f, const char* path);
void sgfd_field_free(sgfd_field* f);
sgfd_status sgfd_field_dims(const sgfd_field* f, int* dims);
sgfd_status sgfd_field_size(const sgfd_field* f, int axis, int* n);
sgfd_status sgfd_field_values(const sgfd_field* f, double* out, size_t capacity);

/* ---- Command entry points (what the CLI subcommands call) ----
 * config_json is the text of a JSON config document; out_dir receives
 * CSV/snapshot artifacts.  seed_override: pass nonzero has_seed to
 * replace the config seed.  Returns SGFD_OK, SGFD_ERR_USAGE or
 * SGFD_ERR_NUMERICAL, matching the CLI exit codes. */
sgfd_status sgfd_run_sqg(const char* config_json, const char* out_dir,
                         int has_seed, uint64_t seed, int serial);
sgfd_status sgfd_pod_extract(const char* config_json, const char* out_dir);
sgfd_status sgfd_transport(const char* config_json, const char* out_dir,
                           int has_seed, uint64_t seed);
/* suite: operators | strat-ito | kelvin | helicity | pv-paths |
 *        casimirs | pod | all.  tolerance_overrides_json may be NULL. */
sgfd_status sgfd_verify(const char* suite, const char* tolerance_overrides_json,
                        const char* out_dir, int serial);

#ifdef __cplusplus
}
#endif

#endif /* SGFD_H */
