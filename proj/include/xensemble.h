/* Public C interface of the xensemble shared library.
 *
 * The library wraps a C++ core; everything crosses this boundary as
 * opaque handles, plain C types and status codes. All functions are
 * thread-compatible: handles must not be shared across threads without
 * external locking, but distinct handles are independent.
 */
#ifndef XENSEMBLE_H
#define XENSEMBLE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Nonzero values double as CLI exit codes:
 * config/usage problems exit 2, bad or missing data files exit 3. */
typedef enum xe_status {
    XE_OK = 0,
    XE_ERR_INTERNAL = 1,
    XE_ERR_CONFIG = 2,
    XE_ERR_DATA = 3,
    XE_ERR_ARG = 4
} xe_status;

/* Library version, "major.minor.patch". */
const char* xe_version(void);

/* Message describing the most recent failure on the calling thread;
 * empty string after a success. The pointer stays valid until the next
 * call from the same thread. */
const char* xe_last_error(void);

/* ---- experiment pipeline ------------------------------------------- */

/* One pipeline invocation; mirrors the CLI. Commands: gen-data,
 * train-pool, rank-ensembles, attack, defend, ood, threat, report. */
typedef struct xe_run_options {
    const char* command;     /* required */
    const char* config_path; /* NULL = built-in defaults */
    const char* out_dir;     /* required experiment directory */
    const char* format;      /* stdout echo: "text", "csv", "json"; NULL = text */
    int has_seed;            /* nonzero: override the config seed */
    uint64_t seed;
    int workers;             /* > 0 overrides the config worker count */
    int quiet;               /* nonzero: suppress stdout echo */
} xe_run_options;

xe_status xe_run(const xe_run_options* options);

/* ---- model handles -------------------------------------------------- */

typedef struct xe_model xe_model;

/* Loads a model file written by train-pool. On success *out owns the
 * handle; release it with xe_model_free. */
xe_status xe_model_load(const char* path, xe_model** out);
void xe_model_free(xe_model* model);

/* -1 when model is NULL. */
int xe_model_input_dim(const xe_model* model);
int xe_model_num_classes(const xe_model* model);

/* Classifies n pixels (row-major, values in [0,1]). If probs is not
 * NULL it receives xe_model_num_classes(model) doubles; if label is not
 * NULL it receives the argmax class. */
xe_status xe_model_predict(const xe_model* model, const double* pixels, size_t n,
                           double* probs, int* label);

#ifdef __cplusplus
}
#endif

#endif /* XENSEMBLE_H */
