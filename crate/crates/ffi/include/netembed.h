#ifndef NETEMBED_H
#define NETEMBED_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum NetembedStatus {
  NETEMBED_STATUS_OK = 0,
  NETEMBED_STATUS_NULL_POINTER = 1,
  NETEMBED_STATUS_INVALID_ARGUMENT = 2,
  NETEMBED_STATUS_CONFIG = 3,
  NETEMBED_STATUS_DOMAIN = 4,
  NETEMBED_STATUS_NUMERIC = 5,
  NETEMBED_STATUS_COVERAGE = 6,
  NETEMBED_STATUS_IO = 7,
  NETEMBED_STATUS_PANIC = 8,
} NetembedStatus;

/**
 * A finished verification run.
 */
typedef struct NetembedReport NetembedReport;

/**
 * A loaded scenario with its net, embedding and glued map built.
 */
typedef struct NetembedScenario NetembedScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *netembed_last_error(void);

/**
 * Loads a scenario file and builds its glued map.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NetembedStatus netembed_scenario_load(const char *path, struct NetembedScenario **out);

/**
 * # Safety
 * `h` must come from [`netembed_scenario_load`] and not be used afterwards.
 */
void netembed_scenario_free(struct NetembedScenario *h);

/**
 * Dimension of the scenario, 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live scenario handle.
 */
size_t netembed_scenario_dim(const struct NetembedScenario *h);

/**
 * Writes `(ε, δ, R₀, R₁)` of the scenario into `out[0..4]`.
 *
 * # Safety
 * `h` must be a live handle and `out` must hold 4 doubles.
 */
enum NetembedStatus netembed_scenario_constants(const struct NetembedScenario *h, double *out);

/**
 * Evaluates the glued map at `x[0..len]`, writing `len` chart coordinates.
 *
 * # Safety
 * `h` must be a live handle; `x` and `out` must hold `len` doubles.
 */
enum NetembedStatus netembed_phi(const struct NetembedScenario *h,
                                 const double *x,
                                 size_t len,
                                 double *out);

/**
 * Riemannian distance between two chart points of the scenario's manifold.
 *
 * # Safety
 * `h` must be a live handle; `x` and `y` must hold `len` doubles and `out`
 * must be writable.
 */
enum NetembedStatus netembed_distance(const struct NetembedScenario *h,
                                      const double *x,
                                      const double *y,
                                      size_t len,
                                      double *out);

/**
 * Nearest point of the lattice `εℤⁿ`, least-norm on ties, as integer indices.
 *
 * # Safety
 * `x` must hold `len` doubles and `out` `len` integers.
 */
enum NetembedStatus netembed_gamma(double epsilon, const double *x, size_t len, int64_t *out);

/**
 * Runs a verification subcommand (`audit`, `phi-verify`, `net-check`,
 * `degree`, `directions` or `all`). `seed` overrides the scenario seed when
 * `use_seed` is true. A report is produced even when checks fail.
 *
 * # Safety
 * `h` must be a live handle, `subcommand` a NUL-terminated string and `out`
 * writable.
 */
enum NetembedStatus netembed_run(const struct NetembedScenario *h,
                                 const char *subcommand,
                                 bool use_seed,
                                 uint64_t seed,
                                 struct NetembedReport **out);

/**
 * True when every check in the report passed.
 *
 * # Safety
 * `r` must be null or a live report handle.
 */
bool netembed_report_passed(const struct NetembedReport *r);

/**
 * # Safety
 * `r` must be null or a live report handle.
 */
bool netembed_report_hypothesis_violated(const struct NetembedReport *r);

/**
 * # Safety
 * `r` must be null or a live report handle.
 */
size_t netembed_report_check_count(const struct NetembedReport *r);

/**
 * JSON text of the report, owned by the handle.
 *
 * # Safety
 * `r` must be null or a live report handle.
 */
const char *netembed_report_json(const struct NetembedReport *r);

/**
 * # Safety
 * `r` must come from [`netembed_run`] and not be used afterwards.
 */
void netembed_report_free(struct NetembedReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETEMBED_H */
