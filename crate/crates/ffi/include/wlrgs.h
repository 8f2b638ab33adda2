#ifndef WLRGS_H
#define WLRGS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call. The non-zero values other than `NullPointer` and
 * `Panic` match the command-line exit codes.
 */
typedef enum WlrgsStatus {
  WLRGS_STATUS_OK = 0,
  WLRGS_STATUS_NULL_POINTER = 1,
  WLRGS_STATUS_INVALID_INPUT = 2,
  WLRGS_STATUS_STATE_ERROR = 3,
  WLRGS_STATUS_NUMERICAL_ERROR = 4,
  WLRGS_STATUS_PANIC = 5,
} WlrgsStatus;

typedef enum WlrgsDecision {
  WLRGS_DECISION_CONTINUE = 0,
  WLRGS_DECISION_REJECT = 1,
  WLRGS_DECISION_STOP_ALL_ALPHA_SPENT = 2,
} WlrgsDecision;

typedef enum WlrgsScheme {
  WLRGS_SCHEME_LOG_RANK = 0,
  WLRGS_SCHEME_FLEMING_HARRINGTON01 = 1,
  WLRGS_SCHEME_MODEST_WEIGHT = 2,
} WlrgsScheme;

/**
 * Opaque monitoring state.
 */
typedef struct WlrgsGsState WlrgsGsState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *wlrgs_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void wlrgs_string_free(char *s);

/**
 * Hwang-Shih-DeCani cumulative spend at an information fraction.
 *
 * # Safety
 * `out_alpha` must be a valid pointer.
 */
enum WlrgsStatus wlrgs_hsd_alpha(double gamma, double info_frac, double alpha, double *out_alpha);

/**
 * Weighted log-rank statistic. `events` and `arms` hold 0 or 1 per subject;
 * `scheme` is a [`WlrgsScheme`] value and `t_star` is read only for the
 * modest weight.
 *
 * # Safety
 * The three arrays must hold `n` elements; out pointers must be valid.
 */
enum WlrgsStatus wlrgs_weighted_logrank(const double *times,
                                        const uint8_t *events,
                                        const uint8_t *arms,
                                        size_t n,
                                        uint32_t scheme,
                                        double t_star,
                                        double *out_u,
                                        double *out_v,
                                        double *out_z);

/**
 * Stage-wise ordering p-value for a trial stopping at look `k` with
 * statistic `z_stop`. `criticals` holds the `k - 1` earlier boundaries and
 * `variances` all `k` variances.
 *
 * # Safety
 * Arrays must hold the stated lengths; `out_p` must be valid.
 */
enum WlrgsStatus wlrgs_stagewise_p(const double *criticals,
                                   const double *variances,
                                   size_t k,
                                   double z_stop,
                                   double *out_p);

/**
 * Monitoring state with information-based HSD spending.
 *
 * # Safety
 * `out_state` must be a valid pointer.
 */
enum WlrgsStatus wlrgs_gs_new_hsd(double alpha,
                                  double gamma,
                                  double max_info,
                                  size_t max_analyses,
                                  struct WlrgsGsState **out_state);

/**
 * Monitoring state with pre-specified cumulative spends; the last equals
 * `alpha` and the number of spends is the maximum number of analyses.
 *
 * # Safety
 * `cum_alphas` must hold `n` elements; `out_state` must be valid.
 */
enum WlrgsStatus wlrgs_gs_new_fixed(double alpha,
                                    const double *cum_alphas,
                                    size_t n,
                                    struct WlrgsGsState **out_state);

/**
 * Records one analysis. On failure the state is left unchanged.
 *
 * # Safety
 * `state` must come from a constructor; out pointers must be valid.
 */
enum WlrgsStatus wlrgs_gs_step(struct WlrgsGsState *state,
                               double variance,
                               double z,
                               bool is_final,
                               double *out_critical,
                               double *out_cum_alpha,
                               enum WlrgsDecision *out_decision);

/**
 * Stage-wise p-value at the look where the trial stopped.
 *
 * # Safety
 * `state` must come from a constructor; `out_p` must be valid.
 */
enum WlrgsStatus wlrgs_gs_stagewise_p(const struct WlrgsGsState *state, double *out_p);

/**
 * Serialises the state to JSON (the command-line `state.json` format).
 *
 * # Safety
 * `state` must come from a constructor; `out_json` must be valid.
 */
enum WlrgsStatus wlrgs_gs_to_json(const struct WlrgsGsState *state, char **out_json);

/**
 * Restores a state from JSON after validating its audit trail.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_state` must be valid.
 */
enum WlrgsStatus wlrgs_gs_from_json(const char *json, struct WlrgsGsState **out_state);

/**
 * Releases a state handle. Null is ignored.
 *
 * # Safety
 * `state` must come from this library and not have been freed.
 */
void wlrgs_gs_free(struct WlrgsGsState *state);

/**
 * Evaluates every design in a configuration document and returns the
 * evaluations as a JSON array.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out_json` must be valid.
 */
enum WlrgsStatus wlrgs_design_evaluate(const char *config_json, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WLRGS_H */
