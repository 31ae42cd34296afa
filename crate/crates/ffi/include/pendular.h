#ifndef PENDULAR_H
#define PENDULAR_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_CONFIG = 2,
  PD_STATUS_DOMAIN = 3,
  PD_STATUS_CONTRACT = 4,
  PD_STATUS_NUMERIC = 5,
  PD_STATUS_STEP_SIZE = 6,
  PD_STATUS_DEGENERACY = 7,
  PD_STATUS_UNRESOLVABLE_SITES = 8,
  PD_STATUS_IO = 9,
  PD_STATUS_BUFFER_TOO_SMALL = 10,
  PD_STATUS_PANIC = 11,
} PdStatus;

typedef enum PdGate {
  PD_GATE_NOT1 = 0,
  PD_GATE_NOT2 = 1,
  PD_GATE_HAD1 = 2,
  PD_GATE_HAD2 = 3,
  PD_GATE_CNOT = 4,
  PD_GATE_IDENTITY = 5,
} PdGate;

/**
 * Opaque pair handle.
 */
typedef struct PdPair PdPair;

/**
 * Opaque optimization result handle.
 */
typedef struct PdResult PdResult;

/**
 * Qubit data of one site.
 */
typedef struct PdSiteQubit {
  double x;
  double w0_over_b;
  double w1_over_b;
  double c0;
  double c1;
  double cx;
} PdSiteQubit;

/**
 * Optimizer settings. `duration_ns <= 0` selects the default duration.
 */
typedef struct PdOptimizerConfig {
  double alpha0;
  uint32_t max_iter;
  double fidelity_threshold;
  double fidelity_delta_tol;
  double dt_ps;
  double duration_ns;
  double initial_amplitude_kv_cm;
  double update_scale;
  bool strict_reduction;
  uint64_t seed;
} PdOptimizerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pd_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pd_last_error_message(char *buf, size_t len);

/**
 * Builds a two-site pair of identical molecules. `n_levels` is the number
 * of pendular levels per site (2 for the qubit model).
 *
 * # Safety
 * `name` must be a NUL-terminated string or null; `out` must be writable.
 */
enum PdStatus pd_pair_new(const char *name,
                          double b_cm,
                          double mu_debye,
                          double epsilon1_kv_cm,
                          double epsilon2_kv_cm,
                          double r12_nm,
                          double alpha_deg,
                          uint32_t n_levels,
                          struct PdPair **out);

/**
 * # Safety
 * `pair` must come from [`pd_pair_new`] and not be used afterwards.
 */
void pd_pair_free(struct PdPair *pair);

/**
 * Dimension of the pair state space.
 *
 * # Safety
 * `pair` must be a live handle or null (returns 0).
 */
size_t pd_pair_dim(const struct PdPair *pair);

/**
 * Qubit data of site 1 or 2.
 *
 * # Safety
 * `pair` must be a live handle; `out` must be writable.
 */
enum PdStatus pd_pair_site(const struct PdPair *pair, uint32_t site, struct PdSiteQubit *out);

/**
 * First-order conditional frequency shift Δω/2π in MHz.
 *
 * # Safety
 * `pair` must be a live handle; `out` must be writable.
 */
enum PdStatus pd_pair_delta_omega_mhz(const struct PdPair *pair, double *out);

/**
 * Default pulse length 10ħ/Δω in ns.
 *
 * # Safety
 * `pair` must be a live handle; `out` must be writable.
 */
enum PdStatus pd_pair_default_duration_ns(const struct PdPair *pair, double *out);

/**
 * Fills `out` with the library defaults.
 *
 * # Safety
 * `out` must be writable.
 */
enum PdStatus pd_optimizer_config_default(struct PdOptimizerConfig *out);

/**
 * Optimizes a gate pulse. On success `*out` owns a result handle, also
 * when the run hit `max_iter` without converging (see
 * [`pd_result_converged`]).
 *
 * # Safety
 * `pair` and `cfg` must be valid; `out` must be writable.
 */
enum PdStatus pd_optimize(const struct PdPair *pair,
                          enum PdGate gate,
                          const struct PdOptimizerConfig *cfg,
                          struct PdResult **out);

/**
 * # Safety
 * `result` must come from [`pd_optimize`] and not be used afterwards.
 */
void pd_result_free(struct PdResult *result);

/**
 * Fidelity of the returned pulse; NaN for a null handle.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
double pd_result_fidelity(const struct PdResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
double pd_result_avg_probability(const struct PdResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
uint32_t pd_result_iterations(const struct PdResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
bool pd_result_converged(const struct PdResult *result);

/**
 * Time step of the pulse in ps; NaN for a null handle.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
double pd_result_dt_ps(const struct PdResult *result);

/**
 * Copies the pulse samples (kV/cm) into `buf`. `*len` holds the capacity
 * on entry and the sample count on return.
 *
 * # Safety
 * `result` must be a live handle; `buf` must hold `*len` doubles.
 */
enum PdStatus pd_result_pulse(const struct PdResult *result, double *buf, size_t *len);

/**
 * Propagates `psi` (split real/imaginary parts, `dim` entries each) in
 * place through a pulse of `n_samples` samples spaced `dt_ps` apart.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum PdStatus pd_propagate(const struct PdPair *pair,
                           const double *samples,
                           size_t n_samples,
                           double dt_ps,
                           double *psi_re,
                           double *psi_im,
                           size_t dim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENDULAR_H */
