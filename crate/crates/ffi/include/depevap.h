#ifndef DEPEVAP_H
#define DEPEVAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Reflecting boundary: heights never drop below the horizon.
 */
#define DEPEVAP_BOUNDARY_REFLECTING 0

/**
 * Absorbing boundary: post-selection onto trajectories that stay at or above zero.
 */
#define DEPEVAP_BOUNDARY_ABSORBING 1

/**
 * Status codes returned by every function.
 */
typedef enum DepevapStatus {
  DEPEVAP_STATUS_OK = 0,
  DEPEVAP_STATUS_NULL_POINTER = 1,
  DEPEVAP_STATUS_INVALID_ARGUMENT = 2,
  DEPEVAP_STATUS_CAPACITY = 3,
  DEPEVAP_STATUS_UNSUPPORTED = 4,
  DEPEVAP_STATUS_DECODE = 5,
  DEPEVAP_STATUS_IO = 6,
  DEPEVAP_STATUS_NUMERIC = 7,
  DEPEVAP_STATUS_PANIC = 8,
} DepevapStatus;

/**
 * Opaque handle to a normalized sparse state.
 */
typedef struct DepevapState DepevapState;

/**
 * Model parameters. `boundary` is one of the `DEPEVAP_BOUNDARY_*` constants.
 */
typedef struct DepevapParams {
  size_t size;
  double p;
  uint32_t boundary;
  bool colored;
  uint64_t seed;
} DepevapParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *depevap_version(void);

/**
 * Message describing the last failure on this thread, or NULL after a success.
 * The pointer stays valid until the next call into the library on the same thread.
 */
const char *depevap_last_error_message(void);

/**
 * Builds the exact state by enumerating trajectories.
 *
 * # Safety
 * `params` must point to a valid `DepevapParams` and `out` must be valid for writes.
 */
enum DepevapStatus depevap_state_build(const struct DepevapParams *params,
                                       struct DepevapState **out);

/**
 * Generates the state sequentially and post-selects the emitter. `success` receives the
 * post-selection probability and may be NULL.
 *
 * # Safety
 * `params` must point to a valid `DepevapParams`, `out` must be valid for writes and
 * `success` must be NULL or valid for writes.
 */
enum DepevapStatus depevap_state_generate(const struct DepevapParams *params,
                                          bool cooling,
                                          struct DepevapState **out,
                                          double *success);

/**
 * Number of basis configurations with nonzero amplitude.
 *
 * # Safety
 * `state` must be a live handle and `out` must be valid for writes.
 */
enum DepevapStatus depevap_state_len(const struct DepevapState *state, size_t *out);

/**
 * Squared overlap of two states with identical parameters.
 *
 * # Safety
 * `a` and `b` must be live handles and `out` must be valid for writes.
 */
enum DepevapStatus depevap_state_fidelity(const struct DepevapState *a,
                                          const struct DepevapState *b,
                                          double *out);

/**
 * Entanglement entropy in bits across the horizontal mid cut, from the Schmidt spectrum.
 * `uncolored` receives the surface part and may be NULL.
 *
 * # Safety
 * `state` must be a live handle, `total` must be valid for writes and `uncolored` must be
 * NULL or valid for writes.
 */
enum DepevapStatus depevap_state_midcut_entropy(const struct DepevapState *state,
                                                double *total,
                                                double *uncolored);

/**
 * Writes the state in the library's binary format.
 *
 * # Safety
 * `state` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
enum DepevapStatus depevap_state_write(const struct DepevapState *state, const char *path);

/**
 * Releases a state handle. NULL is ignored.
 *
 * # Safety
 * `state` must be NULL or a handle not yet freed.
 */
void depevap_state_free(struct DepevapState *state);

/**
 * Probability that the free process returns to the horizon and stays admissible.
 *
 * # Safety
 * `params` must point to a valid `DepevapParams` and `out` must be valid for writes.
 */
enum DepevapStatus depevap_success_probability(const struct DepevapParams *params, double *out);

/**
 * Largest `|<psi|h_j|psi>|` over the local terms of the parent Hamiltonian.
 * Requires the absorbing boundary.
 *
 * # Safety
 * `params` must point to a valid `DepevapParams` and `out` must be valid for writes.
 */
enum DepevapStatus depevap_hamiltonian_max_residual(const struct DepevapParams *params,
                                                    double *out);

/**
 * Roughness of a height profile given as `len = L + 2` consecutive heights, boundary
 * sites `0` and `L + 1` included. Only the `L` interior sites enter the average.
 *
 * # Safety
 * `heights` must be valid for `len` reads and `out` must be valid for writes.
 */
enum DepevapStatus depevap_roughness(const int32_t *heights, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPEVAP_H */
