#ifndef POLARON_H
#define POLARON_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PolaronStatus {
  POLARON_STATUS_OK = 0,
  POLARON_STATUS_NULL_POINTER = 1,
  POLARON_STATUS_INVALID_PARAMETER = 2,
  POLARON_STATUS_CONFIG = 3,
  POLARON_STATUS_NUMERICAL = 4,
  /**
   * The requested bound state does not exist.
   */
  POLARON_STATUS_NOT_FOUND = 5,
  POLARON_STATUS_PANIC = 6,
} PolaronStatus;

typedef enum PolaronCutoff {
  POLARON_CUTOFF_SHARP = 0,
  POLARON_CUTOFF_GAUSSIAN = 1,
  POLARON_CUTOFF_BETA_ONLY = 2,
} PolaronCutoff;

/**
 * Physical parameters plus a cutoff scheme.
 */
typedef struct PolaronModel PolaronModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * owned by the library and valid until the next call on this thread.
 */
const char *polaron_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *polaron_version(void);

/**
 * New model with a sharp cutoff at radius `8κ`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum PolaronStatus polaron_model_new(double box_length,
                                     double impurity_mass,
                                     double binding_energy,
                                     double fermi_energy,
                                     struct PolaronModel **out);

/**
 * New model from the text of a `key = value` run configuration.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` valid for writes.
 */
enum PolaronStatus polaron_model_from_config(const char *text, struct PolaronModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void polaron_model_free(struct PolaronModel *model);

/**
 * Replaces the cutoff scheme; `radius` is in units of `κ`.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum PolaronStatus polaron_model_set_cutoff(struct PolaronModel *model,
                                            enum PolaronCutoff kind,
                                            double radius);

/**
 * `κ = 2π/L`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum PolaronStatus polaron_model_kappa(const struct PolaronModel *model, double *out);

/**
 * Ground energy of the zero-momentum one-fermion sector at the model
 * cutoff, and the residual of the predicted eigenvector.
 *
 * # Safety
 * `model` must be a live handle; outputs valid for writes.
 */
enum PolaronStatus polaron_two_body_ground(const struct PolaronModel *model,
                                           double *energy,
                                           double *residual);

/**
 * Ground energy of the zero-momentum two-fermion sector at the model cutoff.
 *
 * # Safety
 * `model` must be a live handle; `energy` valid for writes.
 */
enum PolaronStatus polaron_two_fermion_ground(const struct PolaronModel *model, double *energy);

/**
 * Polaron energy `E_P = E_μ − λ*` and the secular-equation residual.
 *
 * # Safety
 * `model` must be a live handle; outputs valid for writes.
 */
enum PolaronStatus polaron_solve_polaron(const struct PolaronModel *model,
                                         double *energy,
                                         double *residual);

/**
 * Molecule energy `E_M` with `K_cap` in units of `κ`. Returns
 * [`PolaronStatus::NotFound`] when no molecule lies below `E_μ`.
 *
 * # Safety
 * `model` must be a live handle; outputs valid for writes.
 */
enum PolaronStatus polaron_solve_molecule(const struct PolaronModel *model,
                                          double k_cap,
                                          double *energy,
                                          double *energy_error);

/**
 * Renormalized point-interaction `φ(z)` for real `z < 0`, with its
 * certified error bound.
 *
 * # Safety
 * `model` must be a live handle; outputs valid for writes.
 */
enum PolaronStatus polaron_phi_delta(const struct PolaronModel *model,
                                     double z,
                                     double *value,
                                     double *error_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLARON_H */
