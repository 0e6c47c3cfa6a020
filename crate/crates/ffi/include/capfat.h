#ifndef CAPFAT_H
#define CAPFAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CapfatStatus {
  CAPFAT_STATUS_OK = 0,
  CAPFAT_STATUS_NULL_POINTER = 1,
  CAPFAT_STATUS_INVALID_ARGUMENT = 2,
  CAPFAT_STATUS_CONFIG = 3,
  CAPFAT_STATUS_FIXTURE = 4,
  CAPFAT_STATUS_NOT_CONVERGED = 5,
  CAPFAT_STATUS_IO = 6,
  CAPFAT_STATUS_PANIC = 7,
} CapfatStatus;

/**
 * Opaque discretized domain.
 */
typedef struct CapfatGrid CapfatGrid;

/**
 * Opaque cell set bound to one grid.
 */
typedef struct CapfatMask CapfatMask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *capfat_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *capfat_version(void);

/**
 * Build a grid from TOML holding `[space]` and `[domain]` tables, in the
 * experiment config format, at the given spacing.
 *
 * # Safety
 * `toml_text` must be a NUL-terminated string and `out` writable.
 */
enum CapfatStatus capfat_grid_from_toml(const char *toml_text,
                                        double spacing,
                                        struct CapfatGrid **out);

/**
 * # Safety
 * `grid` must come from [`capfat_grid_from_toml`] and not be used after.
 */
void capfat_grid_free(struct CapfatGrid *grid);

/**
 * Dimension, cells per axis (unused axes are 1) and total cell count.
 *
 * # Safety
 * `grid` must be a live handle; `shape` must hold three `size_t`.
 */
enum CapfatStatus capfat_grid_shape(const struct CapfatGrid *grid,
                                    size_t *dim,
                                    size_t *shape,
                                    size_t *len);

/**
 * Copy the complement-distance field (x-fastest) into `out[0..len]`.
 *
 * # Safety
 * `grid` must be a live handle and `out` must hold `len` doubles.
 */
enum CapfatStatus capfat_grid_distance(const struct CapfatGrid *grid, double *out, size_t len);

/**
 * The domain cells of `grid`.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
enum CapfatStatus capfat_mask_domain(const struct CapfatGrid *grid, struct CapfatMask **out);

/**
 * The complement cells of `grid`.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
enum CapfatStatus capfat_mask_complement(const struct CapfatGrid *grid, struct CapfatMask **out);

/**
 * Cells with centers in the open ball `B(center, r)`.
 *
 * # Safety
 * `grid` must be a live handle, `center` must hold three doubles and
 * `out` be writable.
 */
enum CapfatStatus capfat_mask_ball(const struct CapfatGrid *grid,
                                   const double *center,
                                   double r,
                                   struct CapfatMask **out);

/**
 * Number of cells in `mask`, or 0 for null.
 *
 * # Safety
 * `mask` must be null or a live handle.
 */
size_t capfat_mask_len(const struct CapfatMask *mask);

/**
 * # Safety
 * `mask` must come from a `capfat_mask_*` constructor and not be used
 * after.
 */
void capfat_mask_free(struct CapfatMask *mask);

/**
 * `cap_p(plate, environment)`; a null environment means the domain.
 * Writes the value even when the solver stops unconverged and then
 * returns [`CapfatStatus::NotConverged`].
 *
 * # Safety
 * Handles must be live and belong to `grid`; `value` must be writable.
 */
enum CapfatStatus capfat_solve_capacity(const struct CapfatGrid *grid,
                                        const struct CapfatMask *plate,
                                        const struct CapfatMask *environment,
                                        double p,
                                        double *value);

/**
 * `cap_p(B(x, r) ∩ E, B(x, 2r)) / cap_p(B(x, r), B(x, 2r))`.
 *
 * # Safety
 * Handles must be live, `x` must hold three doubles and `ratio` be
 * writable.
 */
enum CapfatStatus capfat_fatness_ratio(const struct CapfatGrid *grid,
                                       const struct CapfatMask *e,
                                       const double *x,
                                       double r,
                                       double p,
                                       double *ratio);

/**
 * Uniform perfectness constant of `n` points stored as consecutive
 * `dim`-tuples; `resolution` is the smallest scale examined (0 for exact
 * point sets, the spacing for cell centers).
 *
 * # Safety
 * `coords` must hold `n * dim` doubles and `c_up` be writable.
 */
enum CapfatStatus capfat_perfectness_constant(const double *coords,
                                              size_t n,
                                              size_t dim,
                                              double resolution,
                                              double *c_up);

/**
 * `log 2 / log(c + 2)`.
 */
double capfat_epsilon_threshold(double c);

/**
 * `2^{1/(Q-p)} - 2`, failing outside `max(Q - log2/log3, 1) < p < Q`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CapfatStatus capfat_sharp_threshold(double p, size_t dim, double *out);

/**
 * Capacity of the spherical condenser `(B(r), B(R))` in `R^dim`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CapfatStatus capfat_radial_condenser(double r,
                                          double big_r,
                                          double p,
                                          size_t dim,
                                          double *out);

/**
 * Estimate of the best Hardy constant on `grid` (a lower bound for the
 * continuum constant). Returns [`CapfatStatus::NotConverged`] with the
 * estimate written when the descent ran out of iterations.
 *
 * # Safety
 * `grid` must be a live handle and `c_h` writable.
 */
enum CapfatStatus capfat_hardy_estimate(const struct CapfatGrid *grid,
                                        double p,
                                        size_t restarts,
                                        uint64_t seed,
                                        double *c_h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAPFAT_H */
