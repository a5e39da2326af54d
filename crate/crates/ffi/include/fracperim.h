#ifndef FRACPERIM_H
#define FRACPERIM_H

/* C interface to fracperim. Every function returns an FpStatus; after a
   failure fp_last_error() describes it. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_INVALID_ARGUMENT = 1,
  FP_STATUS_NULL_POINTER = 2,
  FP_STATUS_NON_CONVERGENCE = 3,
  FP_STATUS_SINGULAR = 4,
  FP_STATUS_PARSE = 5,
  FP_STATUS_IO = 6,
  FP_STATUS_PANIC = 7,
} FpStatus;

/* Opaque monotone profile. */
typedef struct FpProfile FpProfile;

/* Opaque quadrature settings. */
typedef struct FpQuad FpQuad;

#ifdef __cplusplus
extern "C" {
#endif

/* Message of the last failure on this thread, empty after a success. */
const char *fp_last_error(void);

FpStatus fp_quad_new(size_t n, double s, double rel_tol, FpQuad **out);

void fp_quad_free(FpQuad *q);

/* Profile from m nonincreasing nonnegative cell values on [0, 1/2]. */
FpStatus fp_profile_new(size_t n, const double *values, size_t m, FpProfile **out);

/* Profile from a literal: cyl:R, ball:R, file:PATH or rand:SEED:M. */
FpStatus fp_profile_parse(const char *literal, size_t n, size_t m, FpProfile **out);

void fp_profile_free(FpProfile *p);

FpStatus fp_profile_cells(const FpProfile *p, size_t *out);

FpStatus fp_profile_values(const FpProfile *p, double *buf, size_t len);

FpStatus fp_profile_volume(const FpProfile *p, double *out);

/* Periodic perimeter; error may be NULL. */
FpStatus fp_energy(const FpProfile *p, const FpQuad *q, double *value, double *error);

/* Free fractional perimeter in one period; error may be NULL. */
FpStatus fp_perimeter(const FpProfile *p, const FpQuad *q, double *value, double *error);

/* Interaction across the period boundary; error may be NULL. */
FpStatus fp_pi_term(const FpProfile *p, const FpQuad *q, double *value, double *error);

/* Periodic kernel at x, where len is the dimension. */
FpStatus fp_kernel(double s, const double *x, size_t len, double *out);

/* Projection onto nonincreasing nonnegative vectors; out may alias values. */
FpStatus fp_project_monotone(const double *values, size_t len, double *out);

/* Volume-constrained minimizer as a new profile; energy may be NULL. */
FpStatus fp_minimize(const FpQuad *q, double mu, size_t m, uint64_t seed, FpProfile **out, double *energy);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* FRACPERIM_H */
