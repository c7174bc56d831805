#ifndef CUSPWAVE_H
#define CUSPWAVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum CwStatus {
  CwStatus_Ok = 0,
  CwStatus_NullPointer = 1,
  CwStatus_InvalidArgument = 2,
  CwStatus_Domain = 3,
  CwStatus_ContourCollision = 4,
  CwStatus_Numerical = 5,
  CwStatus_Config = 6,
  CwStatus_Io = 7,
  CwStatus_Panic = 8,
} CwStatus;

/**
 * Run-configuration handle.
 */
typedef struct CwConfig CwConfig;

/**
 * Cusp domain handle.
 */
typedef struct CwDomain CwDomain;

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t cw_last_error(char *buf, uintptr_t len);

/**
 * Creates the domain between phi1 = x^2 and phi2 = -x^2 on (0, a], truncated at xi_max.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free with `cw_domain_free`.
 */
enum CwStatus cw_domain_new_quadratic(double a, double xi_max, struct CwDomain **out);

/**
 * Creates a domain from monomial coefficients of phi1 and phi2.
 *
 * # Safety
 * `c1`/`c2` must point to `n1`/`n2` readable doubles; `out` must be valid.
 */
enum CwStatus cw_domain_new_polynomial(double a,
                                       const double *c1,
                                       uintptr_t n1,
                                       const double *c2,
                                       uintptr_t n2,
                                       double xi_max,
                                       struct CwDomain **out);

/**
 * Releases a domain handle (null is ignored).
 *
 * # Safety
 * `d` must be null or a handle from `cw_domain_new_*` not freed before.
 */
void cw_domain_free(struct CwDomain *d);

/**
 * Checks the four profile conditions; `pass` receives 1 or 0 and
 * `failed_mask` bit k-1 is set when condition k fails.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CwStatus cw_domain_validate(const struct CwDomain *d, int *pass, uint32_t *failed_mask);

/**
 * (x, y) in the cusp domain to strip coordinates (xi, eta).
 *
 * # Safety
 * All pointers must be valid.
 */
enum CwStatus cw_domain_forward(const struct CwDomain *d,
                                double x,
                                double y,
                                double *xi,
                                double *eta);

/**
 * Strip coordinates (xi, eta) to (x, y).
 *
 * # Safety
 * All pointers must be valid.
 */
enum CwStatus cw_domain_inverse(const struct CwDomain *d,
                                double xi,
                                double eta,
                                double *x,
                                double *y);

/**
 * (H - mu)^{-1} f on [0,1] with Robin data at 0 and Dirichlet data at 1,
 * sampled on `panels` uniform Chebyshev panels of 13 nodes. `nodes`, `f_re`,
 * `f_im`, `u_re`, `u_im` hold 12 * panels + 1 values; `nodes` is written.
 *
 * # Safety
 * Every array pointer must reference 12 * panels + 1 doubles.
 */
enum CwStatus cw_resolvent_h(double mu_re,
                             double mu_im,
                             uintptr_t panels,
                             double *nodes,
                             const double *f_re,
                             const double *f_im,
                             double *u_re,
                             double *u_im);

/**
 * Solves w'' - z w = f on [0,1] with w'' + w' + w = 0 at both ends, on `n`
 * uniform nodes t_k = k/(n-1) (n odd, n >= 5). Real data, complex z.
 *
 * # Safety
 * `f`, `w_re`, `w_im` must reference `n` doubles.
 */
enum CwStatus cw_scalar_solve(double z_re,
                              double z_im,
                              uintptr_t n,
                              const double *f,
                              double *w_re,
                              double *w_im);

/**
 * Parses a TOML run configuration (validated).
 *
 * # Safety
 * `text` must be a NUL-terminated UTF-8 string; `out` must be valid.
 */
enum CwStatus cw_config_parse(const char *text, struct CwConfig **out);

/**
 * Reads the problem parameters of a configuration.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CwStatus cw_config_problem(const struct CwConfig *c, double *lambda, double *p, double *theta);

/**
 * Releases a configuration handle (null is ignored).
 *
 * # Safety
 * `c` must be null or a handle from `cw_config_parse` not freed before.
 */
void cw_config_free(struct CwConfig *c);

/**
 * Runs one CLI command; returns its exit status (0 pass, 1 fail, 2 usage).
 *
 * # Safety
 * `argv` must reference `argc` NUL-terminated strings, argv[0] being the program name.
 */
int cw_run(int argc, const char *const *argv);

#endif  /* CUSPWAVE_H */
