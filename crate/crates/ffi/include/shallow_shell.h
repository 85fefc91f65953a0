#ifndef SHALLOW_SHELL_H
#define SHALLOW_SHELL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_CONFIG = 2,
  SS_STATUS_NUMERICAL = 3,
  SS_STATUS_OUT_OF_RANGE = 4,
  SS_STATUS_INVALID_UTF8 = 5,
  SS_STATUS_PANIC = 6,
} SsStatus;

// Parsed and validated study configuration.
typedef struct SsConfig SsConfig;

// Elastic material law.
typedef struct SsMaterial SsMaterial;

// Convergence study table.
typedef struct SsReport SsReport;

// One row of a study table; `order` is NaN where undefined.
typedef struct SsReportRow {
  double h;
  double e_h;
  double f_h;
  double rescaled_energy;
  double limit_energy;
  double gap;
  double order;
} SsReportRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *ss_last_error_message(void);

const char *ss_version(void);

// # Safety
// `s` must be NULL or a string returned by this library.
void ss_string_free(char *s);

// Parses configuration text; `*out` receives a handle on success.
//
// # Safety
// `text` must be a NUL-terminated string, `out` a valid pointer.
enum SsStatus ss_config_parse(const char *text, struct SsConfig **out);

// Canonical text of a configuration.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum SsStatus ss_config_echo(const struct SsConfig *cfg, char **out);

// # Safety
// `cfg` must be NULL or a handle from [`ss_config_parse`], freed once.
void ss_config_free(struct SsConfig *cfg);

// `kind` is `"stvk"` or `"squared-distance"`.
//
// # Safety
// `kind` must be a NUL-terminated string and `out` a valid pointer.
enum SsStatus ss_material_new(const char *kind, double lambda, double mu, struct SsMaterial **out);

// # Safety
// `mat` must be NULL or a handle from [`ss_material_new`], freed once.
void ss_material_free(struct SsMaterial *mat);

// Stored energy `W(F)` for a row-major 3×3 `F`.
//
// # Safety
// `f` must point to 9 doubles, `out` to one.
enum SsStatus ss_material_energy(const struct SsMaterial *mat, const double *f, double *out);

// Closed-form `Q₂(G)` and the value of the stretch minimization for a
// row-major 2×2 `G`. Either output may be NULL.
//
// # Safety
// `g` must point to 4 doubles; non-NULL outputs to one double each.
enum SsStatus ss_material_q2(const struct SsMaterial *mat,
                             const double *g,
                             double *closed_form,
                             double *minimized);

// Nearest rotation to a row-major 3×3 matrix, written row-major to `out`.
//
// # Safety
// `f` and `out` must each point to 9 doubles.
enum SsStatus ss_nearest_rotation(const double *f, double *out);

// Recovery study over the configured thickness sweep.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum SsStatus ss_run_recovery_study(const struct SsConfig *cfg, struct SsReport **out);

// Full minimization study over the configured thickness sweep.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum SsStatus ss_run_full_gamma_study(const struct SsConfig *cfg, struct SsReport **out);

// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum SsStatus ss_report_len(const struct SsReport *report, size_t *out);

// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum SsStatus ss_report_row(const struct SsReport *report, size_t index, struct SsReportRow *out);

// The report in its CSV form.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum SsStatus ss_report_csv(const struct SsReport *report, char **out);

// # Safety
// `report` must be NULL or a handle from a study call, freed once.
void ss_report_free(struct SsReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHALLOW_SHELL_H */
