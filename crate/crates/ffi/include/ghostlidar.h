#ifndef GHOSTLIDAR_H
#define GHOSTLIDAR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GlStatus {
  GL_STATUS_OK = 0,
  GL_STATUS_NULL_POINTER = 1,
  GL_STATUS_INVALID_UTF8 = 2,
  GL_STATUS_DOMAIN = 3,
  GL_STATUS_CONFIG = 4,
  GL_STATUS_SAMPLING = 5,
  GL_STATUS_GRID_MISMATCH = 6,
  GL_STATUS_INTERNAL = 7,
  GL_STATUS_ESTIMATION = 8,
  GL_STATUS_BUDGET = 9,
  GL_STATUS_UNSUPPORTED = 10,
  GL_STATUS_IO = 11,
  GL_STATUS_PARSE = 12,
  GL_STATUS_PANIC = 13,
} GlStatus;

typedef enum GlSourceKind {
  GL_SOURCE_KIND_PSEUDOTHERMAL = 0,
  GL_SOURCE_KIND_SPDC = 1,
  GL_SOURCE_KIND_COMPUTATIONAL = 2,
} GlSourceKind;

// Opaque experiment report handle.
typedef struct GlReport GlReport;

// Opaque scenario handle.
typedef struct GlScenario GlScenario;

// Derived lengths and dimensionless ratios of a scenario.
typedef struct GlGeometry {
  double wavenumber;
  double rho_l;
  double a_l;
  double alpha;
  double alpha_tilde;
  double beta;
  double brightness;
  double brightness_omega;
  // Turbulence coherence lengths of the R, S and T paths; infinite in vacuum.
  double rho_r;
  double rho_s;
  double rho_t;
} GlGeometry;

// SNR of a uniform target, with its scaled noise terms and asymptotes.
typedef struct GlSnr {
  double total;
  double numerator;
  double source;
  double path;
  double detect;
  double mix;
  double saturation;
  double high_brightness;
  double low_brightness;
  uint32_t warnings;
} GlSnr;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to
// `len`). Returns the full message length excluding the NUL, or 0 if there is none.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t gl_last_error_message(char *buf, size_t len);

// Reference parameter set (λ₀ = 1.5 µm, a₀ = 3 cm, L = 1 km) at the given brightness per mode.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum GlStatus gl_scenario_paper_preset(enum GlSourceKind kind,
                                       double brightness_omega,
                                       struct GlScenario **out);

// Parses a scenario from JSON.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid handle slot.
enum GlStatus gl_scenario_from_json(const char *json, struct GlScenario **out);

// Sets C²ₙ (m^-2/3) on the reference, signal and target paths.
//
// # Safety
// `s` must be a live handle.
enum GlStatus gl_scenario_set_turbulence(struct GlScenario *s,
                                         double cn2_r,
                                         double cn2_s,
                                         double cn2_t);

// Sets the integration time T_I in seconds.
//
// # Safety
// `s` must be a live handle.
enum GlStatus gl_scenario_set_integration_time(struct GlScenario *s, double seconds);

// # Safety
// `s` must be null or a handle from this library not yet freed.
void gl_scenario_free(struct GlScenario *s);

// # Safety
// `s` must be a live handle and `out` writable.
enum GlStatus gl_derive_geometry(const struct GlScenario *s, struct GlGeometry *out);

// Analytic SNR for a uniform target of cross-section `target_area` (m²).
//
// # Safety
// `s` must be a live handle and `out` writable.
enum GlStatus gl_snr(const struct GlScenario *s, double target_area, struct GlSnr *out);

// Speckle-averaging factor Γ(β).
//
// # Safety
// `out` must be writable.
enum GlStatus gl_speckle_gamma(double beta, double *out);

// Runs an experiment described by a JSON configuration. A failed check is not an error:
// the call returns `GL_STATUS_OK` and `gl_report_passed` reports 0.
//
// # Safety
// `config_json` must be a NUL-terminated string and `out` a valid handle slot.
enum GlStatus gl_run_experiment(const char *config_json, struct GlReport **out);

// 1 if every check passed, 0 if not, -1 for a null handle.
//
// # Safety
// `r` must be null or a live handle.
int32_t gl_report_passed(const struct GlReport *r);

// JSON form of the report. The string is owned by the handle and lives until `gl_report_free`.
//
// # Safety
// `r` must be null or a live handle.
const char *gl_report_json(const struct GlReport *r);

// # Safety
// `r` must be null or a handle from this library not yet freed.
void gl_report_free(struct GlReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GHOSTLIDAR_H */
