#ifndef ECFSENSE_H
#define ECFSENSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EcfStatus {
  ECF_STATUS_OK = 0,
  ECF_STATUS_NULL_POINTER = 1,
  ECF_STATUS_INVALID_PARAMETER = 2,
  ECF_STATUS_NO_GUIDED_MODE = 3,
  ECF_STATUS_NOT_CONVERGED = 4,
  ECF_STATUS_NUMERICAL = 5,
  ECF_STATUS_OUT_OF_RANGE = 6,
  ECF_STATUS_CONFIG = 7,
  ECF_STATUS_IO = 8,
  ECF_STATUS_BUFFER_TOO_SMALL = 9,
  ECF_STATUS_PANIC = 10,
} EcfStatus;

/**
 * Rasterized fiber cross-section.
 */
typedef struct EcfCrossSection EcfCrossSection;

/**
 * Guided modes solved on one cross-section, sorted by descending `n_eff`.
 */
typedef struct EcfModeSet EcfModeSet;

typedef struct EcfEvent {
  double start;
  double end;
  double peak;
  double snr;
} EcfEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next
 * call into this library from the same thread.
 */
const char *ecf_last_error(void);

/**
 * Evanescent decay length `λ / (2π n_m)` in meters.
 */
enum EcfStatus ecf_decay_length(double wavelength, double medium_index, double *out_gamma);

/**
 * Dipole scattering cross-section (m²) with the wavenumber taken in the medium.
 */
enum EcfStatus ecf_dipole_cross_section(double radius,
                                        double particle_index,
                                        double medium_index,
                                        double wavelength,
                                        double *out_sigma);

/**
 * Volume-averaged evanescent intensity weight of a sphere touching the surface.
 */
enum EcfStatus ecf_evanescent_weight(double radius, double gamma, double *out_weight);

/**
 * Power collected into the guided mode from one fiber end.
 */
enum EcfStatus ecf_collected_power(double scattered, double efficiency, double *out_power);

/**
 * Step-index core in a uniform background, `margin` meters of background on
 * every side.
 */
enum EcfStatus ecf_cross_section_step_index(double core_diameter,
                                            double core_index,
                                            double background_index,
                                            double spacing,
                                            double margin,
                                            double wavelength,
                                            struct EcfCrossSection **out_handle);

/**
 * Exposed-core preset with the default hole shape.
 */
enum EcfStatus ecf_cross_section_exposed_core(double core_diameter,
                                              double core_index,
                                              double medium_index,
                                              double internal_hole_index,
                                              double spacing,
                                              double margin,
                                              double wavelength,
                                              struct EcfCrossSection **out_handle);

/**
 * Grid dimensions of a cross-section.
 */
enum EcfStatus ecf_cross_section_shape(const struct EcfCrossSection *handle,
                                       size_t *out_nx,
                                       size_t *out_ny);

void ecf_cross_section_free(struct EcfCrossSection *handle);

/**
 * Solves for the `n_modes` highest-index guided modes.
 */
enum EcfStatus ecf_solve_modes(const struct EcfCrossSection *cross_section,
                               size_t n_modes,
                               struct EcfModeSet **out_handle);

size_t ecf_mode_count(const struct EcfModeSet *set);

enum EcfStatus ecf_mode_n_eff(const struct EcfModeSet *set, size_t k, double *out_n_eff);

/**
 * Copies the row-major field of mode `k` into `buffer`. `len` must be at least
 * `nx * ny`.
 */
enum EcfStatus ecf_mode_field(const struct EcfModeSet *set, size_t k, double *buffer, size_t len);

/**
 * Field at the core surface relative to its maximum, along the default
 * vertical cut toward the open hole.
 */
enum EcfStatus ecf_mode_surface_fraction(const struct EcfModeSet *set,
                                         size_t k,
                                         const struct EcfCrossSection *cross_section,
                                         double *out_fraction);

void ecf_mode_set_free(struct EcfModeSet *set);

/**
 * Threshold detector over a normalized amplitude series. Writes up to
 * `capacity` events and the total found to `out_count`; returns
 * `BufferTooSmall` when the total exceeds the capacity.
 */
enum EcfStatus ecf_detect_events(const double *amplitude,
                                 size_t len,
                                 double rate,
                                 double start_time,
                                 double threshold,
                                 double min_separation,
                                 struct EcfEvent *events,
                                 size_t capacity,
                                 size_t *out_count);

/**
 * Runs a CLI command (for example `"scaling"` or `"figure trace"`) on a TOML
 * config given as text and writes its artifacts to `out_dir`.
 */
enum EcfStatus ecf_run_command(const char *command, const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECFSENSE_H */
