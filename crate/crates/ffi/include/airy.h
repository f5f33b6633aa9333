#ifndef AIRY_H
#define AIRY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum AiryStatus {
  AIRY_STATUS_OK = 0,
  AIRY_STATUS_NULL_POINTER = 1,
  AIRY_STATUS_INVALID_ARGUMENT = 2,
  AIRY_STATUS_PARSE = 3,
  AIRY_STATUS_IO = 4,
  AIRY_STATUS_FORMAT = 5,
  AIRY_STATUS_GUARD_BAND = 6,
  AIRY_STATUS_NUMERICAL = 7,
  AIRY_STATUS_OUT_OF_RANGE = 8,
  AIRY_STATUS_PANIC = 9,
} AiryStatus;

/**
 * Free-space propagation method.
 */
typedef enum AiryPropagator {
  AIRY_PROPAGATOR_ANGULAR_SPECTRUM = 0,
  AIRY_PROPAGATOR_FRESNEL = 1,
} AiryPropagator;

/**
 * Which side of the edge an opaque block covers.
 */
typedef enum AiryBlockSide {
  AIRY_BLOCK_SIDE_LEFT = 0,
  AIRY_BLOCK_SIDE_RIGHT = 1,
} AiryBlockSide;

/**
 * Pair-number statistics of the source.
 */
typedef enum AiryPairStatistics {
  AIRY_PAIR_STATISTICS_POISSON = 0,
  AIRY_PAIR_STATISTICS_THERMAL = 1,
} AiryPairStatistics;

/**
 * Opaque parsed bench.
 */
typedef struct AiryBench AiryBench;

/**
 * Opaque list of tap results from a bench run.
 */
typedef struct AiryBenchRun AiryBenchRun;

/**
 * Opaque sampled complex field.
 */
typedef struct AiryField AiryField;

/**
 * Source and detector parameters of a counting run.
 */
typedef struct AiryCountingParams {
  /**
   * Mean pairs per gate.
   */
  double mu;
  double rep_rate_hz;
  double gate_width_s;
  uint64_t n_gates;
  enum AiryPairStatistics statistics;
  double eta_s;
  double eta_i;
  double dark_s_cps;
  double dark_i_cps;
} AiryCountingParams;

/**
 * Outcome of a simulated counting run.
 */
typedef struct AiryCarResult {
  double car;
  double sigma;
  uint64_t center;
  double mean_accidentals;
  uint64_t clicks_s;
  uint64_t clicks_i;
} AiryCarResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the buffer size the full message needs.
 * An empty message means the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t airy_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *airy_version(void);

/**
 * Allocates a zero field on an `nx`×`ny` grid with pitches `dx`, `dy` (m).
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum AiryStatus airy_field_new(size_t nx,
                               size_t ny,
                               double dx,
                               double dy,
                               double wavelength,
                               struct AiryField **out);

/**
 * # Safety
 * `field` must be null or a handle from this library, not yet freed.
 */
void airy_field_free(struct AiryField *field);

/**
 * # Safety
 * `field` must be a live handle and `out` a valid handle slot.
 */
enum AiryStatus airy_field_clone(const struct AiryField *field, struct AiryField **out);

/**
 * Reads a field file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum AiryStatus airy_field_read(const char *path, struct AiryField **out);

/**
 * # Safety
 * `field` must be a live handle and `path` a NUL-terminated string.
 */
enum AiryStatus airy_field_write(const struct AiryField *field, const char *path);

/**
 * Grid size, pitches and wavelength. Any output pointer may be null.
 *
 * # Safety
 * `field` must be a live handle; non-null outputs must be writable.
 */
enum AiryStatus airy_field_grid(const struct AiryField *field,
                                size_t *nx,
                                size_t *ny,
                                double *dx,
                                double *dy,
                                double *wavelength);

/**
 * Total power `Σ|E|²·dx·dy`.
 *
 * # Safety
 * `field` must be a live handle and `out` writable.
 */
enum AiryStatus airy_field_power(const struct AiryField *field, double *out);

/**
 * Copies samples out as interleaved (re, im) pairs in row-major order.
 * `len` counts doubles and must be at least `2·nx·ny`.
 *
 * # Safety
 * `field` must be a live handle and `buf` point to `len` writable doubles.
 */
enum AiryStatus airy_field_get_data(const struct AiryField *field, double *buf, size_t len);

/**
 * Overwrites samples from interleaved (re, im) pairs; `len` must equal
 * `2·nx·ny`.
 *
 * # Safety
 * `field` must be a live handle and `buf` point to `len` readable doubles.
 */
enum AiryStatus airy_field_set_data(struct AiryField *field, const double *buf, size_t len);

/**
 * Propagates the field by `z` metres in place.
 *
 * # Safety
 * `field` must be a live handle.
 */
enum AiryStatus airy_field_propagate(struct AiryField *field, double z, enum AiryPropagator method);

/**
 * Applies a thin lens of focal length `focal` in place.
 *
 * # Safety
 * `field` must be a live handle.
 */
enum AiryStatus airy_field_apply_lens(struct AiryField *field, double focal);

/**
 * Zeroes the field on one side of the vertical line `x = edge` in place.
 *
 * # Safety
 * `field` must be a live handle.
 */
enum AiryStatus airy_field_apply_block(struct AiryField *field,
                                       double edge,
                                       enum AiryBlockSide side);

/**
 * Centered collimated Gaussian of amplitude waist `w0` on an `n`×`n` grid.
 *
 * # Safety
 * `out` must be a valid handle slot.
 */
enum AiryStatus airy_gaussian_mode(size_t n,
                                   double pitch,
                                   double wavelength,
                                   double w0,
                                   struct AiryField **out);

/**
 * Finite-energy 2D Airy mode with scale `x0` on both axes and truncation `a`.
 *
 * # Safety
 * `out` must be a valid handle slot.
 */
enum AiryStatus airy_airy_mode(size_t n,
                               double pitch,
                               double wavelength,
                               double x0,
                               double a,
                               struct AiryField **out);

/**
 * Fundamental fiber mode (Gaussian of the given mode-field diameter).
 *
 * # Safety
 * `out` must be a valid handle slot.
 */
enum AiryStatus airy_fiber_mode(size_t n,
                                double pitch,
                                double wavelength,
                                double mfd,
                                struct AiryField **out);

/**
 * Power coupling `|⟨field, mode⟩|² / (‖field‖²‖mode‖²)`.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum AiryStatus airy_coupling_efficiency(const struct AiryField *field,
                                         const struct AiryField *mode,
                                         double *out);

/**
 * Parses a bench description from text.
 *
 * # Safety
 * `doc` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum AiryStatus airy_bench_parse(const char *doc, struct AiryBench **out);

/**
 * Loads a bench file; relative mask paths resolve against its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum AiryStatus airy_bench_load(const char *path, struct AiryBench **out);

/**
 * # Safety
 * `bench` must be null or a live handle.
 */
void airy_bench_free(struct AiryBench *bench);

/**
 * Runs the bench and returns every tap.
 *
 * # Safety
 * `bench` must be a live handle and `out` a valid handle slot.
 */
enum AiryStatus airy_bench_run(const struct AiryBench *bench, struct AiryBenchRun **out);

/**
 * # Safety
 * `run` must be null or a live handle.
 */
void airy_bench_run_free(struct AiryBenchRun *run);

/**
 * Number of taps in a run.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum AiryStatus airy_bench_run_len(const struct AiryBenchRun *run, size_t *out);

/**
 * Copies tap `index`'s label into `buf`; `needed` (may be null) receives
 * the buffer size the full label requires.
 *
 * # Safety
 * `run` must be a live handle; `buf` null or `len` writable bytes.
 */
enum AiryStatus airy_bench_run_label(const struct AiryBenchRun *run,
                                     size_t index,
                                     char *buf,
                                     size_t len,
                                     size_t *needed);

/**
 * Cumulative propagation distance at tap `index`.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum AiryStatus airy_bench_run_z(const struct AiryBenchRun *run, size_t index, double *out);

/**
 * Copies the field at tap `index` into a new handle.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid handle slot.
 */
enum AiryStatus airy_bench_run_field(const struct AiryBenchRun *run,
                                     size_t index,
                                     struct AiryField **out);

/**
 * Closed-form coincidence-to-accidentals ratio.
 *
 * # Safety
 * `params` must point to a valid struct and `out` be writable.
 */
enum AiryStatus airy_analytic_car(const struct AiryCountingParams *params, double *out);

/**
 * Monte Carlo counting run: click streams, coincidence histogram over
 * `±span` gates and CAR. Deterministic for a given `seed`.
 *
 * # Safety
 * `params` must point to a valid struct and `out` be writable.
 */
enum AiryStatus airy_simulate_car(const struct AiryCountingParams *params,
                                  uint64_t seed,
                                  uint64_t span,
                                  struct AiryCarResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRY_H */
