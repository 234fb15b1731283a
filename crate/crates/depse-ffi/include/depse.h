#ifndef DEPSE_H
#define DEPSE_H

/* Generated by cbindgen from the depse-ffi crate; do not edit by hand. */

#include <stdint.h>
#include <stddef.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum DepseStatus {
  DEPSE_STATUS_OK = 0,
  DEPSE_STATUS_NULL_ARGUMENT = 1,
  DEPSE_STATUS_INVALID_ARGUMENT = 2,
  DEPSE_STATUS_CONFIG_ERROR = 3,
  DEPSE_STATUS_RUNTIME_ERROR = 4,
} DepseStatus;

/**
 * Opaque enhancement engine built from a JSON run configuration.
 */
typedef struct DepseEnhancer DepseEnhancer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library; static storage, do not free.
 */
const char *depse_version(void);

/**
 * Copy the thread-local last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the untruncated length.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes, or be NULL with
 * `len == 0` to query the required size.
 */
uintptr_t depse_last_error(char *buf, uintptr_t len);

/**
 * Build an enhancer from a JSON run configuration (same schema as the CLI).
 * Returns NULL on error; see `depse_last_error`.
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated UTF-8 string.
 */
struct DepseEnhancer *depse_enhancer_new(const char *config_json);

/**
 * Release an enhancer obtained from `depse_enhancer_new`.
 *
 * # Safety
 * `handle` must be NULL or a pointer previously returned by
 * `depse_enhancer_new` that has not been freed yet.
 */
void depse_enhancer_free(struct DepseEnhancer *handle);

/**
 * Enhance a mono 16 kHz waveform. `output` receives exactly `len` samples.
 * `seed` makes the run reproducible.
 *
 * # Safety
 * `input` and `output` must point to `len` readable/writable doubles and
 * `handle` must be a live enhancer.
 */
enum DepseStatus depse_enhance_waveform(const struct DepseEnhancer *handle,
                                        const double *input,
                                        uintptr_t len,
                                        uint64_t seed,
                                        double *output);

/**
 * Scale-invariant SDR between two equal-length waveforms, in dB.
 *
 * # Safety
 * `reference` and `estimate` must point to `len` readable doubles and
 * `out_db` must be writable.
 */
enum DepseStatus depse_si_sdr(const double *reference,
                              const double *estimate,
                              uintptr_t len,
                              double *out_db);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DEPSE_H */
