#ifndef KEYED_SFFT_H
#define KEYED_SFFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfftPath {
  SfftPath_FastPath = 0,
  SfftPath_Fallback = 1,
} SfftPath;

typedef enum SfftStatus {
  SfftStatus_Ok = 0,
  SfftStatus_NullPointer = 1,
  SfftStatus_InvalidArgument = 2,
  SfftStatus_Parse = 3,
  SfftStatus_FallbackTooLarge = 4,
  SfftStatus_Internal = 5,
  SfftStatus_Panic = 6,
} SfftStatus;

typedef struct SfftConfig SfftConfig;

typedef struct SfftResult SfftResult;

/**
 * A signal: dense samples or a lazily synthesized sparse spectrum.
 */
typedef struct SfftSignal SfftSignal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call on the same thread.
 */
const char *sfft_last_error(void);

/**
 * Wraps `len` interleaved `(re, im)` samples.
 *
 * # Safety
 * `re_im` must point to `2 * len` doubles; `out` must be writable.
 */
enum SfftStatus sfft_signal_from_dense(const double *re_im, size_t len, struct SfftSignal **out);

/**
 * A signal synthesized from `count` tones on a grid of length `grid`.
 * `nominal_n` of zero means the grid itself is the nominal length.
 *
 * # Safety
 * `freqs` must point to `count` integers and `re_im` to `2 * count` doubles.
 */
enum SfftStatus sfft_signal_from_spectrum(uint64_t grid,
                                          const uint64_t *freqs,
                                          const double *re_im,
                                          size_t count,
                                          uint64_t nominal_n,
                                          struct SfftSignal **out);

/**
 * # Safety
 * `signal` must come from a `sfft_signal_*` constructor or be null.
 */
void sfft_signal_free(struct SfftSignal *signal);

/**
 * # Safety
 * `out` must be writable.
 */
enum SfftStatus sfft_config_default(struct SfftConfig **out);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a nul-terminated string; `out` must be writable.
 */
enum SfftStatus sfft_config_from_toml(const char *toml, struct SfftConfig **out);

/**
 * Pins the identification moduli.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum SfftStatus sfft_config_set_moduli(struct SfftConfig *cfg,
                                       uint64_t m1,
                                       uint64_t m2,
                                       uint64_t m3);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum SfftStatus sfft_config_set_force_fallback(struct SfftConfig *cfg, bool on);

/**
 * # Safety
 * `cfg` must come from a `sfft_config_*` constructor or be null.
 */
void sfft_config_free(struct SfftConfig *cfg);

/**
 * Recovers the `k` largest components. A null `cfg` uses the defaults.
 *
 * # Safety
 * `signal` must be live, `cfg` live or null, `out` writable.
 */
enum SfftStatus sfft_transform(const struct SfftSignal *signal,
                               const struct SfftConfig *cfg,
                               size_t k,
                               uint64_t seed,
                               struct SfftResult **out);

/**
 * # Safety
 * `result` must be a live result handle.
 */
size_t sfft_result_len(const struct SfftResult *result);

/**
 * # Safety
 * `result` must be a live result handle.
 */
uint64_t sfft_result_grid(const struct SfftResult *result);

/**
 * # Safety
 * `result` must be a live result handle.
 */
enum SfftPath sfft_result_path(const struct SfftResult *result);

/**
 * Total complex multiply-adds the run spent.
 *
 * # Safety
 * `result` must be a live result handle.
 */
uint64_t sfft_result_total_ops(const struct SfftResult *result);

/**
 * Entry `index` in ascending frequency order.
 *
 * # Safety
 * `result` must be live; the out pointers must be writable.
 */
enum SfftStatus sfft_result_entry(const struct SfftResult *result,
                                  size_t index,
                                  uint64_t *f,
                                  double *re,
                                  double *im);

/**
 * The certificate as JSON; release it with [`sfft_string_free`].
 *
 * # Safety
 * `result` must be live; `out` writable.
 */
enum SfftStatus sfft_result_certificate_json(const struct SfftResult *result, char **out);

/**
 * # Safety
 * `result` must come from [`sfft_transform`] or be null.
 */
void sfft_result_free(struct SfftResult *result);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void sfft_string_free(char *s);

/**
 * Re-checks a certificate against `signal`; `violations` receives the
 * number of failed checks (zero means the certificate holds).
 *
 * # Safety
 * `json` must be nul-terminated, `signal` live, `violations` writable.
 */
enum SfftStatus sfft_verify_certificate(const char *json,
                                        const struct SfftSignal *signal,
                                        size_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KEYED_SFFT_H */
