#ifndef EIACC_H
#define EIACC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EiaccStatus {
  EIACC_STATUS_OK = 0,
  EIACC_STATUS_NULL_POINTER = 1,
  EIACC_STATUS_INVALID_ARGUMENT = 2,
  EIACC_STATUS_INVALID_CODE = 3,
  EIACC_STATUS_OVERFLOW = 4,
  EIACC_STATUS_INTERNAL = 5,
} EiaccStatus;

typedef enum EiaccStrategy {
  // Visit every register.
  EIACC_STRATEGY_EXACT_FULL = 0,
  // Visit only the touched registers.
  EIACC_STRATEGY_EXACT_RANGE = 1,
  // Visit the top `window` touched registers; lower bits are dropped.
  EIACC_STRATEGY_WINDOW = 2,
} EiaccStrategy;

// Running sum of one code stream.
typedef struct EiaccAccumulator EiaccAccumulator;

// Running sum of products of two code streams.
typedef struct EiaccMac EiaccMac;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. Valid until the
// next failing call on the same thread.
const char *eiacc_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void eiacc_string_free(char *s);

// Library version as a static string.
const char *eiacc_version(void);

// Creates an accumulator for stream format `format_id` (same ids as the
// binary stream header).
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum EiaccStatus eiacc_accumulator_new(uint8_t format_id,
                                       uint32_t k,
                                       uint32_t nv,
                                       struct EiaccAccumulator **out);

// # Safety
// `h` must be null or a live handle from [`eiacc_accumulator_new`].
void eiacc_accumulator_free(struct EiaccAccumulator *h);

// Adds `len` codes. Stops at the first bad code or overflow; `consumed`
// (if non-null) receives how many codes were absorbed before that.
//
// # Safety
// `h` must be a live handle and `codes` must point to `len` values.
enum EiaccStatus eiacc_accumulator_add(struct EiaccAccumulator *h,
                                       const uint64_t *codes,
                                       size_t len,
                                       size_t *consumed);

// Nonzero inputs absorbed since the last reconstruction, or 0 for null.
//
// # Safety
// `h` must be null or a live handle.
uint64_t eiacc_accumulator_count(const struct EiaccAccumulator *h);

// Reads out the sum and clears the accumulator. `out_value` gets the
// nearest double; `out_text` gets the exact value as
// `<sign><hex significand> * 2^<exponent>`, to be freed with
// [`eiacc_string_free`]. Either output may be null.
//
// # Safety
// `h` must be a live handle; non-null outputs must be writable.
enum EiaccStatus eiacc_accumulator_reconstruct(struct EiaccAccumulator *h,
                                               enum EiaccStrategy strategy_kind,
                                               uint32_t window,
                                               double *out_value,
                                               char **out_text);

// Creates a multiply-accumulate unit for format `format_id`.
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum EiaccStatus eiacc_mac_new(uint8_t format_id, uint32_t k, uint32_t nv, struct EiaccMac **out);

// # Safety
// `h` must be null or a live handle from [`eiacc_mac_new`].
void eiacc_mac_free(struct EiaccMac *h);

// Accumulates `a[i] * b[i]` for `i < len`, stopping at the first failure.
//
// # Safety
// `h` must be a live handle; `a` and `b` must each point to `len` values.
enum EiaccStatus eiacc_mac_add(struct EiaccMac *h,
                               const uint64_t *a,
                               const uint64_t *b,
                               size_t len,
                               size_t *consumed);

// Reads out the dot product and clears the unit. Outputs as for
// [`eiacc_accumulator_reconstruct`].
//
// # Safety
// `h` must be a live handle; non-null outputs must be writable.
enum EiaccStatus eiacc_mac_reconstruct(struct EiaccMac *h, double *out_value, char **out_text);

// Outputs that can toggle per clock for mantissa width `nm`.
uint64_t eiacc_flip_count(uint32_t nm, uint32_t k, uint32_t nv);

// Gate estimate with the default cost parameters.
//
// # Safety
// `out` must be writable.
enum EiaccStatus eiacc_gate_count(uint32_t ne, uint32_t nm, uint32_t k, uint32_t nv, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIACC_H */
