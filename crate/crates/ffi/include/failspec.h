#ifndef FAILSPEC_H
#define FAILSPEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum fs_status {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_POINTER = 1,
  FS_STATUS_INVALID_UTF8 = 2,
  FS_STATUS_DIMENSION = 3,
  FS_STATUS_INFEASIBLE = 4,
  FS_STATUS_BUDGET_EXHAUSTED = 5,
  FS_STATUS_INVALID_ARGUMENT = 6,
  FS_STATUS_PARSE = 7,
  FS_STATUS_UNDERDETERMINED = 8,
  FS_STATUS_NO_ROOT = 9,
  FS_STATUS_IO = 10,
  FS_STATUS_SERIALIZATION = 11,
  FS_STATUS_PANIC = 12,
} fs_status;

typedef enum fs_backend {
  FS_BACKEND_LOOKUP = 0,
  FS_BACKEND_BRANCH_AND_BOUND = 1,
  FS_BACKEND_BP_OSD0 = 2,
} fs_backend;

// A decoder bound to its own copy of a system.
typedef struct fs_decoder fs_decoder;

// A decoding system.
typedef struct fs_system fs_system;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *fs_last_error_message(void);

void fs_clear_error(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void fs_string_free(char *s);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum fs_status fs_system_read(const char *path, struct fs_system **out);

// Parses the text format.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum fs_status fs_system_parse(const char *text, struct fs_system **out);

// # Safety
// `out` must be writable.
enum fs_status fs_system_repetition(size_t n, struct fs_system **out);

// # Safety
// `out` must be writable.
enum fs_status fs_system_unrotated_toric(size_t d1, size_t d2, struct fs_system **out);

// # Safety
// `out` must be writable.
enum fs_status fs_system_rotated_toric(size_t d, struct fs_system **out);

// # Safety
// `sys` must be null or a live handle.
void fs_system_free(struct fs_system *sys);

// Number of compressed fault columns, 0 for a null handle.
//
// # Safety
// `sys` must be null or a live handle.
size_t fs_system_num_faults(const struct fs_system *sys);

// # Safety
// `sys` must be null or a live handle.
size_t fs_system_num_checks(const struct fs_system *sys);

// # Safety
// `sys` must be null or a live handle.
size_t fs_system_num_actions(const struct fs_system *sys);

// Sum of multiplicities.
//
// # Safety
// `sys` must be null or a live handle.
uint64_t fs_system_expanded_count(const struct fs_system *sys);

// Serialises to the text format. Free the result with [`fs_string_free`].
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum fs_status fs_system_to_text(const struct fs_system *sys, char **out);

// Exact code distance by repeated branch-and-bound decoding.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum fs_status fs_system_distance(const struct fs_system *sys, size_t *out);

// Builds a decoder with default settings for `backend`. The decoder keeps
// its own copy of the system, so `sys` may be freed afterwards.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum fs_status fs_decoder_new(const struct fs_system *sys,
                              enum fs_backend backend,
                              struct fs_decoder **out);

// # Safety
// `dec` must be null or a live handle.
void fs_decoder_free(struct fs_decoder *dec);

// Decodes a syndrome of `num_checks` bits into a correction of
// `num_faults` bits.
//
// # Safety
// `syndrome` and `correction` must point to the given number of bytes.
enum fs_status fs_decoder_decode(const struct fs_decoder *dec,
                                 const uint8_t *syndrome,
                                 size_t syndrome_len,
                                 uint8_t *correction,
                                 size_t correction_len);

// Whether decoding the syndrome of `error` changes its logical action.
//
// # Safety
// `error` must point to `len` bytes and `out` be writable.
enum fs_status fs_decoder_is_failure(const struct fs_decoder *dec,
                                     const uint8_t *error,
                                     size_t len,
                                     bool *out);

// Failures among `trials` uniformly drawn weight-`w` expanded errors.
//
// # Safety
// `dec` must be a live handle and `failures` writable.
enum fs_status fs_sample_weight(const struct fs_decoder *dec,
                                uint64_t w,
                                uint64_t trials,
                                uint64_t seed,
                                uint64_t *failures);

// Failures among `trials` errors drawn at global rate `p`.
//
// # Safety
// `dec` must be a live handle and `failures` writable.
enum fs_status fs_sample_rate(const struct fs_decoder *dec,
                              double p,
                              uint64_t trials,
                              uint64_t seed,
                              uint64_t *failures);

// Binomial transform of a spectrum `f[0..=n]` at per-copy rate `q`.
//
// # Safety
// `f` must point to `len` doubles and `out` be writable.
enum fs_status fs_transform(const double *f, size_t len, double q, double *out);

// Multi-seeded splitting from `p0` down to each target. Writes the mean
// and standard deviation over the `l * m` instances for every target.
//
// # Safety
// `targets`, `p_hat` and `p_std` must each point to `n_targets` doubles.
enum fs_status fs_split(const struct fs_decoder *dec,
                        double p0,
                        const double *targets,
                        size_t n_targets,
                        size_t distance,
                        size_t l,
                        size_t m,
                        uint64_t seed,
                        double *p_hat,
                        double *p_std);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAILSPEC_H */
