#ifndef SNAPALIGN_H
#define SNAPALIGN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum SnapStatus {
  SNAP_STATUS_OK = 0,
  SNAP_STATUS_NULL_POINTER = 1,
  SNAP_STATUS_INVALID_ARGUMENT = 2,
  SNAP_STATUS_IO = 3,
  SNAP_STATUS_FORMAT = 4,
  SNAP_STATUS_CHECKSUM_MISMATCH = 5,
  SNAP_STATUS_VERSION_MISMATCH = 6,
  SNAP_STATUS_PANIC = 7,
} SnapStatus;

typedef enum SnapResultKind {
  SNAP_RESULT_KIND_SINGLE_HIT = 0,
  SNAP_RESULT_KIND_MULTIPLE_HITS = 1,
  SNAP_RESULT_KIND_NOT_FOUND = 2,
} SnapResultKind;

typedef enum SnapDirection {
  SNAP_DIRECTION_FORWARD = 0,
  SNAP_DIRECTION_REVERSE_COMPLEMENT = 1,
} SnapDirection;

/*
 Per-thread alignment state bound to one index.
 */
typedef struct SnapAligner SnapAligner;

/*
 Reference genome plus its seed index.
 */
typedef struct SnapIndex SnapIndex;

/*
 Aligner parameters. `max_distance_percent` is used when non-zero,
 otherwise `max_distance`.
 */
typedef struct SnapParams {
  uint32_t seed_size;
  uint32_t seeds_to_try;
  uint32_t max_distance;
  uint32_t max_distance_percent;
  uint32_t confidence;
  uint32_t max_hits;
  uint32_t bucket_size;
} SnapParams;

/*
 One alignment. `position` is 0-based in the concatenated reference;
 `has_hit` is 0 when there is no best location. `gap` is -1 when no second
 location was within reach.
 */
typedef struct SnapAlignment {
  enum SnapResultKind kind;
  uint8_t has_hit;
  uint64_t position;
  enum SnapDirection direction;
  uint32_t distance;
  int32_t gap;
} SnapAlignment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failing call on this thread, or null. The pointer is
 valid until the next failing call on this thread.
 */
const char *snap_last_error_message(void);

/*
 Fills `out` with the default parameters.

 # Safety
 `out` must be null or point to writable memory for one `SnapParams`.
 */
enum SnapStatus snap_params_default(struct SnapParams *out);

/*
 Builds an index for the FASTA file at `fasta_path`.

 # Safety
 `fasta_path` must be a NUL-terminated string; `out` must be writable.
 */
enum SnapStatus snap_index_build(const char *fasta_path,
                                 uint32_t seed_size,
                                 struct SnapIndex **out);

/*
 Loads an index file.

 # Safety
 `index_path` must be a NUL-terminated string; `out` must be writable.
 */
enum SnapStatus snap_index_load(const char *index_path, struct SnapIndex **out);

/*
 Writes `index` to `index_path`.

 # Safety
 `index` must come from this library; `index_path` must be NUL-terminated.
 */
enum SnapStatus snap_index_save(const struct SnapIndex *index, const char *index_path);

/*
 Length of the concatenated reference.

 # Safety
 `index` must be null or come from this library.
 */
uint64_t snap_index_genome_length(const struct SnapIndex *index);

/*
 Releases an index. Aligners created from it stay valid.

 # Safety
 `index` must be null or come from this library and not be used again.
 */
void snap_index_free(struct SnapIndex *index);

/*
 Creates an aligner over `index`; `params` may be null for defaults.

 # Safety
 `index` must come from this library; `params` must be null or valid;
 `out` must be writable.
 */
enum SnapStatus snap_aligner_new(const struct SnapIndex *index,
                                 const struct SnapParams *params,
                                 struct SnapAligner **out);

/*
 # Safety
 `aligner` must be null or come from this library and not be used again.
 */
void snap_aligner_free(struct SnapAligner *aligner);

/*
 Aligns one read of `len` bases (ASCII `ACGTN`, case-insensitive).

 # Safety
 `aligner` must come from this library; `bases` must point to `len`
 readable bytes; `out` must be writable.
 */
enum SnapStatus snap_align_read(struct SnapAligner *aligner,
                                const uint8_t *bases,
                                size_t len,
                                struct SnapAlignment *out);

/*
 Semi-global edit distance of `read` against `window` if at most
 `d_limit`; writes the distance or -1 to `out`.

 # Safety
 `read` and `window` must point to `read_len` and `window_len` readable
 bytes; `out` must be writable.
 */
enum SnapStatus snap_bounded_distance(const uint8_t *read,
                                      size_t read_len,
                                      const uint8_t *window,
                                      size_t window_len,
                                      int64_t d_limit,
                                      int64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNAPALIGN_H */
