/* C interface to slicetrack. Generated; do not edit. */

#ifndef SLICETRACK_H
#define SLICETRACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Tracked output the hybrid union builds on.
 */
typedef enum StHybridBase {
  ST_HYBRID_BASE_BIDIRECTIONAL = 0,
  ST_HYBRID_BASE_FORWARD = 1,
} StHybridBase;

/**
 * How detections are linked and refiltered.
 */
typedef enum StMode {
  ST_MODE_BASELINE = 0,
  ST_MODE_BYTETRACK = 1,
  ST_MODE_BIDIRECTIONAL = 2,
  ST_MODE_HYBRID = 3,
  ST_MODE_SPATIOTEMPORAL = 4,
} StMode;

/**
 * Outcome of a call. Anything but `Ok` leaves a message for
 * `st_last_error_message`.
 */
typedef enum StStatus {
  ST_STATUS_OK = 0,
  ST_STATUS_NULL_POINTER = 1,
  ST_STATUS_INVALID_UTF8 = 2,
  ST_STATUS_INVALID_ARGUMENT = 3,
  ST_STATUS_PARSE_ERROR = 4,
  ST_STATUS_EVAL_ERROR = 5,
  ST_STATUS_IO_ERROR = 6,
  ST_STATUS_INTERNAL_ERROR = 7,
} StStatus;

/**
 * An owned set of volumes, opaque to the caller.
 */
typedef struct StCorpus StCorpus;

/**
 * Tracking parameters. Start from `st_track_options_default` and adjust;
 * every field must hold one of its declared values.
 */
typedef struct StTrackOptions {
  enum StMode mode;
  /**
   * Score at or above which a detection may start or confirm a track.
   */
  double track_activation;
  /**
   * IoU floor for linking a detection to a predicted track box.
   */
  double min_match;
  /**
   * Slices a track may go unseen before it is dropped.
   */
  uint32_t lost_buffer;
  /**
   * Score a detection must exceed to be kept outside tracking.
   */
  double confidence;
  /**
   * IoU at or above which a merged pair collapses to one box.
   */
  double dedup_iou;
  enum StHybridBase hybrid_base;
  /**
   * Run the confidence filter before the neighbor-support filter.
   */
  bool filter_baseline_first;
} StTrackOptions;

/**
 * Corpus-level counts and rates from `st_evaluate`.
 */
typedef struct StEvalReport {
  uint64_t true_positives;
  uint64_t false_positives;
  uint64_t false_negatives;
  double precision;
  double recall;
  double f1;
} StEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failing call on this thread. The pointer
 * stays valid until the next failing call on the same thread; it is
 * never null and holds an empty string before any failure.
 */
const char *st_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *st_version(void);

/**
 * The stock tracking configuration.
 */
struct StTrackOptions st_track_options_default(void);

/**
 * Parses record text into a new corpus. `with_scores` selects between
 * detection records (scored boxes) and plain truth records.
 *
 * # Safety
 * `text` must point to a NUL-terminated string and `out` to writable
 * space for one pointer. On `Ok`, `*out` owns a corpus the caller must
 * release with `st_corpus_free`.
 */
enum StStatus st_corpus_parse_text(const char *text, bool with_scores, struct StCorpus **out);

/**
 * Reads and parses one record file into a new corpus.
 *
 * # Safety
 * `path` must point to a NUL-terminated string and `out` to writable
 * space for one pointer. On `Ok`, `*out` owns a corpus the caller must
 * release with `st_corpus_free`.
 */
enum StStatus st_corpus_parse_file(const char *path, bool with_scores, struct StCorpus **out);

/**
 * Runs the configured mode over every volume of `input`, producing a new
 * detection corpus.
 *
 * # Safety
 * `input`, `options`, and `out` must be non-null; `input` must be a live
 * corpus handle and `options` a fully initialised struct whose enum
 * fields hold declared values. On `Ok`, `*out` owns a corpus the caller
 * must release with `st_corpus_free`.
 */
enum StStatus st_track(const struct StCorpus *input,
                       const struct StTrackOptions *options,
                       struct StCorpus **out);

/**
 * Renders a corpus in the canonical record text form.
 *
 * # Safety
 * `corpus` must be a live corpus handle and `out` writable space for one
 * pointer. On `Ok`, `*out` is a NUL-terminated string the caller must
 * release with `st_string_free`.
 */
enum StStatus st_corpus_serialize(const struct StCorpus *corpus, char **out);

/**
 * Scores `predictions` against `truth` and fills `report` with the
 * corpus-level counts and rates.
 *
 * # Safety
 * All three pointers must be non-null; the corpora must be live handles
 * and `report` writable space for one `StEvalReport`.
 */
enum StStatus st_evaluate(const struct StCorpus *predictions,
                          const struct StCorpus *truth,
                          struct StEvalReport *report);

/**
 * Number of studies in the corpus.
 *
 * # Safety
 * `corpus` must be a live corpus handle and `out` writable space for one
 * `size_t`.
 */
enum StStatus st_corpus_study_count(const struct StCorpus *corpus, size_t *out);

/**
 * Total number of boxes across all studies in the corpus.
 *
 * # Safety
 * `corpus` must be a live corpus handle and `out` writable space for one
 * `size_t`.
 */
enum StStatus st_corpus_detection_count(const struct StCorpus *corpus, size_t *out);

/**
 * Releases a corpus handle. A null pointer is a no-op.
 *
 * # Safety
 * `corpus` must be null or a pointer obtained from this library that has
 * not been freed yet.
 */
void st_corpus_free(struct StCorpus *corpus);

/**
 * Releases a string obtained from this library. A null pointer is a
 * no-op.
 *
 * # Safety
 * `text` must be null or a pointer obtained from this library that has
 * not been freed yet.
 */
void st_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLICETRACK_H */
