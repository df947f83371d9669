#ifndef DYNAVIS_H
#define DYNAVIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum DvStatus {
  DV_STATUS_OK = 0,
  DV_STATUS_NULL_POINTER = 1,
  DV_STATUS_INVALID_ARGUMENT = 2,
  DV_STATUS_CONFIG = 3,
  DV_STATUS_IO = 4,
  DV_STATUS_PARSE = 5,
  DV_STATUS_FORMAT = 6,
  DV_STATUS_NOT_ENOUGH_DATA = 7,
  DV_STATUS_NO_ASSOCIATIONS = 8,
  // Index past the end, or nothing processed yet.
  DV_STATUS_OUT_OF_RANGE = 9,
  // Output buffer too small; the required size was reported.
  DV_STATUS_BUFFER_TOO_SMALL = 10,
  DV_STATUS_INTERNAL = 11,
  DV_STATUS_PANIC = 12,
} DvStatus;

// Opaque pipeline handle.
typedef struct DvPipeline DvPipeline;

// Summary of one processed frame.
typedef struct DvFrameResult {
  // Camera to world translation.
  double t[3];
  // Camera to world rotation, `qx qy qz qw`.
  double q[4];
  bool lost;
  bool keyframe;
  uint32_t inliers;
  uint32_t tracks;
  uint32_t feedback;
} DvFrameResult;

// One object track as seen in the latest frame.
typedef struct DvTrack {
  uint64_t track_id;
  uint32_t class_id;
  // Panoptic code `class * 1000 + instance`.
  uint32_t code;
  bool matched;
  bool dynamic;
  // Smoothed speed, m/s.
  double speed;
  double depth;
  double bearing_deg;
  uint32_t n_points;
  // World-frame centroid.
  double centroid[3];
} DvTrack;

typedef struct DvEval {
  double ate_rmse;
  double rpe_t_rmse;
  double rpe_r_rmse_deg;
  uint64_t matched;
} DvEval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the latest failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *dv_last_error(void);

// Library version, static NUL-terminated string.
const char *dv_version(void);

// Creates a pipeline.
//
// `config` is `key=value` text as accepted by the CLI's `--config`;
// `classes` is the `class_id name prior_flag` table that interprets label
// images. Either may be null for defaults / no classes.
//
// # Safety
// String arguments must be null or valid NUL-terminated strings; `out` must
// be a valid pointer.
enum DvStatus dv_pipeline_new(const char *config, const char *classes, struct DvPipeline **out);

// Releases a pipeline. Null is ignored.
//
// # Safety
// `p` must come from [`dv_pipeline_new`] and not be used afterwards.
void dv_pipeline_free(struct DvPipeline *p);

// Processes one frame.
//
// Buffers are row-major, `width * height` pixels, and must match the
// configured camera size: `rgb` is 3 bytes per pixel, `depth` raw sensor
// units (meters times the depth scale, 0 = invalid), `labels` panoptic codes
// or null for "no instances". Timestamps must increase.
//
// # Safety
// `p` must be a live handle, buffers must hold `width * height` elements,
// `out` must be null or valid.
enum DvStatus dv_pipeline_push(struct DvPipeline *p,
                               double timestamp,
                               const uint8_t *rgb,
                               const uint16_t *depth,
                               const uint32_t *labels,
                               size_t width,
                               size_t height,
                               struct DvFrameResult *out);

// Object track `i` of the latest frame.
//
// # Safety
// `p` must be a live handle and `out` valid.
enum DvStatus dv_pipeline_track(const struct DvPipeline *p, size_t i, struct DvTrack *out);

// Feedback sentence `i` of the latest frame, nearest first.
//
// # Safety
// `p` must be a live handle; `buf` holds `cap` bytes; `needed` and `risk`
// may be null.
enum DvStatus dv_pipeline_feedback(const struct DvPipeline *p,
                                   size_t i,
                                   char *buf,
                                   size_t cap,
                                   size_t *needed,
                                   bool *risk);

// The whole camera trajectory so far as TUM text.
//
// # Safety
// As [`dv_pipeline_feedback`].
enum DvStatus dv_pipeline_trajectory(const struct DvPipeline *p,
                                     char *buf,
                                     size_t cap,
                                     size_t *needed);

// Frames processed and frames lost so far.
//
// # Safety
// `p` must be a live handle; outputs may be null.
enum DvStatus dv_pipeline_counts(const struct DvPipeline *p, size_t *frames, size_t *lost);

// Compares two TUM trajectory texts.
//
// # Safety
// Strings must be valid NUL-terminated; `out` must be valid.
enum DvStatus dv_eval_text(const char *est, const char *gt, double tolerance, struct DvEval *out);

// Compares two TUM trajectory files.
//
// # Safety
// As [`dv_eval_text`].
enum DvStatus dv_eval_files(const char *est_path,
                            const char *gt_path,
                            double tolerance,
                            struct DvEval *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNAVIS_H */
