#ifndef COURTREG_H
#define COURTREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  CR_STATUS_INVALID_ARGUMENT = 2,
  CR_STATUS_IO = 3,
  CR_STATUS_FORMAT = 4,
  CR_STATUS_DEGENERATE = 5,
  CR_STATUS_NO_MODEL = 6,
  CR_STATUS_BUFFER_TOO_SMALL = 7,
  CR_STATUS_PANIC = 8,
} CrStatus;

typedef enum CrFallbackReason {
  CR_FALLBACK_REASON_NONE = 0,
  CR_FALLBACK_REASON_NO_MODEL = 1,
  CR_FALLBACK_REASON_DEGENERATE = 2,
  CR_FALLBACK_REASON_TOO_FEW_KEYPOINTS = 3,
} CrFallbackReason;

/**
 * Heatmap tensor handle.
 */
typedef struct CrHeatmap CrHeatmap;

/**
 * Court-to-image homography handle.
 */
typedef struct CrHomography CrHomography;

/**
 * Keypoint layout handle.
 */
typedef struct CrLayout CrLayout;

typedef struct CrEstimateConfig {
  double reproj_threshold_px;
  size_t max_iterations;
  size_t min_inliers;
  size_t min_support;
  uint64_t seed;
} CrEstimateConfig;

typedef struct CrRegistration {
  size_t inlier_count;
  size_t decoded_count;
  bool used_fallback;
  enum CrFallbackReason fallback_reason;
} CrRegistration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next `cr_*` call on the same thread.
 */
const char *cr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cr_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CrStatus cr_layout_default(struct CrLayout **out);

/**
 * Parses a layout JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CrStatus cr_layout_from_json(const char *json, struct CrLayout **out);

/**
 * Number of classes including baskets and background; 0 for NULL.
 *
 * # Safety
 * `layout` must be NULL or a live handle.
 */
size_t cr_layout_num_classes(const struct CrLayout *layout);

/**
 * # Safety
 * `layout` must be NULL or a handle not yet freed.
 */
void cr_layout_free(struct CrLayout *layout);

/**
 * Writes the `rows` cumulative row offsets (cm) into `out`.
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum CrStatus cr_perspective_offsets(double width_cm,
                                     size_t rows,
                                     double w0_cm,
                                     double *out,
                                     size_t out_len);

/**
 * Builds a court(cm) -> image(px) homography from 9 row-major values.
 *
 * # Safety
 * `m` must point to 9 readable doubles; `out` must be writable.
 */
enum CrStatus cr_homography_from_array(const double *m, struct CrHomography **out);

/**
 * Writes the normalized matrix as 9 row-major values.
 *
 * # Safety
 * `h` must be a live handle; `out` must point to 9 writable doubles.
 */
enum CrStatus cr_homography_to_array(const struct CrHomography *h, double *out);

/**
 * Maps a court point (cm) to the image (px).
 *
 * # Safety
 * `h` must be a live handle; `out_xy` must point to 2 writable doubles.
 */
enum CrStatus cr_homography_apply(const struct CrHomography *h, double x, double y, double *out_xy);

/**
 * Maps an image point (px) to the court (cm).
 *
 * # Safety
 * `h` must be a live handle; `out_xy` must point to 2 writable doubles.
 */
enum CrStatus cr_homography_apply_inverse(const struct CrHomography *h,
                                          double x,
                                          double y,
                                          double *out_xy);

/**
 * Default degeneracy check on a 960x540 frame.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum CrStatus cr_homography_is_degenerate(const struct CrHomography *h, bool *out);

/**
 * # Safety
 * `h` must be NULL or a handle not yet freed.
 */
void cr_homography_free(struct CrHomography *h);

/**
 * Copies a channel-major `classes x height x width` score buffer.
 *
 * # Safety
 * `scores` must point to `classes * height * width` readable floats;
 * `out` must be writable.
 */
enum CrStatus cr_heatmap_from_buffer(const float *scores,
                                     size_t classes,
                                     size_t height,
                                     size_t width,
                                     size_t stride,
                                     struct CrHeatmap **out);

/**
 * Reads a tensor file; label maps are expanded to one-hot scores over
 * `classes` channels.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CrStatus cr_heatmap_read_file(const char *path,
                                   size_t classes,
                                   size_t stride,
                                   struct CrHeatmap **out);

/**
 * # Safety
 * `t` must be NULL or a handle not yet freed.
 */
void cr_heatmap_free(struct CrHeatmap *t);

struct CrEstimateConfig cr_estimate_config_default(void);

/**
 * Registers one frame. `cfg` may be NULL for defaults. On success
 * `*out_h` receives a new homography handle (the fallback's copy when
 * estimation fell back) and `*out` the summary.
 *
 * # Safety
 * Handles must be live; `out` and `out_h` must be writable.
 */
enum CrStatus cr_estimate_frame(const struct CrHeatmap *heatmap,
                                const struct CrLayout *layout,
                                const struct CrEstimateConfig *cfg,
                                const struct CrHomography *fallback,
                                struct CrRegistration *out,
                                struct CrHomography **out_h);

/**
 * RMS court distance (cm) between the two homographies over the six frame
 * probes; `+inf` when a probe maps to infinity.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CrStatus cr_frame_error(const struct CrHomography *gt,
                             const struct CrHomography *est,
                             size_t frame_w,
                             size_t frame_h,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COURTREG_H */
