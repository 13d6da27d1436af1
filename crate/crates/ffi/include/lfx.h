#ifndef LFX_H
#define LFX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LfxStatus {
  LFX_STATUS_OK = 0,
  LFX_STATUS_NULL_POINTER = 1,
  LFX_STATUS_INVALID_ARGUMENT = 2,
  LFX_STATUS_MISSING_FILE = 3,
  LFX_STATUS_UNSUPPORTED_FORMAT = 4,
  LFX_STATUS_DIMENSION_MISMATCH = 5,
  LFX_STATUS_NON_FINITE_VALUES = 6,
  LFX_STATUS_EMPTY_MASK = 7,
  LFX_STATUS_IO = 8,
  LFX_STATUS_INTERNAL = 9,
} LfxStatus;

/**
 * Owned disparity map.
 */
typedef struct LfxDisparity LfxDisparity;

/**
 * Owned image (1 or 3 channels, row-major, channel-last, `f64`).
 */
typedef struct LfxImage LfxImage;

/**
 * Owned validity mask.
 */
typedef struct LfxMask LfxMask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *lfx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lfx_version(void);

/**
 * Copies `width * height * channels` values from `data`.
 *
 * # Safety
 * `data` must point to that many readable `double`s; `out` must be writable.
 */
enum LfxStatus lfx_image_new(size_t width,
                             size_t height,
                             size_t channels,
                             const double *data,
                             struct LfxImage **out);

/**
 * Loads an 8/16-bit gray or RGB PNG scaled to `[0, 1]`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LfxStatus lfx_image_load(const char *path, struct LfxImage **out);

/**
 * Saves as PNG, 16-bit if `sixteen_bit`, clamping to `[0, 1]`.
 *
 * # Safety
 * `image` must be a live handle and `path` a NUL-terminated string.
 */
enum LfxStatus lfx_image_save(const struct LfxImage *image, const char *path, bool sixteen_bit);

/**
 * Writes the image as an `LFT1` tensor of shape (height, width, channels).
 *
 * # Safety
 * `image` must be a live handle and `path` a NUL-terminated string.
 */
enum LfxStatus lfx_image_write_tensor(const struct LfxImage *image, const char *path);

/**
 * # Safety
 * `image` must be a live handle or NULL (then 0 is returned).
 */
size_t lfx_image_width(const struct LfxImage *image);

/**
 * # Safety
 * `image` must be a live handle or NULL (then 0 is returned).
 */
size_t lfx_image_height(const struct LfxImage *image);

/**
 * # Safety
 * `image` must be a live handle or NULL (then 0 is returned).
 */
size_t lfx_image_channels(const struct LfxImage *image);

/**
 * Copies pixel data into `dst`; `len` must equal width * height * channels.
 *
 * # Safety
 * `image` must be a live handle; `dst` must hold `len` writable `double`s.
 */
enum LfxStatus lfx_image_copy_data(const struct LfxImage *image, double *dst, size_t len);

/**
 * # Safety
 * `image` must come from this library and not be used afterwards. NULL is
 * ignored.
 */
void lfx_image_free(struct LfxImage *image);

/**
 * Copies `width * height` values from `data`.
 *
 * # Safety
 * `data` must point to that many readable `double`s; `out` must be writable.
 */
enum LfxStatus lfx_disparity_new(size_t width,
                                 size_t height,
                                 const double *data,
                                 struct LfxDisparity **out);

/**
 * Loads a single-channel PFM disparity map.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LfxStatus lfx_disparity_load(const char *path, struct LfxDisparity **out);

/**
 * # Safety
 * `disparity` must come from this library and not be used afterwards.
 * NULL is ignored.
 */
void lfx_disparity_free(struct LfxDisparity *disparity);

/**
 * Number of set pixels.
 *
 * # Safety
 * `mask` must be a live handle or NULL (then 0 is returned).
 */
size_t lfx_mask_count(const struct LfxMask *mask);

/**
 * Copies the mask as 0/1 bytes; `len` must equal width * height.
 *
 * # Safety
 * `mask` must be a live handle; `dst` must hold `len` writable bytes.
 */
enum LfxStatus lfx_mask_copy(const struct LfxMask *mask, uint8_t *dst, size_t len);

/**
 * # Safety
 * `mask` must come from this library and not be used afterwards. NULL is
 * ignored.
 */
void lfx_mask_free(struct LfxMask *mask);

/**
 * Layered render of `image` moved by `shift` views, using `layers`
 * disparity layers. Both outputs are new handles.
 *
 * # Safety
 * Handles must be live; `out_image` and `out_mask` must be writable.
 */
enum LfxStatus lfx_sdr_render(const struct LfxImage *image,
                              const struct LfxDisparity *disparity,
                              double shift,
                              size_t layers,
                              struct LfxImage **out_image,
                              struct LfxMask **out_mask);

/**
 * PSNR in dB (capped at 99), restricted to `mask` unless it is NULL.
 *
 * # Safety
 * `a` and `b` must be live handles, `mask` live or NULL, `out` writable.
 */
enum LfxStatus lfx_psnr(const struct LfxImage *a,
                        const struct LfxImage *b,
                        const struct LfxMask *mask,
                        double *out);

/**
 * Mean SSIM of the channel-mean grey images.
 *
 * # Safety
 * `a` and `b` must be live handles and `out` writable.
 */
enum LfxStatus lfx_ssim(const struct LfxImage *a, const struct LfxImage *b, double *out);

/**
 * Max-label dilation of a `width * height` label map (0 = ambiguous) into
 * `out`. `converged` (may be NULL) reports whether no zeros remain.
 *
 * # Safety
 * `labels` must hold `width * height` readable values and `out` as many
 * writable ones.
 */
enum LfxStatus lfx_dilate_fill(const uint16_t *labels,
                               size_t width,
                               size_t height,
                               size_t layer_count,
                               size_t window,
                               size_t max_iters,
                               uint16_t *out,
                               bool *converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFX_H */
