#ifndef GLMCT_H
#define GLMCT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Beam kind codes accepted by [`glmct_geometry_new_circular`].
 */
#define GLMCT_BEAM_PARALLEL 0

#define GLMCT_BEAM_FAN 1

/**
 * Network kind codes.
 */
#define GLMCT_NET_GLM 0

#define GLMCT_NET_CNN 1

typedef enum GlmctStatus {
  GLMCT_STATUS_OK = 0,
  GLMCT_STATUS_NULL_POINTER = 1,
  GLMCT_STATUS_INVALID_ARGUMENT = 2,
  GLMCT_STATUS_GEOMETRY = 3,
  GLMCT_STATUS_GRAPH = 4,
  GLMCT_STATUS_SHAPE = 5,
  GLMCT_STATUS_NUMERIC = 6,
  GLMCT_STATUS_IO = 7,
  GLMCT_STATUS_FORMAT = 8,
  GLMCT_STATUS_BUFFER_TOO_SMALL = 9,
  GLMCT_STATUS_PANIC = 10,
} GlmctStatus;

typedef struct GlmctGeometry GlmctGeometry;

typedef struct GlmctGraph GlmctGraph;

typedef struct GlmctNetwork GlmctNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The
 * pointer stays valid until the next library call on the same thread.
 */
const char *glmct_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *glmct_version(void);

/**
 * Uniform full rotation. `orbit_radius` is ignored for parallel beam.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum GlmctStatus glmct_geometry_new_circular(size_t n_views,
                                             size_t detector_pixels,
                                             uint32_t beam,
                                             double orbit_radius,
                                             double detector_spacing,
                                             struct GlmctGeometry **out);

/**
 * Keeps every `factor`-th view.
 *
 * # Safety
 * `geometry` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_geometry_subsample(const struct GlmctGeometry *geometry,
                                          size_t factor,
                                          struct GlmctGeometry **out);

/**
 * # Safety
 * `geometry` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_geometry_n_views(const struct GlmctGeometry *geometry, size_t *out);

/**
 * Writes 1 for a uniformly sampled full rotation, else 0.
 *
 * # Safety
 * `geometry` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_geometry_full_rotation(const struct GlmctGeometry *geometry, uint8_t *out);

/**
 * Copies the source angles (radians) into `angles`, which must hold at
 * least `capacity` values.
 *
 * # Safety
 * `geometry` must be a live handle; `angles` must point to `capacity`
 * writable doubles.
 */
enum GlmctStatus glmct_geometry_angles(const struct GlmctGeometry *geometry,
                                       double *angles,
                                       size_t capacity);

/**
 * # Safety
 * `geometry` must be NULL or a handle not yet freed.
 */
void glmct_geometry_free(struct GlmctGeometry *geometry);

/**
 * Builds the neighbour graph of an acquisition geometry.
 *
 * # Safety
 * `geometry` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_graph_from_geometry(const struct GlmctGeometry *geometry,
                                           struct GlmctGraph **out);

/**
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_graph_node_count(const struct GlmctGraph *graph, size_t *out);

/**
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_graph_edge_count(const struct GlmctGraph *graph, size_t *out);

/**
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_graph_is_cyclic(const struct GlmctGraph *graph, uint8_t *out);

/**
 * Copies the edge list (`i < j`, sorted) into three parallel arrays of at
 * least `capacity` entries.
 *
 * # Safety
 * `graph` must be a live handle; each array must hold `capacity` writable
 * elements.
 */
enum GlmctStatus glmct_graph_edges(const struct GlmctGraph *graph,
                                   size_t *i,
                                   size_t *j,
                                   double *weight,
                                   size_t capacity);

/**
 * # Safety
 * `graph` must be NULL or a handle not yet freed.
 */
void glmct_graph_free(struct GlmctGraph *graph);

/**
 * Trainable parameters of a sinogram network.
 *
 * # Safety
 * `out` must be writable.
 */
enum GlmctStatus glmct_count_params(uint32_t kind,
                                    size_t channels,
                                    size_t kernel_size,
                                    size_t modules,
                                    uint64_t *out);

/**
 * Multiply-accumulate count of one module on an `n x p` sinogram.
 *
 * # Safety
 * `out` must be writable.
 */
enum GlmctStatus glmct_complexity_estimate(uint32_t kind,
                                           uint64_t n,
                                           uint64_t p,
                                           uint64_t s,
                                           uint64_t c_in,
                                           uint64_t c_out,
                                           uint64_t *out);

/**
 * Randomly initialised network with kernel size 7 and 3 modules.
 *
 * # Safety
 * `out` must be writable.
 */
enum GlmctStatus glmct_network_new(uint32_t kind,
                                   size_t channels,
                                   uint64_t seed,
                                   struct GlmctNetwork **out);

/**
 * Loads weights from a checkpoint written by the `train` command (the
 * sinogram network part) or one holding the network alone.
 *
 * # Safety
 * `network` must be a live handle; `path` a NUL-terminated UTF-8 string.
 */
enum GlmctStatus glmct_network_load(struct GlmctNetwork *network, const char *path);

/**
 * # Safety
 * `network` must be a live handle and `out` writable.
 */
enum GlmctStatus glmct_network_param_count(const struct GlmctNetwork *network, size_t *out);

/**
 * Applies the network to a row-major `n_views x pixels` sinogram. `graph`
 * is required for GLM networks and ignored (may be NULL) for CNNs.
 * `output` receives `n_views * pixels` values.
 *
 * # Safety
 * Handles must be live; `input` and `output` must each point to
 * `n_views * pixels` doubles.
 */
enum GlmctStatus glmct_network_forward(const struct GlmctNetwork *network,
                                       const struct GlmctGraph *graph,
                                       const double *input,
                                       size_t n_views,
                                       size_t pixels,
                                       double *output);

/**
 * # Safety
 * `network` must be NULL or a handle not yet freed.
 */
void glmct_network_free(struct GlmctNetwork *network);

/**
 * PSNR in dB of two row-major `h x w` images; `+inf` when identical.
 *
 * # Safety
 * `a` and `b` must point to `h * w` doubles; `out` must be writable.
 */
enum GlmctStatus glmct_psnr(const double *a,
                            const double *b,
                            size_t h,
                            size_t w,
                            double peak,
                            double *out);

/**
 * SSIM of two row-major `h x w` images after 8-bit min-max normalisation.
 *
 * # Safety
 * `a` and `b` must point to `h * w` doubles; `out` must be writable.
 */
enum GlmctStatus glmct_ssim(const double *a, const double *b, size_t h, size_t w, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLMCT_H */
