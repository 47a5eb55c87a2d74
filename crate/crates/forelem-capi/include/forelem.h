#ifndef FORELEM_H
#define FORELEM_H

/* Generated by cbindgen from forelem-capi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  FL_OK = 0,
  FL_INVALID_ARGUMENT = -1,
  FL_UNKNOWN_VARIANT = -2,
  FL_RUN_FAILED = -3,
  FL_NO_TERMINATION = -4,
  FL_BUFFER_TOO_SMALL = -5,
  FL_PANIC = -6,
} FlStatus;

/**
 * Opaque k-means problem handle.
 */
typedef struct FlKMeans FlKMeans;

/**
 * Opaque pagerank problem handle.
 */
typedef struct FlPageRank FlPageRank;

/**
 * Opaque run result: per-point assignments or per-vertex ranks plus
 * counters.
 */
typedef struct FlRun FlRun;

/**
 * Message for the most recent error on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *fl_last_error(void);

/**
 * Library version as a static string.
 */
const char *fl_version(void);

/**
 * Builds a k-means problem from `n * dim` row-major coordinates.
 * Returns null on invalid arguments.
 *
 * # Safety
 * `points` must point to `n * dim` readable doubles.
 */
FlKMeans *fl_kmeans_new(const double *points, size_t n, size_t dim, size_t k, uint64_t seed);

/**
 * A reassignment must improve the distance by more than `delta`.
 *
 * # Safety
 * `handle` must be null or a live [`fl_kmeans_new`] handle.
 */
void fl_kmeans_set_delta(FlKMeans *handle, double delta);

/**
 * # Safety
 * `handle` must come from [`fl_kmeans_new`] and not already be freed.
 */
void fl_kmeans_free(FlKMeans *handle);

/**
 * Builds a pagerank problem from parallel edge arrays. Self-loops are
 * dropped; vertices are `0..n_vertices`.
 *
 * # Safety
 * `src` and `dst` must each point to `n_edges` readable u32 values.
 */
FlPageRank *fl_pagerank_new(const uint32_t *src,
                            const uint32_t *dst,
                            size_t n_edges,
                            size_t n_vertices);

/**
 * # Safety
 * `handle` must be null or a live [`fl_pagerank_new`] handle.
 */
void fl_pagerank_set_epsilon(FlPageRank *handle, double epsilon);

/**
 * # Safety
 * `handle` must be null or a live [`fl_pagerank_new`] handle.
 */
void fl_pagerank_set_damping(FlPageRank *handle, double damping);

/**
 * # Safety
 * `handle` must come from [`fl_pagerank_new`] and not already be freed.
 */
void fl_pagerank_free(FlPageRank *handle);

/**
 * Runs a k-means variant to termination; on success `*out` owns the result.
 *
 * # Safety
 * `handle` must be a live [`fl_kmeans_new`] handle and `out` writable.
 */
FlStatus fl_kmeans_run(const FlKMeans *handle,
                       const char *variant,
                       uint32_t partitions,
                       uint32_t workers,
                       FlRun **out);

/**
 * Runs a pagerank variant to termination; on success `*out` owns the result.
 *
 * # Safety
 * `handle` must be a live [`fl_pagerank_new`] handle and `out` writable.
 */
FlStatus fl_pagerank_run(const FlPageRank *handle,
                         const char *variant,
                         uint32_t partitions,
                         uint32_t workers,
                         FlRun **out);

/**
 * Number of per-point / per-vertex entries in the result.
 *
 * # Safety
 * `run` must be null or a live result handle.
 */
size_t fl_run_len(const FlRun *run);

/**
 * Copies the rank vector into `out` (pagerank results only).
 *
 * # Safety
 * `out` must point to at least `cap` writable doubles.
 */
FlStatus fl_run_ranks(const FlRun *run, double *out, size_t cap);

/**
 * Copies the cluster assignments into `out` (k-means results only).
 *
 * # Safety
 * `out` must point to at least `cap` writable u64 values.
 */
FlStatus fl_run_assignments(const FlRun *run, uint64_t *out, size_t cap);

/**
 * # Safety
 * `run` must be null or a live result handle.
 */
double fl_run_calc_seconds(const FlRun *run);

/**
 * # Safety
 * `run` must be null or a live result handle.
 */
uint64_t fl_run_sweeps(const FlRun *run);

/**
 * # Safety
 * `run` must be null or a live result handle.
 */
uint64_t fl_run_state_changes(const FlRun *run);

/**
 * # Safety
 * `run` must come from a `fl_*_run` call and not already be freed.
 */
void fl_run_free(FlRun *run);

/**
 * Fills `out` with `n * dim` clustered coordinates (deterministic per seed).
 *
 * # Safety
 * `out` must point to `n * dim` writable doubles.
 */
FlStatus fl_generate_points(size_t n, size_t dim, size_t k, uint64_t seed, double *out);

/**
 * Generates a scale-free graph. Writes up to `cap` edges into the parallel
 * arrays and stores the true edge count in `*out_len`; call with `cap = 0`
 * to query the size first (the generator is deterministic per seed).
 *
 * # Safety
 * `out_src`/`out_dst` must hold `cap` writable u32 values; `out_len` must
 * be writable.
 */
FlStatus fl_generate_graph(uint32_t scale,
                           size_t edge_factor,
                           uint64_t seed,
                           uint32_t *out_src,
                           uint32_t *out_dst,
                           size_t cap,
                           size_t *out_len);

#endif  /* FORELEM_H */
