#ifndef NNPERC_H
#define NNPERC_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every entry point.
typedef enum NnpStatus {
  NNP_STATUS_OK = 0,
  NNP_STATUS_INVALID_PARAMETER = 1,
  NNP_STATUS_PRECONDITION = 2,
  NNP_STATUS_NOT_FOUND = 3,
  NNP_STATUS_GEOMETRY = 4,
  NNP_STATUS_NULL_POINTER = 5,
  NNP_STATUS_INTERNAL = 6,
} NnpStatus;

// Opaque k-NN graph.
typedef struct NnpGraph NnpGraph;

// Opaque point set.
typedef struct NnpPointSet NnpPointSet;

// Distortion summary of the observed component.
typedef struct NnpDistortion {
  double avg;
  double max;
  // Percentage of pairs with ratio <= 2.
  double pct_le_2;
  // Percentage of pairs with ratio <= twice the average.
  double pct_le_2x_avg;
  uint64_t pairs;
  // Vertices in the observed component.
  uint64_t observed;
  // Points inside the inner window.
  uint64_t inside;
} NnpDistortion;

// Outcome of the bound search. With `NNP_STATUS_NOT_FOUND` the fields hold
// the best triple seen instead.
typedef struct NnpBound {
  uint32_t k;
  double a;
  double p;
} NnpBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread (empty after a success).
// The pointer stays valid until the next call on the same thread.
const char *nnp_last_error(void);

// Poisson process of intensity `lambda` on `[xmin, xmax] x [ymin, ymax]`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum NnpStatus nnp_sample_poisson(double xmin,
                                  double ymin,
                                  double xmax,
                                  double ymax,
                                  double lambda,
                                  uint64_t seed,
                                  struct NnpPointSet **out);

// `n` independent uniform points on `[xmin, xmax] x [ymin, ymax]`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum NnpStatus nnp_sample_binomial(double xmin,
                                   double ymin,
                                   double xmax,
                                   double ymax,
                                   uintptr_t n,
                                   uint64_t seed,
                                   struct NnpPointSet **out);

// Number of points.
//
// # Safety
// `ps` must be a handle from a sampling function; `out` must be writable.
enum NnpStatus nnp_pointset_len(const struct NnpPointSet *ps, uintptr_t *out);

// Copies the coordinates into `xs` and `ys`, each with room for `cap`
// values. Fails with `NNP_STATUS_INVALID_PARAMETER` if `cap` is too small.
//
// # Safety
// `xs` and `ys` must point to at least `cap` writable doubles.
enum NnpStatus nnp_pointset_coords(const struct NnpPointSet *ps,
                                   double *xs,
                                   double *ys,
                                   uintptr_t cap);

// Releases a point set. Null is ignored.
//
// # Safety
// `ps` must be null or a handle not yet freed.
void nnp_pointset_free(struct NnpPointSet *ps);

// Undirected k-NN graph of a point set.
//
// # Safety
// `ps` must be a live handle; `out` must be writable.
enum NnpStatus nnp_graph_build(const struct NnpPointSet *ps, uintptr_t k, struct NnpGraph **out);

// Number of undirected edges.
//
// # Safety
// `g` must be a live handle; `out` must be writable.
enum NnpStatus nnp_graph_num_edges(const struct NnpGraph *g, uintptr_t *out);

// Copies edges (u < v, sorted) into `us`, `vs` and `lens`, each with room
// for `cap` entries.
//
// # Safety
// The three buffers must each hold at least `cap` writable elements.
enum NnpStatus nnp_graph_edges(const struct NnpGraph *g,
                               uint32_t *us,
                               uint32_t *vs,
                               double *lens,
                               uintptr_t cap);

// Releases a graph. Null is ignored.
//
// # Safety
// `g` must be null or a handle not yet freed.
void nnp_graph_free(struct NnpGraph *g);

// Distortion of the observed component in the centred inner window
// covering `inner_fraction` of each side. `full_mode` selects the
// full-graph observation instead of the induced one. `sample_pairs == 0`
// measures all pairs exactly; otherwise that many pairs are drawn with
// `seed`.
//
// # Safety
// `g` must be the graph built from `ps`; `out` must be writable.
enum NnpStatus nnp_distortion(const struct NnpGraph *g,
                              const struct NnpPointSet *ps,
                              double inner_fraction,
                              bool full_mode,
                              uintptr_t sample_pairs,
                              uint64_t seed,
                              struct NnpDistortion *out);

// P(Poisson(mu) <= k).
//
// # Safety
// `out` must be writable.
enum NnpStatus nnp_poisson_cdf(uint64_t k, double mu, double *out);

// Analytic probability that a tile of scale `a` is open for given `k` and
// intensity `lambda`.
//
// # Safety
// `out` must be writable.
enum NnpStatus nnp_prob_at(double a, uint32_t k, double lambda, double *out);

// Smallest k in `[k_min, k_max]` whose optimised tile probability exceeds
// `threshold`, with `a` searched over the default range.
//
// # Safety
// `out` must be writable.
enum NnpStatus nnp_min_k(double threshold,
                         double lambda,
                         uint32_t k_min,
                         uint32_t k_max,
                         struct NnpBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NNPERC_H */
