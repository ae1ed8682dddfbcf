#ifndef QUORUM_H
#define QUORUM_H

/* Generated by cbindgen from quorum-capi; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status code returned by every fallible entry point.
 */
typedef enum {
  QU_OK = 0,
  QU_ERR_INVALID_ARGUMENT = 1,
  QU_ERR_SAMPLING_FAILED = 2,
  QU_ERR_BUDGET_EXCEEDED = 3,
  QU_ERR_PARSE = 4,
  QU_ERR_IO = 5,
  QU_ERR_INSUFFICIENT_DATA = 6,
  QU_ERR_PANIC = 7,
  QU_ERR_NULL_POINTER = 8,
  QU_ERR_BAD_UTF8 = 9,
} qu_status;

/*
 A simple r-regular graph (opaque).
 */
typedef struct QuGraph QuGraph;

/*
 A recorded trajectory of occupied counts (opaque).
 */
typedef struct QuTrajectory QuTrajectory;

/*
 Subset statistics in the vertex-count view; see the core crate for the
 meaning of each field.
 */
typedef struct {
  uint64_t m;
  uint64_t star1;
  uint64_t star2;
  uint64_t boundary;
  uint64_t cross_edges;
  uint64_t u0;
  uint64_t u1;
  /*
   Vertices with fewer than two neighbors outside the subset.
   */
  uint64_t blocked;
} qu_subset_stats;

/*
 Parameters for qu_run.
 */
typedef struct {
  double p;
  /*
   Occupation threshold (number of occupied neighbors required).
   */
  uint32_t theta;
  uint64_t seed;
  uint64_t t_max;
  /*
   Stop once density falls below this value; pass a negative number to
   disable early stopping.
   */
  double stop_below;
  /*
   Initial occupied density in [0, 1]; pass a negative number to start
   from the fully occupied configuration.
   */
  double init_density;
} qu_run_params;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread; empty string if none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *qu_last_error(void);

/*
 Sample a uniform simple r-regular graph.

 # Safety
 `out` must point to writable storage for one pointer.
 */
qu_status qu_graph_generate(uint32_t n,
                            uint32_t r,
                            uint64_t seed,
                            uint64_t max_attempts,
                            QuGraph **out);

/*
 Load a graph from the text format written by `qu_graph_write`.

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
qu_status qu_graph_read(const char *path, QuGraph **out);

/*
 Write the graph to a file.

 # Safety
 `g` must be a live handle and `path` a NUL-terminated string.
 */
qu_status qu_graph_write(const QuGraph *g, const char *path);

/*
 Number of vertices; 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
uint32_t qu_graph_n(const QuGraph *g);

/*
 Degree; 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
uint32_t qu_graph_r(const QuGraph *g);

/*
 Seed the graph was sampled with; 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
uint64_t qu_graph_seed(const QuGraph *g);

/*
 Copy the sorted neighbor list of `v` into `out`.

 # Safety
 `out` must have room for `qu_graph_r(g)` entries.
 */
qu_status qu_graph_neighbors(const QuGraph *g, uint32_t v, uint32_t *out);

/*
 Expansion and blocked-set statistics of a vertex subset.

 # Safety
 `subset` must point to `len` vertex ids and `out` to writable storage.
 */
qu_status qu_graph_subset_stats(const QuGraph *g,
                                const uint32_t *subset,
                                size_t len,
                                qu_subset_stats *out);

/*
 Release a graph handle. Null is a no-op.

 # Safety
 `g` must be null or a handle obtained from this library, not yet freed.
 */
void qu_graph_free(QuGraph *g);

/*
 Run the process on `g` and return the recorded trajectory.

 # Safety
 `g` and `params` must be live, `out` writable.
 */
qu_status qu_run(const QuGraph *g, const qu_run_params *params, QuTrajectory **out);

/*
 Number of recorded counts (steps taken plus one); 0 for a null handle.

 # Safety
 `t` must be null or a live handle.
 */
uint64_t qu_trajectory_len(const QuTrajectory *t);

/*
 Occupied count after step `i`.

 # Safety
 `t` must be live and `out` writable.
 */
qu_status qu_trajectory_count(const QuTrajectory *t, uint64_t i, uint64_t *out);

/*
 Occupied density at the last recorded step; NaN for a null handle.

 # Safety
 `t` must be null or a live handle.
 */
double qu_trajectory_final_density(const QuTrajectory *t);

/*
 Extinction time, written as -1 when the process was still alive at the end.

 # Safety
 `t` must be live and `out` writable.
 */
qu_status qu_trajectory_extinction_time(const QuTrajectory *t, int64_t *out);

/*
 1 if the run reached t_max above the stop threshold, 0 if not, -1 on null.

 # Safety
 `t` must be null or a live handle.
 */
int32_t qu_trajectory_survived(const QuTrajectory *t);

/*
 Release a trajectory handle. Null is a no-op.

 # Safety
 `t` must be null or a handle obtained from this library, not yet freed.
 */
void qu_trajectory_free(QuTrajectory *t);

/*
 Expansion margin eta for infection probability p.

 # Safety
 `out` must be writable.
 */
qu_status qu_eta_of_p(double p, double *out);

/*
 Extinction-horizon constant C0 for (p, r).

 # Safety
 `out` must be writable.
 */
qu_status qu_horizon_c0(double p, uint32_t r, double *out);

/*
 Positive root of exp(-u b) = 1 - (u - eta) b.

 # Safety
 `out` must be writable.
 */
qu_status qu_beta_root(double u, double eta, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUORUM_H */
