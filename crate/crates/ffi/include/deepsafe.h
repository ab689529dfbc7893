#ifndef DEEPSAFE_H
#define DEEPSAFE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  DS_METRIC_L1 = 1,
  DS_METRIC_L2 = 2,
} DsMetric;

typedef enum {
  DS_OUTCOME_SAFE = 0,
  DS_OUTCOME_UNSAFE = 1,
  DS_OUTCOME_RESOURCE_LIMIT = 2,
} DsOutcome;

/**
 * Result code of every fallible call.
 */
typedef enum {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_UTF8 = 2,
  DS_STATUS_IO = 3,
  DS_STATUS_PARSE = 4,
  DS_STATUS_INVALID_ARGUMENT = 5,
  DS_STATUS_DIMENSION_MISMATCH = 6,
  DS_STATUS_IMPURE_CLUSTERS = 7,
  DS_STATUS_SOLVER = 8,
  DS_STATUS_BUFFER_TOO_SMALL = 9,
  DS_STATUS_PANIC = 10,
} DsStatus;

typedef struct DsDataset DsDataset;

typedef struct DsNetwork DsNetwork;

typedef struct DsRegions DsRegions;

typedef struct {
  size_t id;
  size_t label;
  size_t member_count;
  size_t dimension;
  double r_max;
  double r_avg;
  /**
   * Positive infinity when `r_avg` is zero.
   */
  double density;
} DsRegionInfo;

/**
 * Per-query resource limits. A timeout of zero or less means the default.
 */
typedef struct {
  uint64_t max_splits;
  double timeout_secs;
} DsLimits;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *ds_last_error(void);

/**
 * Loads a network from a JSON file.
 */
DsStatus ds_network_load(const char *path, DsNetwork **out);

/**
 * Parses a network from JSON text.
 */
DsStatus ds_network_from_json(const char *json, DsNetwork **out);

void ds_network_free(DsNetwork *net);

/**
 * Input width, or 0 for a null handle.
 */
size_t ds_network_input_dim(const DsNetwork *net);

/**
 * Number of output labels, or 0 for a null handle.
 */
size_t ds_network_label_count(const DsNetwork *net);

/**
 * Writes the output scores for `x` into `scores`, which must hold at least
 * `ds_network_label_count` values.
 */
DsStatus ds_network_evaluate(const DsNetwork *net,
                             const double *x,
                             size_t x_len,
                             double *scores,
                             size_t scores_len);

/**
 * Highest-scoring label for `x`; ties go to the lowest index.
 */
DsStatus ds_network_predicted_label(const DsNetwork *net,
                                    const double *x,
                                    size_t x_len,
                                    size_t *out_label);

/**
 * Loads a CSV dataset. A negative `label_column` selects the last column.
 */
DsStatus ds_dataset_load(const char *path, bool header, int64_t label_column, DsDataset **out);

void ds_dataset_free(DsDataset *ds);

size_t ds_dataset_len(const DsDataset *ds);

size_t ds_dataset_dimension(const DsDataset *ds);

/**
 * Label-guided clustering with default iteration and depth limits.
 */
DsStatus ds_cluster(const DsDataset *ds, DsMetric metric, uint64_t seed, DsRegions **out);

void ds_regions_free(DsRegions *regions);

size_t ds_regions_len(const DsRegions *regions);

/**
 * Summary of the region at position `index` (regions are ordered by id).
 */
DsStatus ds_region_info(const DsRegions *regions, size_t index, DsRegionInfo *out);

DsStatus ds_region_centroid(const DsRegions *regions, size_t index, double *buf, size_t buf_len);

/**
 * Decides whether some input within L1 distance `radius` of `center` scores
 * `target` at least as high as `label`. `limits` may be null for defaults.
 * On `DS_OUTCOME_UNSAFE` the witness is copied to `witness` when that
 * pointer is non-null.
 */
DsStatus ds_decide(const DsNetwork *net,
                   const double *center,
                   size_t center_len,
                   double radius,
                   size_t label,
                   size_t target,
                   const DsLimits *limits,
                   DsOutcome *out_outcome,
                   double *witness,
                   size_t witness_len);

/**
 * Radius of the slice that pins `dims[i]` to `values[i]` through an L2 ball
 * of radius `r`. Sets `out_nonempty` to false when the plane misses the ball.
 */
DsStatus ds_slice_radius(double r,
                         const double *center,
                         size_t center_len,
                         const size_t *dims,
                         const double *values,
                         size_t n_fixed,
                         double *out_radius,
                         bool *out_nonempty);

/**
 * Runs clustering, planning and verification with default settings and
 * `jobs` worker threads (0 for every core). Artifacts are written to
 * `out_dir` unless it is null. `out_exit_code` receives 0, 1 or 2 as the
 * command-line tool would return.
 */
DsStatus ds_pipeline_run(const DsNetwork *net,
                         const DsDataset *ds,
                         const char *out_dir,
                         size_t jobs,
                         int32_t *out_exit_code);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DEEPSAFE_H */
