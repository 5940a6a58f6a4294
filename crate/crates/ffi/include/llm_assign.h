#ifndef LLM_ASSIGN_H
#define LLM_ASSIGN_H

/* Generated by cbindgen from the llm-assign-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LaStatus {
  LA_STATUS_OK = 0,
  LA_STATUS_NULL_POINTER = 1,
  LA_STATUS_INVALID_ARGUMENT = 2,
  LA_STATUS_SHAPE_MISMATCH = 3,
  LA_STATUS_INSTANCE_TOO_LARGE = 4,
  LA_STATUS_INDEX_OUT_OF_RANGE = 5,
  LA_STATUS_BUFFER_TOO_SMALL = 6,
  LA_STATUS_PANIC = 7,
} LaStatus;

/**
 * Mutually non-dominated solutions, ordered by ascending cost.
 */
typedef struct LaArchive LaArchive;

/**
 * A cost matrix paired with a prediction matrix of the same shape.
 */
typedef struct LaProblem LaProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a problem from `n` queries and `m` LLMs. Costs must be finite and
 * non-negative; predictions must lie in `[0, 1]`.
 *
 * # Safety
 * `costs` and `predictions` must point to `n * m` readable doubles and `out`
 * must be a valid pointer.
 */
enum LaStatus la_problem_new(size_t n,
                             size_t m,
                             const double *costs,
                             const double *predictions,
                             struct LaProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from [`la_problem_new`] not yet freed.
 */
void la_problem_free(struct LaProblem *problem);

/**
 * Runs the destruction/reconstruction search.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum LaStatus la_optimize(const struct LaProblem *problem,
                          size_t grid_n,
                          size_t max_iterations,
                          struct LaArchive **out);

/**
 * Runs the NSGA-II baseline with default crossover and mutation rates.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum LaStatus la_nsga2(const struct LaProblem *problem,
                       size_t population_size,
                       size_t generations,
                       uint64_t seed,
                       struct LaArchive **out);

/**
 * Number of solutions; 0 for a null handle.
 *
 * # Safety
 * `archive` must be null or a live handle.
 */
size_t la_archive_len(const struct LaArchive *archive);

/**
 * Cost and predicted accuracy of solution `index`.
 *
 * # Safety
 * `archive` must be a live handle; `cost` and `accuracy` valid pointers.
 */
enum LaStatus la_archive_objectives(const struct LaArchive *archive,
                                    size_t index,
                                    double *cost,
                                    double *accuracy);

/**
 * Copies the LLM index of every query in solution `index` into `buffer`,
 * which must hold at least `n` entries.
 *
 * # Safety
 * `archive` must be a live handle and `buffer` must point to `capacity`
 * writable entries.
 */
enum LaStatus la_archive_assignment(const struct LaArchive *archive,
                                    size_t index,
                                    size_t *buffer,
                                    size_t capacity);

/**
 * # Safety
 * `archive` must be null or a live handle.
 */
void la_archive_free(struct LaArchive *archive);

/**
 * Inverted generational distance of `obtained` against `reference`, both
 * given as `(cost, accuracy)` pairs.
 *
 * # Safety
 * The point arrays must hold `2 * count` readable doubles; `out` must be valid.
 */
enum LaStatus la_igd(const double *obtained,
                     size_t obtained_count,
                     const double *reference,
                     size_t reference_count,
                     double *out);

/**
 * Message for the last failed call on this thread, or null after a success.
 * The string stays valid until the next call into this library on the same thread.
 */
const char *la_last_error(void);

/**
 * Static name of a status code.
 */
const char *la_status_name(enum LaStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LLM_ASSIGN_H */
