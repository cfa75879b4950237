#ifndef NBANDIT_H
#define NBANDIT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum NbStatus {
  NB_STATUS_OK = 0,
  NB_STATUS_NULL_POINTER = 1,
  NB_STATUS_INVALID_ARGUMENT = 2,
  NB_STATUS_DIMENSION_MISMATCH = 3,
  NB_STATUS_EMPTY_INDEX = 4,
  NB_STATUS_IO = 5,
  NB_STATUS_FORMAT = 6,
  NB_STATUS_NUMERICAL = 7,
  NB_STATUS_PANIC = 8,
} NbStatus;

// A trained arm generator.
typedef struct NbGenerator NbGenerator;

// An HNSW index over arm embeddings.
typedef struct NbIndex NbIndex;

// A trained reward model.
typedef struct NbModel NbModel;

typedef struct NbIndexParams {
  uintptr_t m;
  uintptr_t ef_construction;
  uintptr_t ef_search;
  uint64_t seed;
} NbIndexParams;

typedef struct NbSelection {
  uint64_t arm_id;
  double score;
} NbSelection;

typedef struct NbAscentParams {
  uintptr_t runs;
  uintptr_t iterations;
  double step;
  // Early-stop threshold; values <= 0 disable it.
  double stop_threshold;
  bool project;
  uintptr_t k_snap;
} NbAscentParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *nb_last_error(void);

// Library version as a static NUL-terminated string.
const char *nb_version(void);

// Loads a reward model from an `MLPB` container.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum NbStatus nb_model_load(const char *path, struct NbModel **out);

// # Safety
// `model` must come from [`nb_model_load`] and `out` be writable.
enum NbStatus nb_model_input_dim(const struct NbModel *model, uintptr_t *out);

// Expectation-mode (no dropout) prediction for one input row.
//
// # Safety
// `input` must hold `len` doubles and `out` be writable.
enum NbStatus nb_model_predict(const struct NbModel *model,
                               const double *input,
                               uintptr_t len,
                               double *out);

// # Safety
// `model` must come from [`nb_model_load`] and not be used afterwards. Null
// is ignored.
void nb_model_free(struct NbModel *model);

// Loads the generator stored as a `GENB` section of a model container.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum NbStatus nb_generator_load(const char *path, struct NbGenerator **out);

// # Safety
// `gen` must come from [`nb_generator_load`] and not be used afterwards.
void nb_generator_free(struct NbGenerator *gen);

struct NbIndexParams nb_index_default_params(void);

// Builds an index over `n` arms; `vectors` is row-major `n × dim`.
//
// # Safety
// `ids` must hold `n` values, `vectors` `n * dim` doubles; `params` may be
// null for defaults; `out` must be writable.
enum NbStatus nb_index_build(const uint64_t *ids,
                             const double *vectors,
                             uintptr_t n,
                             uintptr_t dim,
                             const struct NbIndexParams *params,
                             struct NbIndex **out);

// # Safety
// `index` must come from [`nb_index_build`] and `out` be writable.
enum NbStatus nb_index_len(const struct NbIndex *index, uintptr_t *out);

// Up to `k` approximate nearest arms of `query`, nearest first. Writes the
// number of results to `out_len`.
//
// # Safety
// `query` must hold `dim` doubles; `out_ids` and `out_distances` must have
// room for `k` values.
enum NbStatus nb_index_query(const struct NbIndex *index,
                             const double *query,
                             uintptr_t dim,
                             uintptr_t k,
                             uint64_t *out_ids,
                             double *out_distances,
                             uintptr_t *out_len);

// # Safety
// `index` must come from [`nb_index_build`] and not be used afterwards.
void nb_index_free(struct NbIndex *index);

// Thompson-sampling selection over every arm in `index`: one dropout sample
// (rate `dropout`, seeded by `seed`) scores all arms; ties go to the lower id.
//
// # Safety
// `context` must hold `context_len` doubles and `out` be writable.
enum NbStatus nb_select_exhaust_ts(const struct NbModel *model,
                                   const struct NbIndex *index,
                                   const double *context,
                                   uintptr_t context_len,
                                   double dropout,
                                   uint64_t seed,
                                   struct NbSelection *out);

struct NbAscentParams nb_ascent_default_params(void);

// Thompson-sampling selection by multistart ascent snapped through `index`.
//
// # Safety
// As [`nb_select_exhaust_ts`]; `params` may be null for defaults.
enum NbStatus nb_select_fast_ts(const struct NbModel *model,
                                const struct NbIndex *index,
                                const double *context,
                                uintptr_t context_len,
                                const struct NbAscentParams *params,
                                double dropout,
                                uint64_t seed,
                                struct NbSelection *out);

// Thompson-sampling selection through the generator: one generated
// embedding, its `top_k` nearest arms, the best of those under the sample.
//
// # Safety
// As [`nb_select_exhaust_ts`].
enum NbStatus nb_select_gan_ts(const struct NbModel *model,
                               const struct NbGenerator *gen,
                               const struct NbIndex *index,
                               const double *context,
                               uintptr_t context_len,
                               uintptr_t top_k,
                               double dropout,
                               uint64_t seed,
                               struct NbSelection *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NBANDIT_H */
