#ifndef COVERTRAIN_H
#define COVERTRAIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  CT_CONCAVE_IDENTITY = 0,
  CT_CONCAVE_SQRT = 1,
  CT_CONCAVE_LOG1P = 2,
} CtConcave;

typedef enum {
  CT_METHOD_SVM = 0,
  CT_METHOD_LSVM = 1,
  CT_METHOD_SLSVM = 2,
} CtMethod;

typedef enum {
  CT_INIT_COVER = 0,
  CT_INIT_BAGAVG = 1,
  CT_INIT_NEGMINE = 2,
} CtInit;

typedef enum {
  CT_LOSS_HINGE = 0,
  CT_LOSS_SQUARED_HINGE = 1,
  CT_LOSS_LOGISTIC = 2,
} CtLoss;

typedef enum {
  CT_OMEGA_EUCLIDEAN = 0,
  CT_OMEGA_ENTROPY = 1,
} CtOmega;

typedef enum {
  CT_STATUS_OK = 0,
  CT_STATUS_USAGE = 1,
  CT_STATUS_DATA = 2,
  CT_STATUS_NUMERICAL = 3,
  CT_STATUS_NULL_POINTER = 4,
  CT_STATUS_PANIC = 5,
} CtStatus;

typedef enum {
  CT_FORMAT_DENSE_CSV = 0,
  CT_FORMAT_SPARSE_BAG = 1,
} CtFormat;

typedef struct CtCover CtCover;

typedef struct CtDataset CtDataset;

typedef struct CtModel CtModel;

typedef struct {
  uintptr_t k;
  uint32_t t;
  double alpha;
  CtConcave g;
  uintptr_t n_clusters;
} CtCoverOptions;

typedef struct {
  uintptr_t n_pos;
  uintptr_t n_neg;
  uintptr_t bag_size;
  uintptr_t dim;
  double signal_sep;
  double clutter_sep;
  uint64_t seed;
} CtSynthOptions;

typedef struct {
  CtMethod method;
  CtInit init;
  CtCoverOptions cover;
  double c;
  /*
   Loss of the latent SVM and the initial classifier.
   */
  CtLoss loss;
  bool use_bias;
  uintptr_t max_outer;
  double outer_tol;
  double mu;
  /*
   0 evaluates every instance.
   */
  uintptr_t n_top;
  CtOmega omega;
  /*
   Must be smooth.
   */
  CtLoss smooth_loss;
  uintptr_t memory;
  double grad_tol;
  uintptr_t max_iters;
} CtTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *ct_last_error(void);

CtCoverOptions ct_cover_options_default(void);

CtSynthOptions ct_synth_options_default(void);

CtTrainOptions ct_train_options_default(void);

/*
 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
CtStatus ct_dataset_load(const char *path_, CtFormat format, CtDataset **out);

/*
 # Safety
 `opts` must be readable and `out` writable.
 */
CtStatus ct_dataset_synth(const CtSynthOptions *opts, CtDataset **out);

/*
 Writes a new standardized copy of `ds` to `out`.

 # Safety
 `ds` must be a live handle and `out` writable.
 */
CtStatus ct_dataset_standardize(const CtDataset *ds, CtDataset **out);

/*
 # Safety
 `ds` must be null or a handle not yet freed.
 */
void ct_dataset_free(CtDataset *ds);

/*
 Dimension, bag count and instance count. Any output may be null.

 # Safety
 `ds` must be a live handle; non-null outputs must be writable.
 */
CtStatus ct_dataset_shape(const CtDataset *ds,
                          uintptr_t *dim,
                          uintptr_t *n_bags,
                          uintptr_t *n_instances);

/*
 Builds the neighbor graph, runs the greedy cover and extracts clusters.

 # Safety
 `ds` must be a live handle, `opts` readable and `out` writable.
 */
CtStatus ct_cover_run(const CtDataset *ds, const CtCoverOptions *opts, CtCover **out);

/*
 # Safety
 `cover` must be null or a handle not yet freed.
 */
void ct_cover_free(CtCover *cover);

/*
 Final and total objective values.

 # Safety
 `cover` must be a live handle; outputs writable.
 */
CtStatus ct_cover_objective(const CtCover *cover, double *f_final, double *f_total);

/*
 # Safety
 `cover` must be a live handle and `out` writable.
 */
CtStatus ct_cover_n_selected(const CtCover *cover, uintptr_t *out);

/*
 The `i`-th selected instance in selection order.

 # Safety
 `cover` must be a live handle; outputs writable.
 */
CtStatus ct_cover_selected(const CtCover *cover,
                           uintptr_t i,
                           uint64_t *bag_id,
                           uintptr_t *instance_id);

/*
 # Safety
 `cover` must be a live handle and `out` writable.
 */
CtStatus ct_cover_n_positives(const CtCover *cover, uintptr_t *out);

/*
 The `i`-th extracted positive, ascending by (bag id, instance id).

 # Safety
 `cover` must be a live handle; outputs writable.
 */
CtStatus ct_cover_positive(const CtCover *cover,
                           uintptr_t i,
                           uint64_t *bag_id,
                           uintptr_t *instance_id);

/*
 Euclidean projection of `v` onto the probability simplex.

 # Safety
 `v` and `out` must each hold `len` doubles; they may alias.
 */
CtStatus ct_project_simplex(const double *v, uintptr_t len, double *out);

/*
 Smoothed maximum of `scores`. `weights` may be null; otherwise it receives
 the `len` maximizing weights.

 # Safety
 `scores` must hold `len` doubles, `value` be writable and `weights` null
 or writable for `len` doubles.
 */
CtStatus ct_smoothed_max(const double *scores,
                         uintptr_t len,
                         double mu,
                         CtOmega omega,
                         double *value,
                         double *weights);

/*
 # Safety
 `ds` must be a live handle, `opts` readable and `out` writable.
 */
CtStatus ct_train(const CtDataset *ds, const CtTrainOptions *opts, CtModel **out);

/*
 Bag label (+1 or -1), best instance id and its score for bag index `bag`.
 Any output may be null.

 # Safety
 `model` and `ds` must be live handles; non-null outputs writable.
 */
CtStatus ct_model_decision(const CtModel *model,
                           const CtDataset *ds,
                           uintptr_t bag,
                           int32_t *label,
                           uintptr_t *argmax,
                           double *score);

/*
 Bag-level accuracy in percent.

 # Safety
 `model` and `ds` must be live handles and `out` writable.
 */
CtStatus ct_model_accuracy(const CtModel *model, const CtDataset *ds, double *out);

/*
 Feature dimension and whether the model has a bias term.

 # Safety
 `model` must be a live handle; outputs writable.
 */
CtStatus ct_model_shape(const CtModel *model, uintptr_t *dim, bool *has_bias);

/*
 Copies `w` followed by the bias (when present) into `out`, which must hold
 `len` doubles with `len` equal to dim plus one if biased.

 # Safety
 `model` must be a live handle and `out` writable for `len` doubles.
 */
CtStatus ct_model_params(const CtModel *model, double *out, uintptr_t len);

/*
 # Safety
 `model` must be a live handle and `path` a NUL-terminated string.
 */
CtStatus ct_model_save(const CtModel *model, const char *path_);

/*
 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
CtStatus ct_model_load(const char *path_, CtModel **out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void ct_model_free(CtModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVERTRAIN_H */
