/*
 * C interface to the document-vector recurrent language model library.
 *
 * All objects are opaque handles created and released through this API.
 * Functions that can fail return a dvr_status; on failure a description of
 * the most recent error on the calling thread is available from
 * dvr_last_error().
 */
#ifndef DVRNN_DVRNN_H
#define DVRNN_DVRNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(DVR_BUILDING_LIBRARY)
#define DVR_API __attribute__((visibility("default")))
#else
#define DVR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dvr_status {
  DVR_OK = 0,
  DVR_ERR_INVALID_ARGUMENT = 1,
  DVR_ERR_IO = 2,
  DVR_ERR_BAD_MAGIC = 3,
  DVR_ERR_UNSUPPORTED_VERSION = 4,
  DVR_ERR_TRUNCATED = 5,
  DVR_ERR_DIMENSION_MISMATCH = 6,
  DVR_ERR_VOCAB_MISMATCH = 7,
  DVR_ERR_NO_DOC_VECTOR = 8,
  DVR_ERR_NON_FINITE = 9,
  DVR_ERR_DIVERGED = 10,
  DVR_ERR_CONFIG = 11,
  DVR_ERR_INTERNAL = 99
} dvr_status;

typedef struct dvr_vocab dvr_vocab;
typedef struct dvr_dataset dvr_dataset;
typedef struct dvr_model dvr_model;
typedef struct dvr_vectors dvr_vectors;

DVR_API const char* dvr_status_name(dvr_status status);
/* Message for the last failure on this thread; "" if none. */
DVR_API const char* dvr_last_error(void);

/* ---- vocabulary ------------------------------------------------------- */

/* Build from a corpus file (one sentence per line, whitespace tokens). */
DVR_API dvr_status dvr_vocab_build(const char* corpus_path, uint32_t min_count,
                                   uint32_t num_classes, int lowercase, dvr_vocab** out);
DVR_API dvr_status dvr_vocab_load(const char* path, dvr_vocab** out);
DVR_API dvr_status dvr_vocab_save(const dvr_vocab* vocab, const char* path);
DVR_API void dvr_vocab_free(dvr_vocab* vocab);

DVR_API uint32_t dvr_vocab_size(const dvr_vocab* vocab);
DVR_API uint32_t dvr_vocab_num_classes(const dvr_vocab* vocab);
/* E[O]: frequency-weighted expected size of the target word's class. */
DVR_API dvr_status dvr_vocab_expected_class_size(const dvr_vocab* vocab, double* out);

/* ---- datasets --------------------------------------------------------- */

/* Reads an encoded dataset file, or raw corpus text encoded with vocab. */
DVR_API dvr_status dvr_dataset_load(const dvr_vocab* vocab, const char* path, int lowercase,
                                    dvr_dataset** out);
DVR_API dvr_status dvr_dataset_save_encoded(const dvr_dataset* dataset, const char* path);
DVR_API void dvr_dataset_free(dvr_dataset* dataset);

DVR_API size_t dvr_dataset_num_sentences(const dvr_dataset* dataset);
/* Scorable tokens: every token after a sentence start, end tokens included. */
DVR_API size_t dvr_dataset_num_tokens(const dvr_dataset* dataset);
/* Writes the space-joined words of a sentence (boundary tokens omitted) into
 * buf. *needed receives the length including the terminating NUL. */
DVR_API dvr_status dvr_dataset_sentence_text(const dvr_dataset* dataset, const dvr_vocab* vocab,
                                             size_t index, char* buf, size_t buf_len,
                                             size_t* needed);

DVR_API dvr_status dvr_shuffle_lines(const char* in_path, const char* out_path, uint64_t seed);

/* ---- models ----------------------------------------------------------- */

typedef struct dvr_dims {
  uint32_t hidden;  /* M */
  uint32_t doc;     /* D, 0 for no document vector */
  uint32_t vocab;   /* V */
  uint32_t classes; /* C */
} dvr_dims;

/* Uniform initialisation in [-init_scale, init_scale]. The vocabulary is copied. */
DVR_API dvr_status dvr_model_create(const dvr_vocab* vocab, uint32_t hidden, uint32_t doc,
                                    uint64_t seed, double init_scale, dvr_model** out);
DVR_API dvr_status dvr_model_load(const char* path, dvr_model** out);
DVR_API dvr_status dvr_model_save(const dvr_model* model, const char* path);
DVR_API void dvr_model_free(dvr_model* model);

DVR_API dvr_dims dvr_model_dims(const dvr_model* model);
DVR_API uint64_t dvr_model_parameter_count(const dvr_model* model);
/* Borrowed; valid while the model lives. */
DVR_API const dvr_vocab* dvr_model_vocab(const dvr_model* model);

/* ---- training --------------------------------------------------------- */

typedef struct dvr_train_config {
  double learning_rate;      /* initial general rate, decayed */
  double doc_learning_rate;  /* online document-vector rate, fixed */
  double lr_decay_factor;
  double decay_trigger;      /* minimum relative dev improvement */
  uint32_t max_epochs;
  int use_gradient_clip;
  double gradient_clip;
  uint32_t threads;          /* dev evaluation */
} dvr_train_config;

typedef struct dvr_epoch_report {
  uint32_t epoch;
  double train_ppl;
  double dev_ppl;
  double learning_rate;
} dvr_epoch_report;

typedef void (*dvr_epoch_callback)(const dvr_epoch_report* report, void* user_data);

DVR_API void dvr_train_config_init(dvr_train_config* cfg);

/* Trains in place; on success the model holds the best-dev parameters. */
DVR_API dvr_status dvr_model_train(dvr_model* model, const dvr_dataset* train,
                                   const dvr_dataset* dev, const dvr_train_config* cfg,
                                   dvr_epoch_callback on_epoch, void* user_data);

/* ---- evaluation ------------------------------------------------------- */

typedef struct dvr_eval_report {
  double total_nll;
  uint64_t tokens;
  double perplexity;
} dvr_eval_report;

/* sentence_nll may be NULL; otherwise it must hold one entry per sentence. */
DVR_API dvr_status dvr_model_evaluate(const dvr_model* model, const dvr_dataset* dataset,
                                      int online, double doc_lr, uint32_t threads,
                                      dvr_eval_report* report, double* sentence_nll);

/* Final document vector of every sentence. */
DVR_API dvr_status dvr_sentence_vectors(const dvr_model* model, const dvr_dataset* dataset,
                                        double doc_lr, dvr_vectors** out);
DVR_API void dvr_vectors_free(dvr_vectors* vectors);
DVR_API size_t dvr_vectors_count(const dvr_vectors* vectors);
DVR_API uint32_t dvr_vectors_dim(const dvr_vectors* vectors);
DVR_API const double* dvr_vectors_row(const dvr_vectors* vectors, size_t index);

/* Top-k cosine neighbours of `query`, query excluded, ties by index.
 * indices/similarities must hold k entries; *found receives the count. */
DVR_API dvr_status dvr_vectors_nearest(const dvr_vectors* vectors, size_t query, size_t k,
                                       size_t* indices, double* similarities, size_t* found,
                                       size_t* skipped_zero);

/* ---- cost formulas ---------------------------------------------------- */

/* Growing the hidden layer from m to m + x (x may be negative, >= -m). */
DVR_API dvr_status dvr_costs_hidden(int64_t x, int64_t m, int64_t v, int64_t c,
                                    double expected_class_size, int64_t* added_params,
                                    int64_t* added_ops);
DVR_API dvr_status dvr_costs_doc(int64_t d, int64_t v, int64_t c, double expected_class_size,
                                 int64_t* added_params, int64_t* added_ops);

#ifdef __cplusplus
}
#endif

#endif /* DVRNN_DVRNN_H */
