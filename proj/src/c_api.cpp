#include "dvrnn/dvrnn.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "dvrnn/corpus.hpp"
#include "dvrnn/error.hpp"
#include "dvrnn/evaluation.hpp"
#include "dvrnn/model_io.hpp"
#include "dvrnn/training.hpp"

struct dvr_vocab {
  dvrnn::Vocabulary vocab;
};

struct dvr_dataset {
  dvrnn::Dataset data;
};

struct dvr_model {
  dvrnn::ModelParams params;
  dvr_vocab vocab;
};

struct dvr_vectors {
  std::vector<dvrnn::SentenceVector> rows;
  std::uint32_t dim = 0;
};

namespace {

thread_local std::string last_error;

dvr_status to_status(dvrnn::ErrorCode code) {
  using dvrnn::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return DVR_ERR_INVALID_ARGUMENT;
    case ErrorCode::io: return DVR_ERR_IO;
    case ErrorCode::bad_magic: return DVR_ERR_BAD_MAGIC;
    case ErrorCode::unsupported_version: return DVR_ERR_UNSUPPORTED_VERSION;
    case ErrorCode::truncated: return DVR_ERR_TRUNCATED;
    case ErrorCode::dimension_mismatch: return DVR_ERR_DIMENSION_MISMATCH;
    case ErrorCode::vocab_mismatch: return DVR_ERR_VOCAB_MISMATCH;
    case ErrorCode::no_doc_vector: return DVR_ERR_NO_DOC_VECTOR;
    case ErrorCode::non_finite: return DVR_ERR_NON_FINITE;
    case ErrorCode::diverged: return DVR_ERR_DIVERGED;
    case ErrorCode::config: return DVR_ERR_CONFIG;
  }
  return DVR_ERR_INTERNAL;
}

dvr_status fail(dvr_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename Fn>
dvr_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return DVR_OK;
  } catch (const dvrnn::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DVR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DVR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DVR_ERR_INTERNAL, "unknown exception");
  }
}

#define DVR_REQUIRE(cond, what)                                                     \
  do {                                                                              \
    if (!(cond)) return fail(DVR_ERR_INVALID_ARGUMENT, std::string("null ") + what); \
  } while (0)

}  // namespace

extern "C" {

const char* dvr_status_name(dvr_status status) {
  switch (status) {
    case DVR_OK: return "ok";
    case DVR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DVR_ERR_IO: return "i/o error";
    case DVR_ERR_BAD_MAGIC: return "bad magic";
    case DVR_ERR_UNSUPPORTED_VERSION: return "unsupported version";
    case DVR_ERR_TRUNCATED: return "truncated file";
    case DVR_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case DVR_ERR_VOCAB_MISMATCH: return "vocabulary mismatch";
    case DVR_ERR_NO_DOC_VECTOR: return "model has no document vector";
    case DVR_ERR_NON_FINITE: return "non-finite value";
    case DVR_ERR_DIVERGED: return "training diverged";
    case DVR_ERR_CONFIG: return "configuration error";
    case DVR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* dvr_last_error(void) { return last_error.c_str(); }

// ---- vocabulary

dvr_status dvr_vocab_build(const char* corpus_path, uint32_t min_count, uint32_t num_classes,
                           int lowercase, dvr_vocab** out) {
  DVR_REQUIRE(corpus_path && out, "argument");
  return guarded([&] {
    const auto sentences = dvrnn::read_corpus(corpus_path, lowercase != 0);
    auto vocab = dvrnn::build_vocab(sentences, min_count);
    vocab.set_classes(dvrnn::assign_classes(vocab, num_classes));
    *out = new dvr_vocab{std::move(vocab)};
  });
}

dvr_status dvr_vocab_load(const char* path, dvr_vocab** out) {
  DVR_REQUIRE(path && out, "argument");
  return guarded([&] { *out = new dvr_vocab{dvrnn::Vocabulary::load(path)}; });
}

dvr_status dvr_vocab_save(const dvr_vocab* vocab, const char* path) {
  DVR_REQUIRE(vocab && path, "argument");
  return guarded([&] { vocab->vocab.save(path); });
}

void dvr_vocab_free(dvr_vocab* vocab) { delete vocab; }

uint32_t dvr_vocab_size(const dvr_vocab* vocab) { return vocab ? vocab->vocab.size() : 0; }

uint32_t dvr_vocab_num_classes(const dvr_vocab* vocab) {
  return vocab ? vocab->vocab.num_classes() : 0;
}

dvr_status dvr_vocab_expected_class_size(const dvr_vocab* vocab, double* out) {
  DVR_REQUIRE(vocab && out, "argument");
  return guarded(
      [&] { *out = dvrnn::expected_in_class_size(vocab->vocab, vocab->vocab.classes()); });
}

// ---- datasets

dvr_status dvr_dataset_load(const dvr_vocab* vocab, const char* path, int lowercase,
                            dvr_dataset** out) {
  DVR_REQUIRE(vocab && path && out, "argument");
  return guarded([&] {
    auto data = dvrnn::load_dataset(path, vocab->vocab, lowercase != 0);
    if (data.sentences.empty()) {
      throw dvrnn::Error(dvrnn::ErrorCode::invalid_argument, std::string(path) + ": empty corpus");
    }
    *out = new dvr_dataset{std::move(data)};
  });
}

dvr_status dvr_dataset_save_encoded(const dvr_dataset* dataset, const char* path) {
  DVR_REQUIRE(dataset && path, "argument");
  return guarded([&] { dvrnn::write_encoded(path, dataset->data); });
}

void dvr_dataset_free(dvr_dataset* dataset) { delete dataset; }

size_t dvr_dataset_num_sentences(const dvr_dataset* dataset) {
  return dataset ? dataset->data.sentences.size() : 0;
}

size_t dvr_dataset_num_tokens(const dvr_dataset* dataset) {
  return dataset ? dataset->data.token_count : 0;
}

dvr_status dvr_dataset_sentence_text(const dvr_dataset* dataset, const dvr_vocab* vocab,
                                     size_t index, char* buf, size_t buf_len, size_t* needed) {
  DVR_REQUIRE(dataset && vocab, "argument");
  return guarded([&] {
    const auto& sentences = dataset->data.sentences;
    if (index >= sentences.size()) {
      throw dvrnn::Error(dvrnn::ErrorCode::invalid_argument, "sentence index out of range");
    }
    if (dataset->data.vocab_size != vocab->vocab.size()) {
      throw dvrnn::Error(dvrnn::ErrorCode::vocab_mismatch, "dataset uses a different vocabulary");
    }
    std::string text;
    const auto& ids = sentences[index];
    for (std::size_t i = 1; i + 1 < ids.size(); ++i) {
      if (i > 1) text += ' ';
      text += vocab->vocab.word(ids[i]);
    }
    if (needed) *needed = text.size() + 1;
    if (buf && buf_len > 0) {
      const std::size_t n = std::min(buf_len - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

dvr_status dvr_shuffle_lines(const char* in_path, const char* out_path, uint64_t seed) {
  DVR_REQUIRE(in_path && out_path, "path");
  return guarded([&] { dvrnn::shuffle_lines(in_path, out_path, seed); });
}

// ---- models

dvr_status dvr_model_create(const dvr_vocab* vocab, uint32_t hidden, uint32_t doc, uint64_t seed,
                            double init_scale, dvr_model** out) {
  DVR_REQUIRE(vocab && out, "argument");
  return guarded([&] {
    const dvrnn::Dims dims{hidden, doc, vocab->vocab.size(), vocab->vocab.num_classes()};
    dvrnn::Rng rng(seed);
    auto params = dvrnn::init_params(dims, vocab->vocab.classes(), rng, init_scale);
    *out = new dvr_model{std::move(params), dvr_vocab{vocab->vocab}};
  });
}

dvr_status dvr_model_load(const char* path, dvr_model** out) {
  DVR_REQUIRE(path && out, "argument");
  return guarded([&] {
    auto bundle = dvrnn::load_model(path);
    *out = new dvr_model{std::move(bundle.params), dvr_vocab{std::move(bundle.vocab)}};
  });
}

dvr_status dvr_model_save(const dvr_model* model, const char* path) {
  DVR_REQUIRE(model && path, "argument");
  return guarded([&] { dvrnn::save_model(path, model->params, model->vocab.vocab); });
}

void dvr_model_free(dvr_model* model) { delete model; }

dvr_dims dvr_model_dims(const dvr_model* model) {
  if (!model) return dvr_dims{0, 0, 0, 0};
  const auto& d = model->params.dims;
  return dvr_dims{d.hidden, d.doc, d.vocab, d.classes};
}

uint64_t dvr_model_parameter_count(const dvr_model* model) {
  return model ? model->params.parameter_count() : 0;
}

const dvr_vocab* dvr_model_vocab(const dvr_model* model) { return model ? &model->vocab : nullptr; }

// ---- training

void dvr_train_config_init(dvr_train_config* cfg) {
  if (!cfg) return;
  const dvrnn::TrainConfig defaults;
  cfg->learning_rate = defaults.general_lr;
  cfg->doc_learning_rate = defaults.doc_lr;
  cfg->lr_decay_factor = defaults.lr_decay_factor;
  cfg->decay_trigger = defaults.decay_trigger;
  cfg->max_epochs = static_cast<uint32_t>(defaults.max_epochs);
  cfg->use_gradient_clip = 0;
  cfg->gradient_clip = 5.0;
  cfg->threads = defaults.threads;
}

dvr_status dvr_model_train(dvr_model* model, const dvr_dataset* train, const dvr_dataset* dev,
                           const dvr_train_config* cfg, dvr_epoch_callback on_epoch,
                           void* user_data) {
  DVR_REQUIRE(model && train && dev && cfg, "argument");
  return guarded([&] {
    dvrnn::TrainConfig tc;
    tc.general_lr = cfg->learning_rate;
    tc.doc_lr = cfg->doc_learning_rate;
    tc.lr_decay_factor = cfg->lr_decay_factor;
    tc.decay_trigger = cfg->decay_trigger;
    tc.max_epochs = cfg->max_epochs;
    if (cfg->use_gradient_clip) tc.gradient_clip = cfg->gradient_clip;
    tc.threads = cfg->threads == 0 ? 1 : cfg->threads;
    auto callback = [&](const dvrnn::EpochReport& r) {
      if (!on_epoch) return;
      const dvr_epoch_report report{static_cast<uint32_t>(r.epoch), r.train_ppl, r.dev_ppl,
                                    r.learning_rate};
      on_epoch(&report, user_data);
    };
    auto result = dvrnn::train(model->params, train->data, dev->data, tc, model->vocab.vocab,
                               callback);
    model->params = std::move(result.params);
  });
}

// ---- evaluation

dvr_status dvr_model_evaluate(const dvr_model* model, const dvr_dataset* dataset, int online,
                              double doc_lr, uint32_t threads, dvr_eval_report* report,
                              double* sentence_nll) {
  DVR_REQUIRE(model && dataset && report, "argument");
  return guarded([&] {
    const auto r = dvrnn::evaluate_perplexity(model->params, model->vocab.vocab, dataset->data,
                                              dvrnn::OnlinePolicy{online != 0, doc_lr},
                                              threads == 0 ? 1 : threads);
    report->total_nll = r.total_nll;
    report->tokens = r.scorable_tokens;
    report->perplexity = r.perplexity;
    if (sentence_nll) std::copy(r.sentence_nll.begin(), r.sentence_nll.end(), sentence_nll);
  });
}

dvr_status dvr_sentence_vectors(const dvr_model* model, const dvr_dataset* dataset, double doc_lr,
                                dvr_vectors** out) {
  DVR_REQUIRE(model && dataset && out, "argument");
  return guarded([&] {
    auto rows = dvrnn::sentence_vectors(model->params, model->vocab.vocab, dataset->data, doc_lr);
    *out = new dvr_vectors{std::move(rows), model->params.dims.doc};
  });
}

void dvr_vectors_free(dvr_vectors* vectors) { delete vectors; }

size_t dvr_vectors_count(const dvr_vectors* vectors) { return vectors ? vectors->rows.size() : 0; }

uint32_t dvr_vectors_dim(const dvr_vectors* vectors) { return vectors ? vectors->dim : 0; }

const double* dvr_vectors_row(const dvr_vectors* vectors, size_t index) {
  if (!vectors || index >= vectors->rows.size()) return nullptr;
  return vectors->rows[index].vector.data();
}

dvr_status dvr_vectors_nearest(const dvr_vectors* vectors, size_t query, size_t k,
                               size_t* indices, double* similarities, size_t* found,
                               size_t* skipped_zero) {
  DVR_REQUIRE(vectors && found, "argument");
  DVR_REQUIRE(k == 0 || (indices && similarities), "output buffer");
  return guarded([&] {
    const auto result = dvrnn::nearest_sentences(vectors->rows, query, k);
    for (std::size_t i = 0; i < result.neighbors.size(); ++i) {
      indices[i] = result.neighbors[i].index;
      similarities[i] = result.neighbors[i].similarity;
    }
    *found = result.neighbors.size();
    if (skipped_zero) *skipped_zero = result.skipped_zero;
  });
}

// ---- costs

dvr_status dvr_costs_hidden(int64_t x, int64_t m, int64_t v, int64_t c, double expected_class_size,
                            int64_t* added_params, int64_t* added_ops) {
  DVR_REQUIRE(added_params && added_ops, "output");
  return guarded([&] {
    *added_params = dvrnn::added_params_hidden(x, m, v, c);
    *added_ops = dvrnn::added_ops_hidden(x, m, c, expected_class_size);
  });
}

dvr_status dvr_costs_doc(int64_t d, int64_t v, int64_t c, double expected_class_size,
                         int64_t* added_params, int64_t* added_ops) {
  DVR_REQUIRE(added_params && added_ops, "output");
  return guarded([&] {
    *added_params = dvrnn::added_params_doc(d, v, c);
    *added_ops = dvrnn::added_ops_doc(d, c, expected_class_size);
  });
}

}  // extern "C"
