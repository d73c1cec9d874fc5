#include "dvrnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dvrnn/error.hpp"
#include "dvrnn/evaluation.hpp"

namespace dvrnn {

OutputError output_error(const StepOutput& out, WordId target, const Vocabulary& vocab) {
  if (target >= vocab.size() || target == vocab.start_id()) {
    throw Error(ErrorCode::invalid_argument, "target is not a scorable word");
  }
  const auto& classes = vocab.classes();
  OutputError err;
  err.cls = classes.class_of(target);
  err.class_delta = out.class_probs;
  err.class_delta[err.cls] -= 1.0;
  err.word_delta = out.in_class(err.cls);
  err.word_delta[classes.position_in_class(target)] -= 1.0;
  return err;
}

Vec doc_gradient(const ModelParams& params, const Vocabulary& vocab, const OutputError& err) {
  Vec g(params.dims.doc);
  matvec_transposed_accumulate(params.doc_class, err.class_delta, g);
  const auto members = vocab.classes().members(err.cls);
  for (std::size_t i = 0; i < members.size(); ++i) {
    axpy(err.word_delta[i], params.doc_word.row(members[i]), g);
  }
  return g;
}

Vec doc_online_update(const ModelParams& params, const Vocabulary& vocab, const StepOutput& out,
                      WordId target, const Vec& doc, double doc_lr) {
  if (params.dims.doc == 0) throw Error(ErrorCode::no_doc_vector, "model has no document vector");
  if (doc.size() != params.dims.doc) {
    throw Error(ErrorCode::dimension_mismatch, "document vector has wrong length");
  }
  Vec updated = doc;
  axpy(-doc_lr, doc_gradient(params, vocab, output_error(out, target, vocab)), updated);
  return updated;
}

Gradients bptt_sentence(const ModelParams& params, const SentenceTrace& trace,
                        const Vocabulary& vocab) {
  const auto& d = params.dims;
  check_compatible(params, vocab);
  if (trace.start_hidden.size() != d.hidden || trace.steps.empty()) {
    throw Error(ErrorCode::dimension_mismatch, "trace does not belong to this model");
  }
  for (const auto& s : trace.steps) {
    if (s.hidden.size() != d.hidden || s.doc.size() != d.doc ||
        s.out.class_probs.size() != d.classes) {
      throw Error(ErrorCode::dimension_mismatch, "trace does not belong to this model");
    }
  }

  Gradients g(d);
  const auto& classes = vocab.classes();
  Vec from_next(d.hidden);  // d loss / d hidden_t arriving through the recurrence
  Vec dh(d.hidden);
  Vec da(d.hidden);

  for (std::size_t t = trace.steps.size(); t-- > 0;) {
    const auto& s = trace.steps[t];
    const Vec& prev_hidden = t == 0 ? trace.start_hidden : trace.steps[t - 1].hidden;
    const OutputError err = output_error(s.out, s.target, vocab);
    const auto members = classes.members(err.cls);

    add_outer(g.hidden_class, 1.0, err.class_delta, s.hidden);
    if (d.doc > 0) add_outer(g.doc_class, 1.0, err.class_delta, s.doc);
    for (std::size_t i = 0; i < members.size(); ++i) {
      axpy(err.word_delta[i], s.hidden, g.hidden_word.row(members[i]));
      if (d.doc > 0) axpy(err.word_delta[i], s.doc, g.doc_word.row(members[i]));
    }

    dh = from_next;
    matvec_transposed_accumulate(params.hidden_class, err.class_delta, dh);
    for (std::size_t i = 0; i < members.size(); ++i) {
      axpy(err.word_delta[i], params.hidden_word.row(members[i]), dh);
    }
    for (std::size_t i = 0; i < d.hidden; ++i) da[i] = dh[i] * s.hidden[i] * (1.0 - s.hidden[i]);

    for (std::size_t i = 0; i < d.hidden; ++i) g.embedding(i, s.input) += da[i];
    add_outer(g.recurrent, 1.0, da, prev_hidden);

    std::fill(from_next.begin(), from_next.end(), 0.0);
    matvec_transposed_accumulate(params.recurrent, da, from_next);

    if (t == 0 && d.doc > 0) g.doc_start = doc_gradient(params, vocab, err);
  }
  g.hidden_start = from_next;
  return g;
}

void TrainConfig::validate() const {
  if (!(general_lr >= 0.0) || !(doc_lr >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "learning rates must be >= 0");
  }
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "lr_decay_factor must lie in (0, 1)");
  }
  if (!(decay_trigger >= 0.0)) throw Error(ErrorCode::invalid_argument, "decay_trigger must be >= 0");
  if (!(init_scale >= 0.0)) throw Error(ErrorCode::invalid_argument, "init_scale must be >= 0");
  if (gradient_clip && !(*gradient_clip > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "gradient_clip must be > 0");
  }
}

void apply_gradients(ModelParams& params, const Gradients& grads, double lr,
                     std::optional<double> clip) {
  if (!(params.dims == grads.dims)) {
    throw Error(ErrorCode::dimension_mismatch, "gradient shape does not match model");
  }
  auto blocks = params.blocks();
  const auto deltas = grads.blocks();
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    auto p = blocks[b].values;
    const auto gb = deltas[b].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = clip ? std::clamp(gb[i], -*clip, *clip) : gb[i];
      p[i] -= lr * gi;
    }
  }
}

double train_sentence(ModelParams& params, std::span<const WordId> sentence,
                      const TrainConfig& cfg, const Vocabulary& vocab) {
  const OnlinePolicy online{params.dims.doc > 0, cfg.doc_lr};
  const auto result = sentence_forward(params, vocab, sentence, online);
  if (!std::isfinite(result.nll)) {
    throw Error(ErrorCode::non_finite, "non-finite sentence loss");
  }
  const Gradients grads = bptt_sentence(params, result.trace, vocab);
  apply_gradients(params, grads, cfg.general_lr, cfg.gradient_clip);
  return result.nll;
}

TrainResult train(ModelParams params, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg, const Vocabulary& vocab,
                  const std::function<void(const EpochReport&)>& on_epoch) {
  cfg.validate();
  check_compatible(params, vocab);
  if (train_set.sentences.empty() || dev_set.sentences.empty()) {
    throw Error(ErrorCode::invalid_argument, "training and dev sets must be non-empty");
  }
  validate_dataset(train_set, vocab);
  validate_dataset(dev_set, vocab);

  const OnlinePolicy online{params.dims.doc > 0, cfg.doc_lr};
  TrainResult result;
  result.initial_dev_ppl = evaluate_perplexity(params, vocab, dev_set, online, cfg.threads).perplexity;
  result.params = params;

  double best_ppl = result.initial_dev_ppl;
  double prev_ppl = result.initial_dev_ppl;
  double lr = cfg.general_lr;
  TrainConfig step_cfg = cfg;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    step_cfg.general_lr = lr;
    double nll = 0.0;
    for (const auto& sentence : train_set.sentences) {
      nll += train_sentence(params, sentence, step_cfg, vocab);
      if (params.dims.doc > 0) ++result.doc_resets;
    }
    EpochReport report;
    report.epoch = epoch;
    report.train_ppl = std::exp(nll / static_cast<double>(train_set.token_count));
    report.dev_ppl = evaluate_perplexity(params, vocab, dev_set, online, cfg.threads).perplexity;
    report.learning_rate = lr;
    if (!std::isfinite(report.dev_ppl) || report.dev_ppl > 10.0 * result.initial_dev_ppl) {
      throw Error(ErrorCode::diverged, "dev perplexity " + std::to_string(report.dev_ppl) +
                                           " at epoch " + std::to_string(epoch) +
                                           " exceeds 10x the initial " +
                                           std::to_string(result.initial_dev_ppl));
    }
    result.epochs.push_back(report);
    if (on_epoch) on_epoch(report);

    const bool improved = report.dev_ppl < best_ppl;
    if (improved) {
      best_ppl = report.dev_ppl;
      result.params = params;
      result.best_epoch = epoch;
    }
    if ((prev_ppl - report.dev_ppl) / prev_ppl < cfg.decay_trigger) {
      lr *= cfg.lr_decay_factor;
      if (lr < 1e-4 && !improved) break;
    }
    prev_ppl = report.dev_ppl;
  }
  return result;
}

}  // namespace dvrnn
