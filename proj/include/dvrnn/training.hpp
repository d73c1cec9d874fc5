#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dvrnn/corpus.hpp"
#include "dvrnn/model.hpp"

namespace dvrnn {

/// Softmax/cross-entropy derivatives of -ln P(target) with respect to the
/// class logits and the logits of the target's class.
struct OutputError {
  ClassId cls = 0;
  Vec class_delta;  // class_probs - onehot(class(target))
  Vec word_delta;   // in-class probs - onehot(target)
};

OutputError output_error(const StepOutput& out, WordId target, const Vocabulary& vocab);

/// Gradient of -ln P(target) with respect to the document vector.
Vec doc_gradient(const ModelParams& params, const Vocabulary& vocab, const OutputError& err);

/// One gradient step on the document vector. The input vector is not modified.
Vec doc_online_update(const ModelParams& params, const Vocabulary& vocab, const StepOutput& out,
                      WordId target, const Vec& doc, double doc_lr);

/// Whole-sentence backpropagation through time, last step to first. Document
/// values recorded in the trace are treated as constants; the gradient that
/// reaches the first step's document vector is attributed to doc_start.
Gradients bptt_sentence(const ModelParams& params, const SentenceTrace& trace,
                        const Vocabulary& vocab);

struct TrainConfig {
  double general_lr = 0.1;
  double doc_lr = 0.1;  // never decayed
  double lr_decay_factor = 0.5;
  double decay_trigger = 0.003;  // relative dev perplexity improvement
  std::size_t max_epochs = 10;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
  std::optional<double> gradient_clip;
  unsigned threads = 1;  // dev evaluation only

  void validate() const;
};

/// params -= lr * clip(grads)
void apply_gradients(ModelParams& params, const Gradients& grads, double lr,
                     std::optional<double> clip);

/// Reset the document vector, run the sentence with online updates (D > 0),
/// backpropagate, and take one gradient step. Returns the sentence NLL.
double train_sentence(ModelParams& params, std::span<const WordId> sentence,
                      const TrainConfig& cfg, const Vocabulary& vocab);

struct EpochReport {
  std::size_t epoch = 0;
  double train_ppl = 0.0;
  double dev_ppl = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelParams params;  // best on dev
  std::vector<EpochReport> epochs;
  double initial_dev_ppl = 0.0;
  std::size_t best_epoch = 0;  // 0 = initial parameters
  std::size_t doc_resets = 0;
};

TrainResult train(ModelParams params, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg, const Vocabulary& vocab,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

}  // namespace dvrnn
