#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dvrnn/corpus.hpp"
#include "dvrnn/numerics.hpp"

namespace dvrnn {

struct Dims {
  std::uint32_t hidden = 0;   // M
  std::uint32_t doc = 0;      // D; 0 is the plain recurrent model
  std::uint32_t vocab = 0;    // V
  std::uint32_t classes = 0;  // C

  friend bool operator==(const Dims&, const Dims&) = default;
};

struct BlockView {
  std::string_view name;
  std::span<double> values;
};

struct ConstBlockView {
  std::string_view name;
  std::span<const double> values;
};

inline constexpr std::size_t kNumBlocks = 8;

/// Storage for every trainable block. Shared by the model parameters and
/// their gradients.
struct ParamSet {
  Dims dims;
  Mat embedding;     // M x V, column w is the input vector of word w
  Mat recurrent;     // M x M
  Mat hidden_class;  // C x M
  Mat hidden_word;   // V x M, row w scores word w inside its class
  Vec hidden_start;  // M, hidden state fed to the first step of each sentence
  Mat doc_class;     // C x D
  Mat doc_word;      // V x D
  Vec doc_start;     // D, shared starting document vector

  static ParamSet zeros(const Dims& dims);

  /// Blocks in serialization order.
  std::array<BlockView, kNumBlocks> blocks();
  std::array<ConstBlockView, kNumBlocks> blocks() const;

  std::size_t parameter_count() const;
  bool bit_equal(const ParamSet& other) const;
};

struct ModelParams : ParamSet {
  ModelParams() = default;
  explicit ModelParams(ParamSet p) : ParamSet(std::move(p)) {}
};

struct Gradients : ParamSet {
  Gradients() = default;
  explicit Gradients(const Dims& dims) : ParamSet(ParamSet::zeros(dims)) {}
};

/// Number of trainable values for the given dimensions.
std::size_t parameter_count(const Dims& dims);

/// Uniform draws in [-scale, scale] for every block, in serialization order.
ModelParams init_params(const Dims& dims, const ClassAssignment& classes, Rng& rng, double scale);

struct StepState {
  Vec hidden;  // hidden_{t-1}
  Vec doc;
  WordId prev_word = 0;
};

struct StepOutput {
  Vec class_probs;
  /// Within-class word distributions for the classes that were evaluated.
  std::vector<std::pair<ClassId, Vec>> word_probs;

  const Vec& in_class(ClassId c) const;
};

/// One recurrent step. Word distributions are computed only for target_class.
std::pair<Vec, StepOutput> forward_step(const ModelParams& params, const Vocabulary& vocab,
                                        const StepState& state, ClassId target_class);
/// Same step with word distributions for every class.
std::pair<Vec, StepOutput> forward_step_full(const ModelParams& params, const Vocabulary& vocab,
                                             const StepState& state);

/// P(w | history) = P(class(w)) * P(w | class(w)).
double next_word_prob(const StepOutput& out, WordId w, const Vocabulary& vocab);

/// Probabilities of every id (the start token included) from a full step.
Vec full_distribution(const StepOutput& out, const Vocabulary& vocab);

struct OnlinePolicy {
  bool enabled = false;
  double doc_lr = 0.1;
};

struct TraceStep {
  WordId input = 0;
  WordId target = 0;
  Vec hidden;  // hidden_t after this step
  Vec doc;     // document vector used to score this step (pre-update)
  StepOutput out;
  double log_prob = 0.0;
};

struct SentenceTrace {
  Vec start_hidden;
  std::vector<TraceStep> steps;
  Vec final_doc;  // after the update driven by the end token
};

struct SentenceResult {
  SentenceTrace trace;
  double nll = 0.0;
};

/// Scores every position after the start token. With online updates on, the
/// document vector is adjusted after each position is scored, so the update
/// triggered at step t only affects steps t+1 onward.
SentenceResult sentence_forward(const ModelParams& params, const Vocabulary& vocab,
                                std::span<const WordId> sentence, const OnlinePolicy& online);

/// Reject parameter sets whose dims disagree with each other or with vocab.
void check_compatible(const ModelParams& params, const Vocabulary& vocab);

}  // namespace dvrnn
