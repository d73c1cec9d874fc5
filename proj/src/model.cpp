#include "dvrnn/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "dvrnn/error.hpp"
#include "dvrnn/training.hpp"

namespace dvrnn {

ParamSet ParamSet::zeros(const Dims& d) {
  ParamSet p;
  p.dims = d;
  p.embedding = Mat(d.hidden, d.vocab);
  p.recurrent = Mat(d.hidden, d.hidden);
  p.hidden_class = Mat(d.classes, d.hidden);
  p.hidden_word = Mat(d.vocab, d.hidden);
  p.hidden_start = Vec(d.hidden);
  p.doc_class = Mat(d.classes, d.doc);
  p.doc_word = Mat(d.vocab, d.doc);
  p.doc_start = Vec(d.doc);
  return p;
}

std::array<BlockView, kNumBlocks> ParamSet::blocks() {
  return {{{"embedding", embedding.flat()},
           {"recurrent", recurrent.flat()},
           {"hidden_class", hidden_class.flat()},
           {"hidden_word", hidden_word.flat()},
           {"hidden_start", hidden_start.span()},
           {"doc_class", doc_class.flat()},
           {"doc_word", doc_word.flat()},
           {"doc_start", doc_start.span()}}};
}

std::array<ConstBlockView, kNumBlocks> ParamSet::blocks() const {
  return {{{"embedding", embedding.flat()},
           {"recurrent", recurrent.flat()},
           {"hidden_class", hidden_class.flat()},
           {"hidden_word", hidden_word.flat()},
           {"hidden_start", hidden_start.span()},
           {"doc_class", doc_class.flat()},
           {"doc_word", doc_word.flat()},
           {"doc_start", doc_start.span()}}};
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.values.size();
  return n;
}

bool ParamSet::bit_equal(const ParamSet& other) const {
  if (!(dims == other.dims)) return false;
  const auto mine = blocks();
  const auto theirs = other.blocks();
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    const auto& a = mine[i].values;
    const auto& b = theirs[i].values;
    if (a.size() != b.size()) return false;
    if (!a.empty() && std::memcmp(a.data(), b.data(), a.size_bytes()) != 0) return false;
  }
  return true;
}

std::size_t parameter_count(const Dims& d) {
  const std::size_t m = d.hidden, doc = d.doc, v = d.vocab, c = d.classes;
  return m * v + m * m + c * m + v * m + m + c * doc + v * doc + doc;
}

ModelParams init_params(const Dims& dims, const ClassAssignment& classes, Rng& rng, double scale) {
  if (dims.hidden < 1 || dims.vocab < 3 || dims.classes < 1 || dims.classes > dims.vocab) {
    throw Error(ErrorCode::invalid_argument,
                "invalid dimensions M=" + std::to_string(dims.hidden) +
                    " V=" + std::to_string(dims.vocab) + " C=" + std::to_string(dims.classes));
  }
  if (classes.num_words() != dims.vocab || classes.num_classes() != dims.classes) {
    throw Error(ErrorCode::dimension_mismatch, "class assignment does not match V and C");
  }
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::invalid_argument, "init scale must be finite and >= 0");
  }
  ModelParams p(ParamSet::zeros(dims));
  for (auto& block : p.blocks()) {
    for (double& x : block.values) x = rng.uniform(-scale, scale);
  }
  return p;
}

const Vec& StepOutput::in_class(ClassId c) const {
  for (const auto& [cls, probs] : word_probs) {
    if (cls == c) return probs;
  }
  throw Error(ErrorCode::invalid_argument,
              "word distribution of class " + std::to_string(c) + " was not computed");
}

void check_compatible(const ModelParams& params, const Vocabulary& vocab) {
  const auto& d = params.dims;
  if (d.vocab != vocab.size() || d.classes != vocab.num_classes()) {
    throw Error(ErrorCode::vocab_mismatch,
                "model has V=" + std::to_string(d.vocab) + " C=" + std::to_string(d.classes) +
                    ", vocabulary has V=" + std::to_string(vocab.size()) +
                    " C=" + std::to_string(vocab.num_classes()));
  }
  if (params.parameter_count() != parameter_count(d)) {
    throw Error(ErrorCode::dimension_mismatch, "parameter blocks do not match model dims");
  }
}

namespace {

void check_state(const ModelParams& params, const StepState& state) {
  const auto& d = params.dims;
  if (state.hidden.size() != d.hidden || state.doc.size() != d.doc) {
    throw Error(ErrorCode::dimension_mismatch, "step state does not match model dims");
  }
  if (state.prev_word >= d.vocab) {
    throw Error(ErrorCode::invalid_argument,
                "word id " + std::to_string(state.prev_word) + " out of range");
  }
}

Vec word_distribution(const ModelParams& params, const Vocabulary& vocab, const Vec& hidden,
                      const Vec& doc, ClassId c) {
  const auto members = vocab.classes().members(c);
  Vec logits(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    logits[i] = dot(params.hidden_word.row(members[i]), hidden);
    if (!doc.empty()) logits[i] += dot(params.doc_word.row(members[i]), doc);
  }
  softmax_inplace(logits);
  return logits;
}

std::pair<Vec, StepOutput> step(const ModelParams& params, const Vocabulary& vocab,
                                const StepState& state, const ClassId* target_class) {
  check_state(params, state);
  const auto& d = params.dims;

  Vec hidden(d.hidden);
  for (std::size_t i = 0; i < d.hidden; ++i) hidden[i] = params.embedding(i, state.prev_word);
  matvec_accumulate(params.recurrent, state.hidden, hidden);
  for (double& h : hidden) h = sigmoid(h);

  StepOutput out;
  out.class_probs = matvec(params.hidden_class, hidden);
  if (d.doc > 0) matvec_accumulate(params.doc_class, state.doc, out.class_probs);
  softmax_inplace(out.class_probs);

  if (target_class != nullptr) {
    out.word_probs.emplace_back(*target_class,
                                word_distribution(params, vocab, hidden, state.doc, *target_class));
  } else {
    out.word_probs.reserve(d.classes);
    for (ClassId c = 0; c < d.classes; ++c) {
      out.word_probs.emplace_back(c, word_distribution(params, vocab, hidden, state.doc, c));
    }
  }
  return {std::move(hidden), std::move(out)};
}

}  // namespace

std::pair<Vec, StepOutput> forward_step(const ModelParams& params, const Vocabulary& vocab,
                                        const StepState& state, ClassId target_class) {
  if (target_class >= params.dims.classes) {
    throw Error(ErrorCode::invalid_argument, "class id out of range");
  }
  return step(params, vocab, state, &target_class);
}

std::pair<Vec, StepOutput> forward_step_full(const ModelParams& params, const Vocabulary& vocab,
                                             const StepState& state) {
  return step(params, vocab, state, nullptr);
}

double next_word_prob(const StepOutput& out, WordId w, const Vocabulary& vocab) {
  if (w >= vocab.size()) throw Error(ErrorCode::invalid_argument, "word id out of range");
  if (w == vocab.start_id()) {
    throw Error(ErrorCode::invalid_argument, "the sentence-start token is never scored");
  }
  const auto& classes = vocab.classes();
  const ClassId c = classes.class_of(w);
  return out.class_probs[c] * out.in_class(c)[classes.position_in_class(w)];
}

Vec full_distribution(const StepOutput& out, const Vocabulary& vocab) {
  const auto& classes = vocab.classes();
  Vec probs(vocab.size());
  for (WordId w = 0; w < vocab.size(); ++w) {
    const ClassId c = classes.class_of(w);
    probs[w] = out.class_probs[c] * out.in_class(c)[classes.position_in_class(w)];
  }
  return probs;
}

SentenceResult sentence_forward(const ModelParams& params, const Vocabulary& vocab,
                                std::span<const WordId> sentence, const OnlinePolicy& online) {
  check_compatible(params, vocab);
  if (sentence.size() < 2 || sentence.front() != vocab.start_id() ||
      sentence.back() != vocab.end_id()) {
    throw Error(ErrorCode::invalid_argument, "malformed sentence: must be [<s> ... </s>]");
  }
  if (online.enabled && params.dims.doc == 0) {
    throw Error(ErrorCode::no_doc_vector, "model has no document vector");
  }

  SentenceResult result;
  auto& trace = result.trace;
  trace.start_hidden = params.hidden_start;
  trace.steps.reserve(sentence.size() - 1);

  StepState state{params.hidden_start, params.doc_start, sentence.front()};
  for (std::size_t t = 1; t < sentence.size(); ++t) {
    const WordId target = sentence[t];
    if (target >= vocab.size() || target == vocab.start_id() ||
        (target == vocab.end_id() && t + 1 != sentence.size())) {
      throw Error(ErrorCode::invalid_argument,
                  "malformed sentence at position " + std::to_string(t));
    }
    auto [hidden, out] = forward_step(params, vocab, state, vocab.classes().class_of(target));
    const double p = next_word_prob(out, target, vocab);

    TraceStep ts;
    ts.input = state.prev_word;
    ts.target = target;
    ts.doc = state.doc;
    ts.log_prob = std::log(p);
    result.nll -= ts.log_prob;

    if (online.enabled) {
      state.doc = doc_online_update(params, vocab, out, target, state.doc, online.doc_lr);
    }
    state.hidden = hidden;
    state.prev_word = target;
    ts.hidden = std::move(hidden);
    ts.out = std::move(out);
    trace.steps.push_back(std::move(ts));
  }
  trace.final_doc = std::move(state.doc);
  return result;
}

}  // namespace dvrnn
