#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dvrnn/corpus.hpp"
#include "dvrnn/model.hpp"

namespace dvrnn {

struct EvalReport {
  double total_nll = 0.0;
  std::size_t scorable_tokens = 0;
  double perplexity = 0.0;
  std::vector<double> sentence_nll;
};

/// Perplexity with natural log. The document vector restarts from doc_start
/// for each sentence, so sentences are scored independently and may be split
/// across threads; the sum is always taken in dataset order.
EvalReport evaluate_perplexity(const ModelParams& params, const Vocabulary& vocab,
                               const Dataset& dataset, const OnlinePolicy& online,
                               unsigned threads = 1);

// Extra parameters/operations when growing the hidden layer from M to M + X.
// X may be negative (down to -M) to express a smaller hidden layer.
std::int64_t added_params_hidden(std::int64_t x, std::int64_t m, std::int64_t v, std::int64_t c);
std::int64_t added_ops_hidden(std::int64_t x, std::int64_t m, std::int64_t c, double expected_class_size);

// Extra parameters/operations for a D-dimensional online document vector.
std::int64_t added_params_doc(std::int64_t d, std::int64_t v, std::int64_t c);
std::int64_t added_ops_doc(std::int64_t d, std::int64_t c, double expected_class_size);

struct SentenceVector {
  std::size_t index = 0;
  Vec vector;  // document vector after the end-token update
};

std::vector<SentenceVector> sentence_vectors(const ModelParams& params, const Vocabulary& vocab,
                                             const Dataset& dataset, double doc_lr,
                                             unsigned threads = 1);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct Neighbor {
  std::size_t index = 0;
  double similarity = 0.0;
};

struct NeighborResult {
  std::vector<Neighbor> neighbors;
  std::size_t skipped_zero = 0;  // zero-norm candidates left out
};

/// Top-k by cosine similarity, query excluded, ties by ascending index.
NeighborResult nearest_sentences(std::span<const SentenceVector> vectors, std::size_t query,
                                 std::size_t k);

}  // namespace dvrnn
