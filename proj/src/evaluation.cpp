#include "dvrnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <string>
#include <thread>

#include "dvrnn/error.hpp"

namespace dvrnn {

namespace {

// Runs fn(i) for i in [0, n) over up to `threads` workers in contiguous chunks.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void require_positive(std::int64_t value, const char* name) {
  if (value <= 0) {
    throw Error(ErrorCode::invalid_argument, std::string(name) + " must be positive");
  }
}

std::int64_t rounded(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::invalid_argument, "E[O] must be finite");
  return std::llround(value);
}

}  // namespace

EvalReport evaluate_perplexity(const ModelParams& params, const Vocabulary& vocab,
                               const Dataset& dataset, const OnlinePolicy& online,
                               unsigned threads) {
  check_compatible(params, vocab);
  if (dataset.vocab_size != vocab.size() ||
      (dataset.vocab_fingerprint != 0 && dataset.vocab_fingerprint != vocab.fingerprint())) {
    throw Error(ErrorCode::vocab_mismatch, "dataset was encoded with a different vocabulary");
  }
  if (online.enabled && params.dims.doc == 0) {
    throw Error(ErrorCode::no_doc_vector, "model has no document vector");
  }
  if (dataset.sentences.empty()) throw Error(ErrorCode::invalid_argument, "empty dataset");

  EvalReport report;
  report.sentence_nll.resize(dataset.sentences.size());
  parallel_for(dataset.sentences.size(), threads, [&](std::size_t i) {
    report.sentence_nll[i] = sentence_forward(params, vocab, dataset.sentences[i], online).nll;
  });
  for (std::size_t i = 0; i < dataset.sentences.size(); ++i) {
    report.total_nll += report.sentence_nll[i];
    report.scorable_tokens += dataset.sentences[i].size() - 1;
  }
  report.perplexity = std::exp(report.total_nll / static_cast<double>(report.scorable_tokens));
  return report;
}

std::int64_t added_params_hidden(std::int64_t x, std::int64_t m, std::int64_t v, std::int64_t c) {
  require_positive(m, "M");
  require_positive(v, "V");
  require_positive(c, "C");
  if (x < -m) throw Error(ErrorCode::invalid_argument, "X must be >= -M");
  return x * c + 2 * x * v + 2 * x * m + x * x;
}

std::int64_t added_ops_hidden(std::int64_t x, std::int64_t m, std::int64_t c,
                              double expected_class_size) {
  require_positive(m, "M");
  require_positive(c, "C");
  if (x < -m) throw Error(ErrorCode::invalid_argument, "X must be >= -M");
  return 2 * x * m + x * x + x * c + rounded(static_cast<double>(x) * expected_class_size);
}

std::int64_t added_params_doc(std::int64_t d, std::int64_t v, std::int64_t c) {
  require_positive(v, "V");
  require_positive(c, "C");
  if (d < 0) throw Error(ErrorCode::invalid_argument, "D must be >= 0");
  return d + d * v + d * c;
}

std::int64_t added_ops_doc(std::int64_t d, std::int64_t c, double expected_class_size) {
  require_positive(c, "C");
  if (d < 0) throw Error(ErrorCode::invalid_argument, "D must be >= 0");
  return rounded(2.0 * static_cast<double>(d) * expected_class_size) + 2 * d * c;
}

std::vector<SentenceVector> sentence_vectors(const ModelParams& params, const Vocabulary& vocab,
                                             const Dataset& dataset, double doc_lr,
                                             unsigned threads) {
  if (params.dims.doc == 0) throw Error(ErrorCode::no_doc_vector, "model has no document vector");
  if (dataset.vocab_size != vocab.size()) {
    throw Error(ErrorCode::vocab_mismatch, "dataset was encoded with a different vocabulary");
  }
  std::vector<SentenceVector> out(dataset.sentences.size());
  const OnlinePolicy online{true, doc_lr};
  parallel_for(dataset.sentences.size(), threads, [&](std::size_t i) {
    out[i].index = i;
    out[i].vector = sentence_forward(params, vocab, dataset.sentences[i], online).trace.final_doc;
  });
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::invalid_argument, "cosine similarity of a zero vector");
  }
  return dot(a, b) / (na * nb);
}

NeighborResult nearest_sentences(std::span<const SentenceVector> vectors, std::size_t query,
                                 std::size_t k) {
  if (query >= vectors.size()) throw Error(ErrorCode::invalid_argument, "query index out of range");
  if (k >= vectors.size()) {
    throw Error(ErrorCode::invalid_argument, "k must be smaller than the number of vectors");
  }
  const auto& q = vectors[query].vector;
  if (norm(q) == 0.0) throw Error(ErrorCode::invalid_argument, "query vector has zero norm");

  NeighborResult result;
  std::vector<Neighbor> all;
  all.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (i == query) continue;
    if (norm(vectors[i].vector) == 0.0) {
      ++result.skipped_zero;
      continue;
    }
    all.push_back({vectors[i].index, cosine_similarity(q, vectors[i].vector)});
  }
  const auto order = [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.index < b.index;
  };
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), order);
  all.resize(take);
  result.neighbors = std::move(all);
  return result;
}

}  // namespace dvrnn
