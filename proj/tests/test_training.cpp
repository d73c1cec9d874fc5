#include <cmath>
#include <map>

#include "doctest.h"
#include "dvrnn/error.hpp"
#include "dvrnn/evaluation.hpp"
#include "dvrnn/training.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace dvrnn;

TEST_CASE("output_error") {
  Rng rng(1);
  const auto vocab = testing::random_vocab(6, 4, rng);
  const WordId target = 3;
  const ClassId tc = vocab.classes().class_of(target);
  const auto members = vocab.classes().members(tc);
  const auto pos = vocab.classes().position_in_class(target);

  SUBCASE("perfect prediction") {
    StepOutput out;
    out.class_probs = Vec(4);
    out.class_probs[tc] = 1.0;
    Vec in_class(members.size());
    in_class[pos] = 1.0;
    out.word_probs.emplace_back(tc, in_class);
    const auto err = output_error(out, target, vocab);
    for (double x : err.class_delta) CHECK(x == 0.0);
    for (double x : err.word_delta) CHECK(x == 0.0);
  }

  SUBCASE("uniform classes") {
    const auto v4 = Vocabulary({{"a", 1, 0}, {"<s>", 0, 1}, {"</s>", 1, 2}, {"<unk>", 1, 3}}, 4, 1);
    StepOutput out;
    out.class_probs = Vec{0.25, 0.25, 0.25, 0.25};
    out.word_probs.emplace_back(0, Vec{1.0});
    const auto err = output_error(out, 0, v4);
    CHECK(err.class_delta == Vec{-0.75, 0.25, 0.25, 0.25});
  }

  SUBCASE("matches finite differences with respect to the logits") {
    for (int trial = 0; trial < 20; ++trial) {
      Vec class_logits(4), word_logits(members.size());
      for (double& x : class_logits) x = rng.uniform(-3, 3);
      for (double& x : word_logits) x = rng.uniform(-3, 3);
      const auto loss = [&](const Vec& theta) {
        Vec cl(std::vector<double>(theta.begin(), theta.begin() + 4));
        Vec wl(std::vector<double>(theta.begin() + 4, theta.end()));
        return -std::log(softmax(cl)[tc] * softmax(wl)[pos]);
      };
      std::vector<double> joined(class_logits.begin(), class_logits.end());
      joined.insert(joined.end(), word_logits.begin(), word_logits.end());
      const Vec numeric = finite_diff_grad(loss, Vec(joined), 1e-6);

      StepOutput out;
      out.class_probs = softmax(class_logits);
      out.word_probs.emplace_back(tc, softmax(word_logits));
      const auto err = output_error(out, target, vocab);
      std::vector<double> analytic(err.class_delta.begin(), err.class_delta.end());
      analytic.insert(analytic.end(), err.word_delta.begin(), err.word_delta.end());
      CHECK(testing::relative_error(analytic, numeric) < 1e-6);
    }
  }
}

TEST_CASE("doc_online_update") {
  Rng rng(2);
  const auto vocab = testing::random_vocab(8, 3, rng);
  const auto p = testing::random_model({3, 3, 8, 3}, vocab, rng);
  const auto s = testing::random_sentence(vocab, 3, rng);
  const auto trace = sentence_forward(p, vocab, s, {}).trace;
  const auto& step = trace.steps[1];

  CHECK(doc_online_update(p, vocab, step.out, step.target, step.doc, 0.0) == step.doc);

  ModelParams zero_doc = p;
  for (double& x : zero_doc.doc_class.flat()) x = 0.0;
  for (double& x : zero_doc.doc_word.flat()) x = 0.0;
  CHECK(doc_online_update(zero_doc, vocab, step.out, step.target, step.doc, 0.7) == step.doc);

  const Vec before = step.doc;
  const Vec after = doc_online_update(p, vocab, step.out, step.target, step.doc, 0.1);
  CHECK(step.doc == before);
  CHECK_FALSE(after == before);

  for (int trial = 0; trial < 10; ++trial) {
    const auto m = testing::random_model({3, 3, 8, 3}, vocab, rng);
    CHECK(testing::max_doc_update_error(m, vocab, testing::random_sentence(vocab, 4, rng), 0.1, 1e-5) < 1e-4);
  }

  const ModelParams plain(ParamSet::zeros({3, 0, 8, 3}));
  CHECK_THROWS_AS(doc_online_update(plain, vocab, step.out, step.target, Vec{}, 0.1), Error);
}

TEST_CASE("bptt_sentence") {
  Rng rng(3);

  SUBCASE("hidden_class gradient of a one-word sentence") {
    const auto vocab = testing::random_vocab(6, 2, rng);
    const auto p = testing::random_model({3, 2, 6, 2}, vocab, rng);
    const std::vector<WordId> s{vocab.start_id(), 4, vocab.end_id()};
    for (const auto& c : testing::check_sentence_gradients(p, vocab, s, {true, 0.1}, 1e-5)) {
      if (c.block == "hidden_class") CHECK(c.rel_error < 1e-4);
    }
  }

  SUBCASE("hidden_start gradient of a three-token sentence") {
    const auto vocab = testing::random_vocab(7, 3, rng);
    const auto p = testing::random_model({4, 0, 7, 3}, vocab, rng);
    const std::vector<WordId> s{vocab.start_id(), 3, 5, vocab.end_id()};
    const auto checks = testing::check_sentence_gradients(p, vocab, s, {}, 1e-5);
    bool seen = false;
    for (const auto& c : checks) {
      if (c.block != "hidden_start") continue;
      seen = true;
      CHECK(c.rel_error < 1e-4);
    }
    CHECK(seen);
  }

  SUBCASE("every block on random models, with and without online updates") {
    for (int trial = 0; trial < 12; ++trial) {
      const auto v = static_cast<std::uint32_t>(4 + rng.below(5));
      const auto c = static_cast<std::uint32_t>(1 + rng.below(3));
      const auto vocab = testing::random_vocab(v, c, rng);
      const Dims dims{static_cast<std::uint32_t>(1 + rng.below(4)),
                      static_cast<std::uint32_t>(rng.below(4)), v, c};
      const auto p = testing::random_model(dims, vocab, rng);
      const auto s = testing::random_sentence(vocab, rng.below(4), rng);
      const OnlinePolicy online{dims.doc > 0 && trial % 2 == 0, 0.1};
      for (const auto& check : testing::check_sentence_gradients(p, vocab, s, online, 1e-5)) {
        INFO("block " << check.block << " trial " << trial);
        CHECK(check.rel_error < 1e-4);
      }
    }
  }

  SUBCASE("without online updates the weight gradients are the exact loss gradient") {
    const auto vocab = testing::random_vocab(6, 2, rng);
    const auto p = testing::random_model({3, 2, 6, 2}, vocab, rng);
    const auto s = testing::random_sentence(vocab, 3, rng);
    const auto g = bptt_sentence(p, sentence_forward(p, vocab, s, {}).trace, vocab);
    ModelParams probe = p;
    const Vec numeric = finite_diff_grad(
        [&](const Vec& t) {
          std::copy(t.begin(), t.end(), probe.doc_word.flat().begin());
          return oracle::sentence_nll_static(probe, vocab, s);
        },
        Vec(std::vector<double>(p.doc_word.flat().begin(), p.doc_word.flat().end())), 1e-5);
    CHECK(testing::relative_error(g.doc_word.flat(), numeric) < 1e-4);
  }

  SUBCASE("zero output error gives zero gradients") {
    const auto vocab = testing::random_vocab(6, 2, rng);
    const auto p = testing::random_model({3, 2, 6, 2}, vocab, rng);
    const auto s = testing::random_sentence(vocab, 3, rng);
    auto trace = sentence_forward(p, vocab, s, {}).trace;
    for (auto& step : trace.steps) {
      const ClassId tc = vocab.classes().class_of(step.target);
      step.out.class_probs = Vec(2);
      step.out.class_probs[tc] = 1.0;
      Vec in_class(vocab.classes().members(tc).size());
      in_class[vocab.classes().position_in_class(step.target)] = 1.0;
      step.out.word_probs = {{tc, in_class}};
    }
    const auto g = bptt_sentence(p, trace, vocab);
    for (const auto& block : g.blocks()) {
      for (double x : block.values) CHECK(x == 0.0);
    }
  }

  SUBCASE("trace from another model is rejected") {
    const auto vocab = testing::random_vocab(6, 2, rng);
    const auto small = testing::random_model({2, 1, 6, 2}, vocab, rng);
    const auto large = testing::random_model({3, 1, 6, 2}, vocab, rng);
    const auto trace = sentence_forward(small, vocab, testing::random_sentence(vocab, 2, rng), {}).trace;
    CHECK_THROWS_AS(bptt_sentence(large, trace, vocab), Error);
  }
}

TEST_CASE("train_sentence") {
  Rng rng(4);
  const auto vocab = testing::random_vocab(8, 3, rng);
  const auto p0 = testing::random_model({4, 2, 8, 3}, vocab, rng, 0.1);
  const auto s = testing::random_sentence(vocab, 5, rng);

  SUBCASE("zero learning rates leave parameters untouched") {
    TrainConfig cfg;
    cfg.general_lr = 0.0;
    cfg.doc_lr = 0.0;
    ModelParams p = p0;
    const double nll = train_sentence(p, s, cfg, vocab);
    CHECK(p.bit_equal(p0));
    CHECK(nll == sentence_forward(p0, vocab, s, {}).nll);
  }

  SUBCASE("repeated training on one sentence lowers its loss") {
    TrainConfig cfg;
    cfg.general_lr = 0.01;
    ModelParams p = p0;
    double prev = INFINITY;
    int upticks = 0;
    double first = 0.0, last = 0.0;
    for (int it = 0; it < 50; ++it) {
      const double nll = train_sentence(p, s, cfg, vocab);
      if (it == 0) first = nll;
      last = nll;
      if (nll > prev) ++upticks;
      prev = nll;
    }
    CHECK(upticks <= 3);
    CHECK(last < first);
  }

  SUBCASE("deterministic") {
    TrainConfig cfg;
    ModelParams a = p0, b = p0;
    for (int it = 0; it < 5; ++it) {
      train_sentence(a, s, cfg, vocab);
      train_sentence(b, s, cfg, vocab);
    }
    CHECK(a.bit_equal(b));
    CHECK_FALSE(a.bit_equal(p0));
  }

  SUBCASE("online evaluation never touches the parameters") {
    const ModelParams copy = p0;
    sentence_forward(p0, vocab, s, {true, 0.3});
    CHECK(copy.bit_equal(p0));
  }

  SUBCASE("gradient clipping bounds each step") {
    TrainConfig cfg;
    cfg.general_lr = 1.0;
    cfg.gradient_clip = 1e-3;
    ModelParams p = p0;
    train_sentence(p, s, cfg, vocab);
    const auto before = p0.blocks();
    const auto after = p.blocks();
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
      for (std::size_t i = 0; i < before[b].values.size(); ++i) {
        CHECK(std::fabs(after[b].values[i] - before[b].values[i]) <= 1e-3 + 1e-15);
      }
    }
  }
}

namespace {

double unigram_perplexity(const Dataset& train_set, const Dataset& eval_set) {
  std::map<WordId, double> counts;
  for (const auto& s : train_set.sentences) {
    for (std::size_t i = 1; i < s.size(); ++i) counts[s[i]] += 1.0;
  }
  double nll = 0.0;
  for (const auto& s : eval_set.sentences) {
    for (std::size_t i = 1; i < s.size(); ++i) {
      nll -= std::log(counts[s[i]] / static_cast<double>(train_set.token_count));
    }
  }
  return std::exp(nll / static_cast<double>(eval_set.token_count));
}

}  // namespace

TEST_CASE("train") {
  const auto corpus = testing::make_markov_corpus(400, 31);
  auto vocab = build_vocab(corpus, 1);
  vocab.set_classes(assign_classes(vocab, 3));
  const std::vector<TokenSentence> train_part(corpus.begin(), corpus.begin() + 300);
  const std::vector<TokenSentence> dev_part(corpus.begin() + 300, corpus.end());
  const auto train_set = encode(train_part, vocab);
  const auto dev_set = encode(dev_part, vocab);
  const Dims dims{8, 0, vocab.size(), vocab.num_classes()};

  TrainConfig cfg;
  cfg.max_epochs = 10;
  Rng rng(cfg.seed);
  const auto init = init_params(dims, vocab.classes(), rng, cfg.init_scale);

  SUBCASE("no epochs returns the initial parameters") {
    TrainConfig none = cfg;
    none.max_epochs = 0;
    const auto r = train(init, train_set, dev_set, none, vocab);
    CHECK(r.params.bit_equal(init));
    CHECK(r.epochs.empty());
    CHECK(std::isfinite(r.initial_dev_ppl));
  }

  SUBCASE("beats the unigram model on a Markov corpus") {
    std::vector<EpochReport> seen;
    const auto r = train(init, train_set, dev_set, cfg, vocab,
                         [&](const EpochReport& e) { seen.push_back(e); });
    REQUIRE(!r.epochs.empty());
    CHECK(seen.size() == r.epochs.size());
    const double best = evaluate_perplexity(r.params, vocab, dev_set, {}).perplexity;
    CHECK(best < unigram_perplexity(train_set, dev_set));
    CHECK(r.epochs.front().learning_rate == cfg.general_lr);
    for (const auto& e : r.epochs) CHECK(std::isfinite(e.dev_ppl));
  }

  SUBCASE("identical seeds give identical epochs") {
    TrainConfig short_cfg = cfg;
    short_cfg.max_epochs = 3;
    const auto a = train(init, train_set, dev_set, short_cfg, vocab);
    const auto b = train(init, train_set, dev_set, short_cfg, vocab);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) CHECK(a.epochs[i].dev_ppl == b.epochs[i].dev_ppl);
    CHECK(a.params.bit_equal(b.params));
  }

  SUBCASE("one document reset per sentence per epoch") {
    Rng drng(9);
    const Dims doc_dims{6, 3, vocab.size(), vocab.num_classes()};
    const auto doc_init = init_params(doc_dims, vocab.classes(), drng, 0.1);
    TrainConfig two = cfg;
    two.max_epochs = 2;
    two.decay_trigger = 0.0;
    const auto r = train(doc_init, train_set, dev_set, two, vocab);
    CHECK(r.doc_resets == r.epochs.size() * train_set.sentences.size());
  }

  SUBCASE("invalid configuration") {
    TrainConfig bad = cfg;
    bad.lr_decay_factor = 1.5;
    CHECK_THROWS_AS(train(init, train_set, dev_set, bad, vocab), Error);
    CHECK_THROWS_AS(train(init, Dataset{}, dev_set, cfg, vocab), Error);
  }
}
