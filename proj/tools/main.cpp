// dvrnnlm: command-line front end. Talks to the library only through the C API.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dvrnn/dvrnn.h"
#include "run_config.hpp"

namespace fs = std::filesystem;
using dvrnn::cli::RunConfig;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(dvr_status s) {
  if (s == DVR_OK) return;
  const std::string detail = dvr_last_error();
  throw Failure(detail.empty() ? dvr_status_name(s) : detail);
}

struct VocabDeleter { void operator()(dvr_vocab* p) const { dvr_vocab_free(p); } };
struct DatasetDeleter { void operator()(dvr_dataset* p) const { dvr_dataset_free(p); } };
struct ModelDeleter { void operator()(dvr_model* p) const { dvr_model_free(p); } };
struct VectorsDeleter { void operator()(dvr_vectors* p) const { dvr_vectors_free(p); } };
using Vocab = std::unique_ptr<dvr_vocab, VocabDeleter>;
using Dataset = std::unique_ptr<dvr_dataset, DatasetDeleter>;
using Model = std::unique_ptr<dvr_model, ModelDeleter>;
using Vectors = std::unique_ptr<dvr_vectors, VectorsDeleter>;

Vocab build_vocab(const std::string& path, std::uint32_t min_count, std::uint32_t classes,
                  bool lowercase) {
  // Build once with a single class to learn V, then clamp C to it.
  dvr_vocab* raw = nullptr;
  check(dvr_vocab_build(path.c_str(), min_count, 1, lowercase, &raw));
  Vocab probe(raw);
  const std::uint32_t v = dvr_vocab_size(probe.get());
  if (classes > v) {
    std::fprintf(stderr, "note: %u classes requested but the vocabulary has %u words; using %u\n",
                 classes, v, v);
    classes = v;
  }
  if (classes == 1) return probe;
  check(dvr_vocab_build(path.c_str(), min_count, classes, lowercase, &raw));
  return Vocab(raw);
}

Vocab load_vocab(const std::string& path) {
  dvr_vocab* raw = nullptr;
  check(dvr_vocab_load(path.c_str(), &raw));
  return Vocab(raw);
}

Dataset load_dataset(const dvr_vocab* vocab, const std::string& path, bool lowercase) {
  dvr_dataset* raw = nullptr;
  check(dvr_dataset_load(vocab, path.c_str(), lowercase, &raw));
  return Dataset(raw);
}

Model load_model(const std::string& path) {
  dvr_model* raw = nullptr;
  check(dvr_model_load(path.c_str(), &raw));
  return Model(raw);
}

Vocab vocab_for(const RunConfig& cfg) {
  return cfg.vocab.empty() ? build_vocab(cfg.train, cfg.min_count, cfg.classes, cfg.lowercase)
                           : load_vocab(cfg.vocab);
}

dvr_train_config train_config(const RunConfig& cfg) {
  dvr_train_config tc;
  dvr_train_config_init(&tc);
  tc.learning_rate = cfg.lr;
  tc.doc_learning_rate = cfg.doc_lr;
  tc.lr_decay_factor = cfg.lr_decay;
  tc.decay_trigger = cfg.decay_trigger;
  tc.max_epochs = cfg.max_epochs;
  tc.use_gradient_clip = cfg.gradient_clip.has_value();
  tc.gradient_clip = cfg.gradient_clip.value_or(0.0);
  tc.threads = cfg.threads;
  return tc;
}

std::string sentence_text(const dvr_dataset* ds, const dvr_vocab* vocab, std::size_t i) {
  std::size_t needed = 0;
  check(dvr_dataset_sentence_text(ds, vocab, i, nullptr, 0, &needed));
  std::string buf(needed, '\0');
  check(dvr_dataset_sentence_text(ds, vocab, i, buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

RunConfig config_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  RunConfig cfg = path.empty() ? RunConfig{} : dvrnn::cli::load_config(path);
  for (const auto& s : sets) dvrnn::cli::apply_override(cfg, s);
  return cfg;
}

// ---- subcommands ------------------------------------------------------------

struct PreprocessArgs {
  std::string input, output, vocab_out = "vocab.txt", vocab_in;
  std::uint32_t min_count = 30, classes = 100;
  std::uint64_t seed = 1;
  bool lowercase = false, shuffle = false;
};

int cmd_preprocess(const PreprocessArgs& a) {
  std::string source = a.input;
  std::string shuffled;
  if (a.shuffle) {
    shuffled = a.output + ".shuffled.tmp";
    check(dvr_shuffle_lines(a.input.c_str(), shuffled.c_str(), a.seed));
    source = shuffled;
  }
  const auto cleanup = [&] {
    if (!shuffled.empty()) fs::remove(shuffled);
  };
  try {
    Vocab vocab = a.vocab_in.empty() ? build_vocab(source, a.min_count, a.classes, a.lowercase)
                                     : load_vocab(a.vocab_in);
    Dataset data = load_dataset(vocab.get(), source, a.lowercase);
    if (a.vocab_in.empty()) check(dvr_vocab_save(vocab.get(), a.vocab_out.c_str()));
    check(dvr_dataset_save_encoded(data.get(), a.output.c_str()));
    std::printf("sentences=%zu tokens=%zu vocab=%u classes=%u\n", dvr_dataset_num_sentences(data.get()),
                dvr_dataset_num_tokens(data.get()), dvr_vocab_size(vocab.get()),
                dvr_vocab_num_classes(vocab.get()));
  } catch (...) {
    cleanup();
    throw;
  }
  cleanup();
  return 0;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  bool dump = false;
};

struct EpochLog {
  std::ofstream* log;
};

void on_epoch(const dvr_epoch_report* r, void* user) {
  char line[160];
  std::snprintf(line, sizeof line, "%u\t%.4f\t%.4f\t%.6g\n", r->epoch, r->train_ppl, r->dev_ppl,
                r->learning_rate);
  auto* log = static_cast<EpochLog*>(user)->log;
  *log << line << std::flush;
  std::fputs(line, stdout);
  std::fflush(stdout);
}

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = config_with_overrides(a.config, a.sets);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  if (a.dump) {
    std::fputs(dvrnn::cli::dump_config(cfg).c_str(), stdout);
    return 0;
  }
  dvrnn::cli::validate(cfg, true, false);

  Vocab vocab = vocab_for(cfg);
  Dataset train = load_dataset(vocab.get(), cfg.train, cfg.lowercase);
  Dataset dev = load_dataset(vocab.get(), cfg.dev, cfg.lowercase);

  dvr_model* raw = nullptr;
  check(dvr_model_create(vocab.get(), cfg.hidden, cfg.doc, cfg.seed, cfg.init_scale, &raw));
  Model model(raw);

  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  std::ofstream log(out / "train.log", std::ios::binary | std::ios::trunc);
  if (!log) throw Failure((out / "train.log").string() + ": cannot open for writing");
  EpochLog ctx{&log};
  const dvr_train_config tc = train_config(cfg);
  check(dvr_model_train(model.get(), train.get(), dev.get(), &tc, on_epoch, &ctx));

  check(dvr_model_save(model.get(), (out / "model.bin").string().c_str()));
  check(dvr_vocab_save(dvr_model_vocab(model.get()), (out / "vocab.txt").string().c_str()));
  {
    std::ofstream echo(out / "config.txt", std::ios::binary | std::ios::trunc);
    echo << dvrnn::cli::dump_config(cfg);
  }

  if (!cfg.test.empty()) {
    Dataset test = load_dataset(vocab.get(), cfg.test, cfg.lowercase);
    dvr_eval_report r;
    check(dvr_model_evaluate(model.get(), test.get(), cfg.doc > 0, cfg.doc_lr, cfg.threads, &r, nullptr));
    std::printf("test ppl=%.4f tokens=%" PRIu64 " nll=%.6f\n", r.perplexity, r.tokens, r.total_nll);
  }
  return 0;
}

struct EvalArgs {
  std::string model, dataset;
  bool online = false, per_sentence = false, lowercase = false;
  double doc_lr = 0.1;
  std::uint32_t threads = 1;
};

int cmd_eval(const EvalArgs& a) {
  Model model = load_model(a.model);
  if (a.online && dvr_model_dims(model.get()).doc == 0) throw Failure("model has no document vector");
  Dataset data = load_dataset(dvr_model_vocab(model.get()), a.dataset, a.lowercase);
  std::vector<double> nll(dvr_dataset_num_sentences(data.get()));
  dvr_eval_report r;
  check(dvr_model_evaluate(model.get(), data.get(), a.online, a.doc_lr, a.threads, &r, nll.data()));
  std::printf("ppl=%.4f tokens=%" PRIu64 " nll=%.6f\n", r.perplexity, r.tokens, r.total_nll);
  if (a.per_sentence) {
    for (std::size_t i = 0; i < nll.size(); ++i) std::printf("%zu\t%.6f\n", i, nll[i]);
  }
  return 0;
}

struct CostsArgs {
  std::string mode = "hidden";
  std::int64_t m = 0, x = 0, d = 0, v = 0, c = 0;
  double eo = 0.0;
};

int cmd_costs(const CostsArgs& a) {
  std::int64_t params = 0, ops = 0;
  std::int64_t m = a.m, doc = 0;
  std::string label;
  if (a.mode == "hidden") {
    check(dvr_costs_hidden(a.x, a.m, a.v, a.c, a.eo, &params, &ops));
    m = a.m + a.x;
    label = "hidden+" + std::to_string(a.x);
  } else if (a.mode == "doc") {
    check(dvr_costs_doc(a.d, a.v, a.c, a.eo, &params, &ops));
    doc = a.d;
    label = "doc+" + std::to_string(a.d);
  } else {
    throw Failure("--mode must be hidden or doc");
  }
  std::printf("added_params=%" PRId64 " added_ops=%" PRId64 "\n", params, ops);
  std::printf("label,M,D,added_params,added_ops,test_ppl\n");
  std::printf("%s,%" PRId64 ",%" PRId64 ",%" PRId64 ",%" PRId64 ",\n", label.c_str(), m, doc, params, ops);
  return 0;
}

struct SweepArgs {
  std::string config, pairs, output;
  std::vector<std::string> sets;
  std::uint32_t repeat = 1, jobs = 1;
};

std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    unsigned m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(item.c_str(), " %u:%u %c", &m, &d, &tail) != 2 || m == 0) {
      throw Failure("--pairs: expected M:D entries separated by commas, got '" + item + "'");
    }
    out.emplace_back(m, d);
  }
  if (out.empty()) throw Failure("--pairs: no configurations given");
  return out;
}

int cmd_sweep(const SweepArgs& a) {
  const RunConfig cfg = config_with_overrides(a.config, a.sets);
  dvrnn::cli::validate(cfg, true, true);
  const auto pairs = parse_pairs(a.pairs);
  if (a.repeat == 0) throw Failure("--repeat must be at least 1");

  Vocab vocab = vocab_for(cfg);
  Dataset train = load_dataset(vocab.get(), cfg.train, cfg.lowercase);
  Dataset dev = load_dataset(vocab.get(), cfg.dev, cfg.lowercase);
  Dataset test = load_dataset(vocab.get(), cfg.test, cfg.lowercase);
  double eo = 0.0;
  check(dvr_vocab_expected_class_size(vocab.get(), &eo));
  const std::int64_t v = dvr_vocab_size(vocab.get()), c = dvr_vocab_num_classes(vocab.get());
  const std::int64_t base_m = cfg.baseline_m.value_or(cfg.hidden);

  struct Job {
    std::uint32_t m, d;
    std::uint64_t seed;
    std::string row;
    bool ok = false;
  };
  std::vector<Job> jobs;
  for (const auto& [m, d] : pairs) {
    for (std::uint32_t r = 0; r < a.repeat; ++r) jobs.push_back({m, d, cfg.seed + r, {}, false});
  }

  const dvr_train_config tc = train_config(cfg);
  const auto run = [&](Job& job) {
    std::int64_t hp = 0, ho = 0, dp = 0, dop = 0;
    std::string ppl, status = "ok";
    try {
      check(dvr_costs_hidden(job.m - base_m, base_m, v, c, eo, &hp, &ho));
      check(dvr_costs_doc(job.d, v, c, eo, &dp, &dop));
      dvr_model* raw = nullptr;
      check(dvr_model_create(vocab.get(), job.m, job.d, job.seed, cfg.init_scale, &raw));
      Model model(raw);
      check(dvr_model_train(model.get(), train.get(), dev.get(), &tc, nullptr, nullptr));
      dvr_eval_report r;
      check(dvr_model_evaluate(model.get(), test.get(), job.d > 0, cfg.doc_lr, 1, &r, nullptr));
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", r.perplexity);
      ppl = buf;
      job.ok = true;
    } catch (const std::exception& e) {
      status = std::string("error: ") + e.what();
    }
    std::ostringstream row;
    row << "M" << job.m << "_D" << job.d << ',' << job.m << ',' << job.d << ',' << hp + dp << ','
        << ho + dop << ',' << ppl << ',' << job.seed << ',' << csv_field(status) << '\n';
    job.row = row.str();
  };

  // Workers take jobs in order; rows are written by this thread in job order.
  std::mutex mu;
  std::size_t next = 0;
  {
    std::vector<std::jthread> workers;
    for (std::uint32_t w = 0; w < std::max<std::uint32_t>(1, a.jobs); ++w) {
      workers.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next == jobs.size()) return;
            i = next++;
          }
          run(jobs[i]);
        }
      });
    }
  }

  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output, std::ios::binary | std::ios::trunc);
    if (!file) throw Failure(a.output + ": cannot open for writing");
  }
  std::ostream& out = a.output.empty() ? std::cout : file;
  out << "label,M,D,added_params,added_ops,test_ppl,seed,status\n";
  int failed = 0;
  for (const auto& job : jobs) {
    out << job.row;
    if (!job.ok) ++failed;
  }
  out.flush();
  if (failed) {
    std::fprintf(stderr, "error: %d of %zu runs failed\n", failed, jobs.size());
    return 1;
  }
  return 0;
}

struct SimilarArgs {
  std::string model, dataset, vectors_csv;
  std::size_t query = 0, k = 5;
  double doc_lr = 0.1;
  bool lowercase = false;
};

int cmd_similar(const SimilarArgs& a) {
  Model model = load_model(a.model);
  const dvr_vocab* vocab = dvr_model_vocab(model.get());
  Dataset data = load_dataset(vocab, a.dataset, a.lowercase);
  dvr_vectors* raw = nullptr;
  check(dvr_sentence_vectors(model.get(), data.get(), a.doc_lr, &raw));
  Vectors vectors(raw);

  if (!a.vectors_csv.empty()) {
    std::ofstream csv(a.vectors_csv, std::ios::binary | std::ios::trunc);
    if (!csv) throw Failure(a.vectors_csv + ": cannot open for writing");
    const std::uint32_t dim = dvr_vectors_dim(vectors.get());
    csv << "index";
    for (std::uint32_t j = 0; j < dim; ++j) csv << ",v" << j;
    csv << '\n';
    char buf[40];
    for (std::size_t i = 0; i < dvr_vectors_count(vectors.get()); ++i) {
      const double* row = dvr_vectors_row(vectors.get(), i);
      csv << i;
      for (std::uint32_t j = 0; j < dim; ++j) {
        std::snprintf(buf, sizeof buf, ",%.17g", row[j]);
        csv << buf;
      }
      csv << '\n';
    }
  }

  std::vector<std::size_t> idx(a.k);
  std::vector<double> sim(a.k);
  std::size_t found = 0, skipped = 0;
  check(dvr_vectors_nearest(vectors.get(), a.query, a.k, idx.data(), sim.data(), &found, &skipped));
  if (skipped) std::fprintf(stderr, "warning: %zu zero-norm sentence vectors skipped\n", skipped);
  for (std::size_t r = 0; r < found; ++r) {
    std::printf("%zu\t%zu\t%.6f\t%s\n", r + 1, idx[r], sim[r],
                sentence_text(data.get(), vocab, idx[r]).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent language model with an online document vector"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Build a vocabulary and encode a corpus");
  p->add_option("--input", pre.input, "Corpus, one sentence per line")->required()->check(CLI::ExistingFile);
  p->add_option("--output", pre.output, "Encoded dataset to write")->required();
  p->add_option("--vocab-out", pre.vocab_out, "Vocabulary file to write")->capture_default_str();
  p->add_option("--vocab-in", pre.vocab_in, "Encode with an existing vocabulary instead")
      ->check(CLI::ExistingFile);
  p->add_option("--min-count", pre.min_count, "Words seen fewer times become <unk>")->capture_default_str();
  p->add_option("--classes", pre.classes, "Output classes")->capture_default_str();
  p->add_option("--seed", pre.seed, "Shuffle seed")->capture_default_str();
  p->add_flag("--lowercase", pre.lowercase, "Lowercase tokens");
  p->add_flag("--shuffle", pre.shuffle, "Shuffle sentences before encoding");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model from a config file");
  t->add_option("--config", tr.config, "key=value config file")->check(CLI::ExistingFile);
  t->add_option("--set", tr.sets, "Override a config key (key=value)")->take_all();
  t->add_option("--seed", tr.seed, "Override the seed");
  t->add_option("--output-dir", tr.output_dir, "Override the output directory");
  t->add_flag("--dump-config", tr.dump, "Print the effective config and exit");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Perplexity of a model on a dataset");
  e->add_option("model", ev.model)->required()->check(CLI::ExistingFile);
  e->add_option("dataset", ev.dataset)->required()->check(CLI::ExistingFile);
  e->add_flag("--online", ev.online, "Adapt the document vector while scoring");
  e->add_option("--doc-lr", ev.doc_lr, "Online document-vector rate")->capture_default_str();
  e->add_flag("--per-sentence", ev.per_sentence, "Also print each sentence's NLL");
  e->add_option("--threads", ev.threads)->capture_default_str()->check(CLI::PositiveNumber);
  e->add_flag("--lowercase", ev.lowercase, "Lowercase a raw-text dataset");

  CostsArgs co;
  auto* c = app.add_subcommand("costs", "Added parameters and operations per step");
  c->add_option("--mode", co.mode, "hidden or doc")->capture_default_str()
      ->check(CLI::IsMember({"hidden", "doc"}));
  c->add_option("-M,--hidden", co.m, "Base hidden size");
  c->add_option("-X,--grow", co.x, "Hidden-layer growth (hidden mode)");
  c->add_option("-D,--doc", co.d, "Document vector size (doc mode)");
  c->add_option("-V,--vocab", co.v, "Vocabulary size")->required();
  c->add_option("-C,--classes", co.c, "Classes")->required();
  c->add_option("--eo", co.eo, "Expected class size E[O]")->required();

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Train and test several (M, D) configurations");
  s->add_option("--config", sw.config, "key=value config file")->required()->check(CLI::ExistingFile);
  s->add_option("--pairs", sw.pairs, "Configurations as M:D,M:D,...")->required();
  s->add_option("--repeat", sw.repeat, "Seeds per configuration (seed, seed+1, ...)")->capture_default_str();
  s->add_option("--set", sw.sets, "Override a config key (key=value)")->take_all();
  s->add_option("--jobs", sw.jobs, "Parallel training runs")->capture_default_str();
  s->add_option("--output", sw.output, "CSV file (default: standard output)");

  SimilarArgs si;
  auto* m = app.add_subcommand("similar", "Nearest sentences by document-vector cosine");
  m->add_option("model", si.model)->required()->check(CLI::ExistingFile);
  m->add_option("dataset", si.dataset)->required()->check(CLI::ExistingFile);
  m->add_option("--query", si.query, "Query sentence index")->required();
  m->add_option("--k", si.k, "Neighbours to list")->capture_default_str();
  m->add_option("--doc-lr", si.doc_lr, "Online document-vector rate")->capture_default_str();
  m->add_option("--vectors-csv", si.vectors_csv, "Also write every sentence vector as CSV");
  m->add_flag("--lowercase", si.lowercase, "Lowercase a raw-text dataset");

  std::string sh_in, sh_out;
  std::uint64_t sh_seed = 1;
  auto* h = app.add_subcommand("shuffle", "Shuffle the lines of a file");
  h->add_option("--input", sh_in)->required()->check(CLI::ExistingFile);
  h->add_option("--output", sh_out)->required();
  h->add_option("--seed", sh_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*p) return cmd_preprocess(pre);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*c) return cmd_costs(co);
    if (*s) return cmd_sweep(sw);
    if (*m) return cmd_similar(si);
    if (*h) {
      check(dvr_shuffle_lines(sh_in.c_str(), sh_out.c_str(), sh_seed));
      return 0;
    }
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 1;
}
