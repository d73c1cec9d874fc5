// Runs the dvrnnlm executable end to end.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dvrnn/dvrnn.h"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "dvrnnlm_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string f; std::getline(in, f, sep);) out.push_back(f);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

struct Run {
  int status = -1;
  std::string out, err;
};

Run run(const std::string& args) {
  const auto out = kDir / "stdout.txt", err = kDir / "stderr.txt";
  const std::string cmd = "cd '" + kDir.string() + "' && '" DVRNNLM_BIN "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

// Two loosely separated topics plus shared filler words.
void write_topic_files() {
  unsigned state = 12345;
  const auto next = [&] { return state = state * 1103515245u + 12345u, (state >> 16) & 0x7fff; };
  const auto make = [&](const std::string& name, int n) {
    std::ofstream f(kDir / name);
    for (int i = 0; i < n; ++i) {
      const int topic = next() % 2;
      const int len = 4 + next() % 6;
      for (int j = 0; j < len; ++j) {
        if (j) f << ' ';
        if (next() % 4 == 0) f << (next() % 2 ? "x" : "y");
        else f << (topic ? 'a' : 'b') << next() % 6;
      }
      f << '\n';
    }
  };
  make("train.txt", 150);
  make("dev.txt", 30);
  make("test.txt", 30);
  spit(kDir / "run.cfg",
       "# toy configuration\n"
       "train=train.txt\n"
       "dev=dev.txt\n"
       "test=test.txt\n"
       "hidden=8\n"
       "doc=4\n"
       "classes=4\n"
       "min_count=1\n"
       "max_epochs=2\n");
}

struct Setup {
  Setup() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    write_topic_files();
  }
  ~Setup() { fs::remove_all(kDir); }
};

}  // namespace

TEST_CASE("dvrnnlm command line") {
  Setup setup;

  SUBCASE("preprocess") {
    spit(kDir / "toy.txt", "the cat sat\nthe dog ran\na cat ran\n");
    auto r = run("preprocess --input toy.txt --output toy.ids --vocab-out toy.vocab --min-count 1 --classes 2");
    REQUIRE(r.status == 0);
    const auto vocab = lines(slurp(kDir / "toy.vocab"));
    CHECK(split(vocab[0], ' ')[0] == "9");  // 6 distinct words + 3 specials
    CHECK(vocab.size() == 10);

    r = run("preprocess --input toy.txt --output a.ids --vocab-out a.vocab --min-count 1 --classes 2 --shuffle --seed 4");
    REQUIRE(r.status == 0);
    r = run("preprocess --input toy.txt --output b.ids --vocab-out b.vocab --min-count 1 --classes 2 --shuffle --seed 4");
    REQUIRE(r.status == 0);
    CHECK(slurp(kDir / "a.ids") == slurp(kDir / "b.ids"));
    CHECK(slurp(kDir / "a.vocab") == slurp(kDir / "b.vocab"));

    // "sat", "dog" and "a" occur once and fall below min-count 2.
    r = run("preprocess --input toy.txt --output c.ids --vocab-out c.vocab --min-count 2 --classes 2");
    REQUIRE(r.status == 0);
    std::string unk_id;
    const auto vocab_lines = lines(slurp(kDir / "c.vocab"));
    for (std::size_t i = 1; i < vocab_lines.size(); ++i) {
      if (split(vocab_lines[i], '\t')[0] == "<unk>") unk_id = std::to_string(i - 1);
    }
    REQUIRE(!unk_id.empty());
    const auto encoded = lines(slurp(kDir / "c.ids"));
    REQUIRE(encoded.size() == 4);
    CHECK(split(encoded[1], ' ')[3] == unk_id);  // "the cat sat" -> sat
    CHECK(split(encoded[2], ' ')[2] == unk_id);  // "the dog ran" -> dog

    spit(kDir / "empty.txt", "\n\n");
    r = run("preprocess --input empty.txt --output e.ids");
    CHECK(r.status != 0);
    CHECK(r.err.find("empty corpus") != std::string::npos);
  }

  SUBCASE("train, eval, determinism") {
    auto r = run("train --config run.cfg --output-dir out1");
    REQUIRE(r.status == 0);
    const auto log = lines(slurp(kDir / "out1/train.log"));
    REQUIRE(log.size() == 2);
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto f = split(log[i], '\t');
      REQUIRE(f.size() == 4);
      CHECK(f[0] == std::to_string(i + 1));
      CHECK(std::isfinite(std::stod(f[2])));
    }
    CHECK(fs::exists(kDir / "out1/vocab.txt"));
    REQUIRE(run("train --config run.cfg --output-dir out2").status == 0);
    CHECK(slurp(kDir / "out1/model.bin") == slurp(kDir / "out2/model.bin"));
    REQUIRE(run("train --config run.cfg --output-dir out3 --seed 2").status == 0);
    CHECK(slurp(kDir / "out1/model.bin") != slurp(kDir / "out3/model.bin"));

    const auto first = run("eval out1/model.bin test.txt --online --per-sentence");
    const auto second = run("eval out1/model.bin test.txt --online --per-sentence");
    REQUIRE(first.status == 0);
    CHECK(first.out == second.out);
    CHECK(first.out.starts_with("ppl="));
    CHECK(lines(first.out).size() == 31);

    // A dataset encoded with an unrelated vocabulary.
    spit(kDir / "other.txt", "p q r\n");
    REQUIRE(run("preprocess --input other.txt --output other.ids --vocab-out other.vocab --min-count 1 --classes 1").status == 0);
    r = run("eval out1/model.bin other.ids");
    CHECK(r.status != 0);
    CHECK(r.err.find("vocabulary") != std::string::npos);
  }

  SUBCASE("max_epochs=0 writes the initialized model") {
    REQUIRE(run("train --config run.cfg --set max_epochs=0 --output-dir init").status == 0);
    CHECK(slurp(kDir / "init/train.log").empty());

    dvr_vocab* vocab = nullptr;
    REQUIRE(dvr_vocab_load((kDir / "init/vocab.txt").c_str(), &vocab) == DVR_OK);
    dvr_model* model = nullptr;
    REQUIRE(dvr_model_create(vocab, 8, 4, 1, 0.1, &model) == DVR_OK);
    REQUIRE(dvr_model_save(model, (kDir / "fresh.bin").c_str()) == DVR_OK);
    CHECK(slurp(kDir / "init/model.bin") == slurp(kDir / "fresh.bin"));
    dvr_model_free(model);
    dvr_vocab_free(vocab);
  }

  SUBCASE("uniform model and the missing document vector") {
    REQUIRE(run("train --config run.cfg --set max_epochs=0 init_scale=0 classes=100000 doc=0 "
                "--output-dir zero").status == 0);
    const auto v = split(lines(slurp(kDir / "zero/vocab.txt"))[0], ' ');
    CHECK(v[0] == v[1]);  // C = V
    const auto r = run("eval zero/model.bin test.txt");
    REQUIRE(r.status == 0);
    CHECK(r.out.starts_with("ppl=" + v[0] + ".0000 "));

    const auto online = run("eval zero/model.bin test.txt --online");
    CHECK(online.status != 0);
    CHECK(online.err.find("model has no document vector") != std::string::npos);
    CHECK(online.out.empty());
  }

  SUBCASE("costs") {
    auto r = run("costs --mode hidden -X 20 -M 100 -V 16514 -C 100 --eo 50");
    REQUIRE(r.status == 0);
    CHECK(lines(r.out)[0] == "added_params=666960 added_ops=7400");
    CHECK(lines(r.out)[1] == "label,M,D,added_params,added_ops,test_ppl");
    CHECK(lines(r.out)[2] == "hidden+20,120,0,666960,7400,");
    r = run("costs --mode doc -D 35 -V 16514 -C 100 --eo 50");
    CHECK(lines(r.out)[0] == "added_params=581525 added_ops=10500");
    r = run("costs --mode hidden -X 0 -M 100 -V 16514 -C 100 --eo 50");
    CHECK(lines(r.out)[0] == "added_params=0 added_ops=0");
    CHECK(run("costs --mode sideways -V 1 -C 1 --eo 1").status != 0);
  }

  SUBCASE("sweep") {
    auto r = run("sweep --config run.cfg --pairs 6:2");
    REQUIRE(r.status == 0);
    CHECK(lines(r.out).size() == 2);
    CHECK(lines(r.out)[0] == "label,M,D,added_params,added_ops,test_ppl,seed,status");

    r = run("sweep --config run.cfg --pairs 8:0,6:2,4:4 --set baseline_m=4 --jobs 3");
    REQUIRE(r.status == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 4);
    // Formula values with V from the vocabulary and base M = 4.
    dvr_vocab* vocab = nullptr;
    REQUIRE(dvr_vocab_build((kDir / "train.txt").c_str(), 1, 4, 0, &vocab) == DVR_OK);
    double eo = 0;
    REQUIRE(dvr_vocab_expected_class_size(vocab, &eo) == DVR_OK);
    const int64_t V = dvr_vocab_size(vocab);
    dvr_vocab_free(vocab);
    const int64_t pairs[3][2] = {{8, 0}, {6, 2}, {4, 4}};
    std::vector<int64_t> added;
    for (int i = 0; i < 3; ++i) {
      int64_t hp = 0, ho = 0, dp = 0, dop = 0;
      REQUIRE(dvr_costs_hidden(pairs[i][0] - 4, 4, V, 4, eo, &hp, &ho) == DVR_OK);
      REQUIRE(dvr_costs_doc(pairs[i][1], V, 4, eo, &dp, &dop) == DVR_OK);
      const auto f = split(rows[i + 1], ',');
      REQUIRE(f.size() == 8);
      CHECK(f[1] == std::to_string(pairs[i][0]));
      CHECK(f[2] == std::to_string(pairs[i][1]));
      CHECK(f[3] == std::to_string(hp + dp));
      CHECK(f[4] == std::to_string(ho + dop));
      CHECK(f[7] == "ok");
      added.push_back(std::stoll(f[3]));
    }
    CHECK(added[0] > added[1]);
    CHECK(added[1] > added[2]);

    r = run("sweep --config run.cfg --pairs 6:2 --repeat 2 --set seed=10");
    REQUIRE(r.status == 0);
    const auto rep = lines(r.out);
    REQUIRE(rep.size() == 3);
    auto a = split(rep[1], ','), b = split(rep[2], ',');
    CHECK(a[6] == "10");
    CHECK(b[6] == "11");
    CHECK(a[5] != b[5]);
    a[5] = b[5] = a[6] = b[6] = "";
    CHECK(a == b);

    // A failing run is recorded and the sweep carries on.
    r = run("sweep --config run.cfg --pairs 6:2,4:0 --set lr=1e300");
    CHECK(r.status != 0);
    CHECK(lines(r.out).size() == 3);
    CHECK(r.out.find("error:") != std::string::npos);
  }

  SUBCASE("similar") {
    REQUIRE(run("train --config run.cfg --output-dir sim").status == 0);
    spit(kDir / "ten.txt",
         "a1 a2 a3 x\nb1 b2 y\na0 a4 a5\nb3 b4 b5 b0\nx y a1\n"
         "a1 a2 a3 x\nb2 b2 b2\ny y a3 a3\nb5 x a5\na0 b0 x y\n");
    auto r = run("similar sim/model.bin ten.txt --query 0 --k 9 --vectors-csv vec.csv");
    REQUIRE(r.status == 0);
    const auto ranked = lines(r.out);
    REQUIRE(ranked.size() == 9);
    CHECK(split(ranked[0], '\t')[1] == "5");  // the duplicate
    CHECK(std::stod(split(ranked[0], '\t')[2]) == doctest::Approx(1.0));
    CHECK(split(ranked[0], '\t')[3] == "a1 a2 a3 x");

    // Brute-force cosine ranking from the exported vectors.
    std::vector<std::vector<double>> vecs;
    const auto csv = lines(slurp(kDir / "vec.csv"));
    CHECK(csv[0] == "index,v0,v1,v2,v3");
    for (std::size_t i = 1; i < csv.size(); ++i) {
      const auto f = split(csv[i], ',');
      std::vector<double> v;
      for (std::size_t j = 1; j < f.size(); ++j) v.push_back(std::stod(f[j]));
      vecs.push_back(v);
    }
    REQUIRE(vecs.size() == 10);
    const auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
      return ab / std::sqrt(aa * bb);
    };
    for (int q : {0, 3, 7}) {
      std::vector<std::pair<double, int>> oracle;
      for (int i = 0; i < 10; ++i) {
        if (i != q) oracle.push_back({-cosine(vecs[q], vecs[i]), i});
      }
      std::sort(oracle.begin(), oracle.end());
      r = run("similar sim/model.bin ten.txt --query " + std::to_string(q) + " --k 9");
      const auto got = lines(r.out);
      REQUIRE(got.size() == 9);
      for (int k = 0; k < 9; ++k) CHECK(split(got[k], '\t')[1] == std::to_string(oracle[k].second));
    }

    r = run("similar sim/model.bin ten.txt --query 0 --k 0");
    CHECK(r.status == 0);
    CHECK(r.out.empty());
    CHECK(run("similar sim/model.bin ten.txt --query 0 --k 10").status != 0);
  }

  SUBCASE("configuration handling") {
    auto r = run("train --config run.cfg --set hidden=12 --dump-config");
    REQUIRE(r.status == 0);
    spit(kDir / "dumped.cfg", r.out);
    const auto again = run("train --config dumped.cfg --dump-config");
    CHECK(again.out == r.out);
    CHECK(r.out.find("hidden=12\n") != std::string::npos);

    spit(kDir / "bad.cfg", "hidden=4\n# fine\nhidden=four\n");
    r = run("train --config bad.cfg");
    CHECK(r.status != 0);
    CHECK(r.err.find("bad.cfg:3:") != std::string::npos);

    spit(kDir / "missing.cfg", "train=nowhere.txt\ndev=dev.txt\n");
    CHECK(run("train --config missing.cfg").status != 0);
    CHECK(run("").status != 0);
  }

  SUBCASE("shuffle") {
    REQUIRE(run("shuffle --input train.txt --output s1.txt --seed 3").status == 0);
    REQUIRE(run("shuffle --input train.txt --output s2.txt --seed 3").status == 0);
    REQUIRE(run("shuffle --input train.txt --output s3.txt --seed 4").status == 0);
    CHECK(slurp(kDir / "s1.txt") == slurp(kDir / "s2.txt"));
    CHECK(slurp(kDir / "s1.txt") != slurp(kDir / "s3.txt"));
    auto a = lines(slurp(kDir / "s1.txt")), b = lines(slurp(kDir / "train.txt"));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}
