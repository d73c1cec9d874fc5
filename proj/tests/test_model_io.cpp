#include <filesystem>

#include "doctest.h"
#include "dvrnn/error.hpp"
#include "dvrnn/model_io.hpp"
#include "support/synthetic.hpp"

using namespace dvrnn;

namespace {

ErrorCode code_of(std::string_view bytes) {
  try {
    deserialize_model(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected deserialization to fail");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("model files") {
  const auto corpus = testing::make_topic_corpus(80, 3);
  auto vocab = build_vocab(corpus.sentences, 2);
  vocab.set_classes(assign_classes(vocab, 5));
  Rng rng(6);
  const auto params = init_params({6, 2, vocab.size(), 5}, vocab.classes(), rng, 0.1);
  const auto bytes = serialize_model(params, vocab);

  SUBCASE("round trip is bit-exact") {
    CHECK(bytes.substr(0, 8) == "DVRNNLM1");
    const auto back = deserialize_model(bytes);
    CHECK(back.params.bit_equal(params));
    CHECK(back.vocab == vocab);
    CHECK(serialize_model(back.params, back.vocab) == bytes);

    const auto path = std::filesystem::temp_directory_path() / "dvrnn_model_io.bin";
    save_model(path, params, vocab);
    CHECK(load_model(path).params.bit_equal(params));
    std::filesystem::remove(path);

    Rng r2(1);
    const auto plain = init_params({4, 0, vocab.size(), 5}, vocab.classes(), r2, 0.1);
    CHECK(deserialize_model(serialize_model(plain, vocab)).params.bit_equal(plain));
  }

  SUBCASE("header layout is little-endian") {
    CHECK(static_cast<unsigned char>(bytes[8]) == 6);
    CHECK(static_cast<unsigned char>(bytes[12]) == 2);
    CHECK(static_cast<unsigned char>(bytes[16]) == (vocab.size() & 0xFF));
    CHECK(static_cast<unsigned char>(bytes[20]) == 5);
  }

  SUBCASE("corruption is diagnosed") {
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(code_of(bad_magic) == ErrorCode::bad_magic);

    std::string bad_version = bytes;
    bad_version[7] = '9';
    CHECK(code_of(bad_version) == ErrorCode::unsupported_version);

    std::string wrong_dims = bytes;
    wrong_dims[8] = 5;  // M = 5 while the payload was written for M = 6
    CHECK(code_of(wrong_dims) == ErrorCode::dimension_mismatch);
    wrong_dims[8] = 7;
    CHECK(code_of(wrong_dims) == ErrorCode::dimension_mismatch);

    CHECK(code_of(bytes.substr(0, bytes.size() - 5)) == ErrorCode::truncated);
    CHECK(code_of(bytes.substr(0, 30)) == ErrorCode::truncated);
    CHECK(code_of(bytes.substr(0, 12)) == ErrorCode::truncated);

    CHECK_THROWS_AS(load_model("/nonexistent/model.bin"), Error);
  }
}
