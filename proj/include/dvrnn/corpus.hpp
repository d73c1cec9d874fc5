#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dvrnn {

using WordId = std::uint32_t;
using ClassId = std::uint32_t;
using TokenSentence = std::vector<std::string>;

inline constexpr std::string_view kSentenceStart = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";
inline constexpr std::string_view kUnknownWord = "<unk>";

/// Partition of the word ids [0, V) into C non-empty classes.
class ClassAssignment {
 public:
  ClassAssignment() = default;
  ClassAssignment(std::vector<ClassId> word_class, std::uint32_t num_classes);

  std::uint32_t num_classes() const noexcept { return static_cast<std::uint32_t>(members_.size()); }
  std::size_t num_words() const noexcept { return word_class_.size(); }

  ClassId class_of(WordId w) const { return word_class_.at(w); }
  std::span<const WordId> members(ClassId c) const { return members_.at(c); }
  /// Index of w inside members(class_of(w)).
  std::uint32_t position_in_class(WordId w) const { return position_.at(w); }

  const std::vector<ClassId>& word_classes() const noexcept { return word_class_; }

  friend bool operator==(const ClassAssignment& a, const ClassAssignment& b) {
    return a.word_class_ == b.word_class_ && a.members_.size() == b.members_.size();
  }

 private:
  std::vector<ClassId> word_class_;
  std::vector<std::vector<WordId>> members_;
  std::vector<std::uint32_t> position_;
};

class Vocabulary {
 public:
  struct Entry {
    std::string word;
    std::uint64_t count = 0;
    ClassId cls = 0;
  };

  Vocabulary() = default;
  /// Entries must be in id order and contain the three special tokens.
  Vocabulary(std::vector<Entry> entries, std::uint32_t num_classes, std::uint32_t min_count);

  std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(words_.size()); }
  std::uint32_t num_classes() const noexcept { return classes_.num_classes(); }
  std::uint32_t min_count() const noexcept { return min_count_; }

  const std::string& word(WordId id) const { return words_.at(id); }
  std::uint64_t count(WordId id) const { return counts_.at(id); }
  /// Unknown id for out-of-vocabulary words.
  WordId id_of(std::string_view word) const;
  bool contains(std::string_view word) const;

  WordId start_id() const noexcept { return start_; }
  WordId end_id() const noexcept { return end_; }
  WordId unknown_id() const noexcept { return unknown_; }

  const ClassAssignment& classes() const noexcept { return classes_; }
  void set_classes(ClassAssignment classes);

  /// Vocabulary file text: header "V C min_count", then word<TAB>count<TAB>class per id.
  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  /// FNV-1a 64 of the words in id order; identifies the id mapping a dataset
  /// was encoded with.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.counts_ == b.counts_ && a.classes_ == b.classes_ &&
           a.min_count_ == b.min_count_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, WordId> index_;
  ClassAssignment classes_;
  std::uint32_t min_count_ = 1;
  WordId start_ = 0;
  WordId end_ = 0;
  WordId unknown_ = 0;
};

/// Encoded sentences, each [start, w1, ..., wn, end].
struct Dataset {
  std::vector<std::vector<WordId>> sentences;
  std::size_t token_count = 0;  // scorable tokens: everything after each start token
  std::uint32_t vocab_size = 0;
  std::uint64_t vocab_fingerprint = 0;
};

/// Words seen fewer than min_count times fold into the unknown token. Ids are
/// assigned by descending count, ties broken lexicographically. The result
/// carries a single class; call assign_classes for more.
Vocabulary build_vocab(std::span<const TokenSentence> sentences, std::uint32_t min_count);

/// Square-root-frequency binning of the frequency-sorted ids into C contiguous
/// non-empty bins.
ClassAssignment assign_classes(const Vocabulary& vocab, std::uint32_t num_classes);

/// E[O]: sum over words of unigram probability times the size of the word's class.
double expected_in_class_size(const Vocabulary& vocab, const ClassAssignment& classes);

Dataset encode(std::span<const TokenSentence> sentences, const Vocabulary& vocab);
std::vector<TokenSentence> decode(const Dataset& dataset, const Vocabulary& vocab);
/// Throws unless every sentence is [start, non-special..., end] with ids < V.
void validate_dataset(const Dataset& dataset, const Vocabulary& vocab);

std::string lowercase_utf8(std::string_view text);

/// One sentence per line, whitespace-separated tokens. Blank lines are skipped.
std::vector<TokenSentence> read_corpus(const std::filesystem::path& path, bool lowercase);
std::vector<TokenSentence> parse_corpus(std::string_view text, bool lowercase);

/// Encoded dataset file: a "#dvrnnlm-ids V=<V> fingerprint=<hex>" header, then
/// one line of space-separated ids per sentence.
void write_encoded(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_encoded(const std::filesystem::path& path, const Vocabulary& vocab);
bool is_encoded_file(const std::filesystem::path& path);

/// Encoded file when the header is present, raw corpus text otherwise.
Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab, bool lowercase);

/// Fisher-Yates shuffle of the lines of a text file.
void shuffle_lines(const std::filesystem::path& in, const std::filesystem::path& out,
                   std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace dvrnn
