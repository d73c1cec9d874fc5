#include "dvrnn/corpus.hpp"

#include <locale.h>
#include <wctype.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dvrnn/error.hpp"
#include "dvrnn/numerics.hpp"

namespace dvrnn {

namespace {

bool is_special(std::string_view w) {
  return w == kSentenceStart || w == kSentenceEnd || w == kUnknownWord;
}

template <typename T>
T parse_number(std::string_view field, std::string_view what, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::invalid_argument, "line " + std::to_string(line_no) + ": bad " +
                                                 std::string(what) + " '" + std::string(field) +
                                                 "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    auto line = text.substr(pos, next - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = next + 1;
  }
  return lines;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::string_view kEncodedMagic = "#dvrnnlm-ids";

}  // namespace

// ---------------------------------------------------------------------------
// ClassAssignment

ClassAssignment::ClassAssignment(std::vector<ClassId> word_class, std::uint32_t num_classes)
    : word_class_(std::move(word_class)), members_(num_classes), position_(word_class_.size()) {
  if (num_classes == 0) throw Error(ErrorCode::invalid_argument, "class count must be >= 1");
  for (WordId w = 0; w < word_class_.size(); ++w) {
    const ClassId c = word_class_[w];
    if (c >= num_classes) {
      throw Error(ErrorCode::invalid_argument,
                  "word " + std::to_string(w) + " has class " + std::to_string(c) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
    position_[w] = static_cast<std::uint32_t>(members_[c].size());
    members_[c].push_back(w);
  }
  for (ClassId c = 0; c < num_classes; ++c) {
    if (members_[c].empty()) {
      throw Error(ErrorCode::invalid_argument, "class " + std::to_string(c) + " is empty");
    }
  }
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<Entry> entries, std::uint32_t num_classes,
                       std::uint32_t min_count)
    : min_count_(min_count) {
  if (min_count == 0) throw Error(ErrorCode::invalid_argument, "min_count must be >= 1");
  std::vector<ClassId> classes;
  words_.reserve(entries.size());
  counts_.reserve(entries.size());
  for (auto& e : entries) {
    const auto id = static_cast<WordId>(words_.size());
    if (e.word.empty() || e.word.find_first_of(" \t\n\r") != std::string::npos) {
      throw Error(ErrorCode::invalid_argument, "invalid vocabulary word at id " + std::to_string(id));
    }
    if (!index_.emplace(e.word, id).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate vocabulary word '" + e.word + "'");
    }
    if (!is_special(e.word) && e.count < min_count) {
      throw Error(ErrorCode::invalid_argument,
                  "word '" + e.word + "' has count below min_count " + std::to_string(min_count));
    }
    words_.push_back(std::move(e.word));
    counts_.push_back(e.count);
    classes.push_back(e.cls);
  }
  auto special = [&](std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) {
      throw Error(ErrorCode::invalid_argument,
                  "vocabulary lacks special token " + std::string(name));
    }
    return it->second;
  };
  start_ = special(kSentenceStart);
  end_ = special(kSentenceEnd);
  unknown_ = special(kUnknownWord);
  classes_ = ClassAssignment(std::move(classes), num_classes);
}

WordId Vocabulary::id_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? unknown_ : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) != 0;
}

void Vocabulary::set_classes(ClassAssignment classes) {
  if (classes.num_words() != words_.size()) {
    throw Error(ErrorCode::dimension_mismatch, "class assignment covers " +
                                                   std::to_string(classes.num_words()) +
                                                   " words, vocabulary has " +
                                                   std::to_string(words_.size()));
  }
  classes_ = std::move(classes);
}

std::string Vocabulary::to_text() const {
  std::ostringstream out;
  out << size() << ' ' << num_classes() << ' ' << min_count_ << '\n';
  for (WordId id = 0; id < size(); ++id) {
    out << words_[id] << '\t' << counts_[id] << '\t' << classes_.class_of(id) << '\n';
  }
  return out.str();
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorCode::invalid_argument, "empty vocabulary file");
  const auto header = split_fields(lines[0], ' ');
  if (header.size() != 3) {
    throw Error(ErrorCode::invalid_argument, "line 1: expected header 'V C min_count'");
  }
  const auto v = parse_number<std::uint32_t>(header[0], "V", 1);
  const auto c = parse_number<std::uint32_t>(header[1], "C", 1);
  const auto min_count = parse_number<std::uint32_t>(header[2], "min_count", 1);
  std::vector<Entry> entries;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i], '\t');
    if (fields.size() != 3) {
      throw Error(ErrorCode::invalid_argument,
                  "line " + std::to_string(i + 1) + ": expected word<TAB>count<TAB>class");
    }
    entries.push_back({std::string(fields[0]), parse_number<std::uint64_t>(fields[1], "count", i + 1),
                       parse_number<ClassId>(fields[2], "class", i + 1)});
  }
  if (entries.size() != v) {
    throw Error(ErrorCode::dimension_mismatch, "vocabulary header says V=" + std::to_string(v) +
                                                   " but lists " + std::to_string(entries.size()) +
                                                   " words");
  }
  return Vocabulary(std::move(entries), c, min_count);
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file(path, to_text()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return from_text(read_file(path)); }

std::uint64_t Vocabulary::fingerprint() const {
  std::string joined;
  for (const auto& w : words_) {
    joined += w;
    joined += '\n';
  }
  return fnv1a(joined);
}

// ---------------------------------------------------------------------------
// Construction

Vocabulary build_vocab(std::span<const TokenSentence> sentences, std::uint32_t min_count) {
  if (min_count == 0) throw Error(ErrorCode::invalid_argument, "min_count must be >= 1");
  if (sentences.empty()) throw Error(ErrorCode::invalid_argument, "empty corpus");

  std::map<std::string, std::uint64_t, std::less<>> counts;
  std::uint64_t unknown = 0;
  for (const auto& sentence : sentences) {
    for (const auto& token : sentence) {
      if (is_special(token)) {
        ++unknown;
      } else {
        ++counts[token];
      }
    }
  }

  std::vector<Vocabulary::Entry> entries;
  for (const auto& [word, n] : counts) {
    if (n >= min_count) {
      entries.push_back({word, n, 0});
    } else {
      unknown += n;
    }
  }
  // The start token is context only and never an output event, so it carries
  // no frequency mass.
  entries.push_back({std::string(kSentenceStart), 0, 0});
  entries.push_back({std::string(kSentenceEnd), sentences.size(), 0});
  entries.push_back({std::string(kUnknownWord), unknown, 0});

  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.count != b.count ? a.count > b.count : a.word < b.word;
  });
  return Vocabulary(std::move(entries), 1, min_count);
}

ClassAssignment assign_classes(const Vocabulary& vocab, std::uint32_t num_classes) {
  const std::uint32_t v = vocab.size();
  if (num_classes == 0 || num_classes > v) {
    throw Error(ErrorCode::invalid_argument, "class count " + std::to_string(num_classes) +
                                                 " must lie in [1, " + std::to_string(v) + "]");
  }
  // prefix[i] = sqrt-frequency mass of ids [0, i)
  std::vector<double> prefix(v + 1, 0.0);
  for (WordId id = 0; id < v; ++id) {
    prefix[id + 1] = prefix[id] + std::sqrt(static_cast<double>(vocab.count(id)));
  }
  const double total = prefix[v];

  std::vector<std::uint32_t> bounds(num_classes + 1);
  bounds[0] = 0;
  bounds[num_classes] = v;
  for (std::uint32_t k = 1; k < num_classes; ++k) {
    // Keep room for one word in each remaining class.
    const std::uint32_t lo = bounds[k - 1] + 1;
    const std::uint32_t hi = v - (num_classes - k);
    const double target = total * k / num_classes;
    std::uint32_t best = lo;
    for (std::uint32_t b = lo + 1; b <= hi; ++b) {
      if (std::abs(prefix[b] - target) < std::abs(prefix[best] - target)) best = b;
    }
    bounds[k] = best;
  }

  std::vector<ClassId> word_class(v);
  for (ClassId c = 0; c < num_classes; ++c) {
    for (std::uint32_t id = bounds[c]; id < bounds[c + 1]; ++id) word_class[id] = c;
  }
  return ClassAssignment(std::move(word_class), num_classes);
}

double expected_in_class_size(const Vocabulary& vocab, const ClassAssignment& classes) {
  double total = 0.0;
  double weighted = 0.0;
  for (WordId id = 0; id < vocab.size(); ++id) {
    const auto n = static_cast<double>(vocab.count(id));
    total += n;
    weighted += n * static_cast<double>(classes.members(classes.class_of(id)).size());
  }
  if (total <= 0.0) throw Error(ErrorCode::invalid_argument, "vocabulary has no counts");
  return weighted / total;
}

Dataset encode(std::span<const TokenSentence> sentences, const Vocabulary& vocab) {
  Dataset out;
  out.vocab_size = vocab.size();
  out.vocab_fingerprint = vocab.fingerprint();
  out.sentences.reserve(sentences.size());
  for (const auto& tokens : sentences) {
    std::vector<WordId> ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(vocab.start_id());
    for (const auto& t : tokens) {
      ids.push_back(t == kSentenceStart || t == kSentenceEnd ? vocab.unknown_id() : vocab.id_of(t));
    }
    ids.push_back(vocab.end_id());
    out.token_count += ids.size() - 1;
    out.sentences.push_back(std::move(ids));
  }
  return out;
}

std::vector<TokenSentence> decode(const Dataset& dataset, const Vocabulary& vocab) {
  std::vector<TokenSentence> out;
  out.reserve(dataset.sentences.size());
  for (const auto& ids : dataset.sentences) {
    TokenSentence tokens;
    for (std::size_t i = 1; i + 1 < ids.size(); ++i) tokens.push_back(vocab.word(ids[i]));
    out.push_back(std::move(tokens));
  }
  return out;
}

void validate_dataset(const Dataset& dataset, const Vocabulary& vocab) {
  if (dataset.vocab_size != vocab.size()) {
    throw Error(ErrorCode::vocab_mismatch, "dataset encoded for V=" +
                                               std::to_string(dataset.vocab_size) +
                                               ", vocabulary has V=" + std::to_string(vocab.size()));
  }
  std::size_t tokens = 0;
  for (std::size_t s = 0; s < dataset.sentences.size(); ++s) {
    const auto& ids = dataset.sentences[s];
    const auto where = "sentence " + std::to_string(s) + ": ";
    if (ids.size() < 2 || ids.front() != vocab.start_id() || ids.back() != vocab.end_id()) {
      throw Error(ErrorCode::invalid_argument, where + "must start with <s> and end with </s>");
    }
    for (std::size_t i = 1; i < ids.size(); ++i) {
      if (ids[i] >= vocab.size()) {
        throw Error(ErrorCode::vocab_mismatch, where + "id " + std::to_string(ids[i]) +
                                                   " outside vocabulary");
      }
      if (ids[i] == vocab.start_id() || (ids[i] == vocab.end_id() && i + 1 != ids.size())) {
        throw Error(ErrorCode::invalid_argument, where + "interior boundary token");
      }
    }
    tokens += ids.size() - 1;
  }
  if (tokens != dataset.token_count) {
    throw Error(ErrorCode::invalid_argument, "dataset token count is inconsistent");
  }
}

// ---------------------------------------------------------------------------
// Text handling

std::string lowercase_utf8(std::string_view text) {
  static const locale_t utf8 = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(0));
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > text.size()) {
      out.push_back(text[i++]);  // invalid byte, pass through
      continue;
    }
    char32_t cp = len == 1 ? b0 : b0 & (0x7F >> len);
    bool valid = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) valid = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!valid) {
      out.push_back(text[i++]);
      continue;
    }
    if (cp < 0x80) {
      cp = (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    } else if (utf8 != static_cast<locale_t>(0)) {
      cp = static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), utf8));
    }
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    i += len;
  }
  return out;
}

std::vector<TokenSentence> parse_corpus(std::string_view text, bool lowercase) {
  std::vector<TokenSentence> out;
  for (auto line : split_lines(text)) {
    std::string owned = lowercase ? lowercase_utf8(line) : std::string(line);
    TokenSentence tokens;
    std::istringstream in(owned);
    for (std::string t; in >> t;) tokens.push_back(std::move(t));
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

std::vector<TokenSentence> read_corpus(const std::filesystem::path& path, bool lowercase) {
  return parse_corpus(read_file(path), lowercase);
}

void write_encoded(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream out;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(dataset.vocab_fingerprint));
  out << kEncodedMagic << " V=" << dataset.vocab_size << " fingerprint=" << hex << '\n';
  for (const auto& ids : dataset.sentences) {
    for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
    out << '\n';
  }
  write_file(path, out.str());
}

bool is_encoded_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string head(kEncodedMagic.size(), '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  return in && head == kEncodedMagic;
}

Dataset read_encoded(const std::filesystem::path& path, const Vocabulary& vocab) {
  const auto text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty() || !lines[0].starts_with(kEncodedMagic)) {
    throw Error(ErrorCode::invalid_argument, path.string() + ": not an encoded dataset");
  }
  Dataset out;
  for (auto field : split_fields(lines[0], ' ')) {
    if (field.starts_with("V=")) {
      out.vocab_size = parse_number<std::uint32_t>(field.substr(2), "V", 1);
    } else if (field.starts_with("fingerprint=")) {
      auto hex = field.substr(12);
      auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), out.vocab_fingerprint, 16);
      if (ec != std::errc{}) throw Error(ErrorCode::invalid_argument, "line 1: bad fingerprint");
    }
  }
  if (out.vocab_size != vocab.size() || out.vocab_fingerprint != vocab.fingerprint()) {
    throw Error(ErrorCode::vocab_mismatch,
                path.string() + " was encoded with a different vocabulary");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<WordId> ids;
    for (auto f : split_fields(lines[i], ' ')) ids.push_back(parse_number<WordId>(f, "word id", i + 1));
    out.token_count += ids.empty() ? 0 : ids.size() - 1;
    out.sentences.push_back(std::move(ids));
  }
  validate_dataset(out, vocab);
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab, bool lowercase) {
  if (is_encoded_file(path)) return read_encoded(path, vocab);
  const auto sentences = read_corpus(path, lowercase);
  return encode(sentences, vocab);
}

void shuffle_lines(const std::filesystem::path& in, const std::filesystem::path& out,
                   std::uint64_t seed) {
  const auto text = read_file(in);
  auto views = split_lines(text);
  std::vector<std::string> lines(views.begin(), views.end());
  Rng rng(seed);
  for (std::size_t i = lines.size(); i > 1; --i) {
    std::swap(lines[i - 1], lines[rng.below(i)]);
  }
  std::string joined;
  for (const auto& l : lines) {
    joined += l;
    joined += '\n';
  }
  write_file(out, joined);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace dvrnn
