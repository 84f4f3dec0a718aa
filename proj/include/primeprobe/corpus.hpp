#pragma once

// Tokenization, vocabulary construction and corpus splitting.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "primeprobe/util.hpp"

namespace primeprobe {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

namespace detail {

// Length in bytes of a UTF-8 whitespace code point starting at s[i], or 0.
inline std::size_t utf8_space(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[i + k]); };
  const std::size_t left = s.size() - i;
  const unsigned char c = b(0);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  if (left >= 2 && c == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;
  if (left >= 3 && c == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;  // U+1680
  if (left >= 3 && c == 0xE2 && b(1) == 0x80) {
    const unsigned char d = b(2);
    if (d <= 0x8A || d == 0xA8 || d == 0xA9 || d == 0xAF) return 3;  // U+2000..200A, 2028, 2029, 202F
  }
  if (left >= 3 && c == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;  // U+205F
  if (left >= 3 && c == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;  // U+3000
  return 0;
}

inline bool is_split_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

}  // namespace detail

inline bool is_sentence_terminal(std::string_view tok) {
  return tok == "." || tok == "!" || tok == "?";
}

/// Splits on Unicode whitespace, lowercases ASCII letters and detaches
/// trailing punctuation (. , ; : ! ?) into tokens of its own.
inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    std::size_t end = cur.size();
    while (end > 0 && detail::is_split_punct(cur[end - 1])) --end;
    if (end > 0) out.push_back(cur.substr(0, end));
    for (std::size_t k = end; k < cur.size(); ++k) out.emplace_back(1, cur[k]);
    cur.clear();
  };
  for (std::size_t i = 0; i < line.size();) {
    if (const auto n = detail::utf8_space(line, i)) {
      flush();
      i += n;
      continue;
    }
    char c = line[i++];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    cur.push_back(c);
  }
  flush();
  return out;
}

/// Dense token inventory. Ids 0..2 are <unk>, <s>, </s>; kept types follow in
/// order of decreasing training frequency, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";

  Vocabulary() : Vocabulary(std::vector<std::string>{}, 1) {}

  /// `kept` must not contain the special surfaces or duplicates.
  Vocabulary(std::vector<std::string> kept, std::size_t min_count) : min_count_(min_count) {
    surfaces_ = {std::string(kUnk), std::string(kBos), std::string(kEos)};
    for (auto& s : kept) {
      if (s == kUnk || s == kBos || s == kEos)
        throw InvalidArgument("vocabulary: special surface '" + s + "' in kept types");
      surfaces_.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < surfaces_.size(); ++i) {
      if (!index_.emplace(surfaces_[i], static_cast<TokenId>(i)).second)
        throw InvalidArgument("vocabulary: duplicate surface '" + surfaces_[i] + "'");
    }
  }

  TokenId unk_id() const { return 0; }
  TokenId bos_id() const { return 1; }
  TokenId eos_id() const { return 2; }
  std::size_t min_count() const { return min_count_; }
  std::size_t size() const { return surfaces_.size(); }

  std::optional<TokenId> find(std::string_view surface) const {
    auto it = index_.find(std::string(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view surface) const { return find(surface).has_value(); }
  TokenId id(std::string_view surface) const { return find(surface).value_or(unk_id()); }
  const std::string& surface(TokenId id) const { return surfaces_.at(id); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  /// "surface<TAB>id" per line, specials first.
  std::string serialize() const {
    std::string out;
    for (std::size_t i = 0; i < surfaces_.size(); ++i)
      out += surfaces_[i] + '\t' + std::to_string(i) + '\n';
    return out;
  }

  static Vocabulary deserialize(std::string_view text) {
    std::vector<std::string> kept;
    std::size_t expect = 0;
    for (auto line : split(text, '\n')) {
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) throw ParseError("vocabulary: expected 'surface<TAB>id'");
      if (parse_number<std::size_t>(cols[1], "vocabulary id") != expect)
        throw ParseError("vocabulary: ids must be dense and ordered");
      if (expect >= 3) kept.emplace_back(cols[0]);
      else if (cols[0] != std::array{kUnk, kBos, kEos}[expect])
        throw ParseError("vocabulary: specials must come first");
      ++expect;
    }
    if (expect < 3) throw ParseError("vocabulary: missing specials");
    return Vocabulary(std::move(kept), 1);
  }

  std::uint64_t fingerprint() const { return fnv1a(serialize()); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.surfaces_ == b.surfaces_;
  }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t min_count_ = 1;
};

/// Counts tokens over already-tokenized sentences and keeps every type seen at
/// least `min_count` times.
inline Vocabulary build_vocab(std::span<const std::vector<std::string>> sentences,
                              std::size_t min_count) {
  if (min_count < 1) throw InvalidArgument("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& t : s) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : counts) {
    if (c < min_count) continue;
    if (w == Vocabulary::kUnk || w == Vocabulary::kBos || w == Vocabulary::kEos) continue;
    kept.emplace_back(w, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> surfaces;
  surfaces.reserve(kept.size());
  for (auto& [w, c] : kept) surfaces.push_back(std::move(w));
  return Vocabulary(std::move(surfaces), min_count);
}

/// Line-oriented overload: each line is tokenized first.
inline Vocabulary build_vocab(std::span<const std::string> lines, std::size_t min_count) {
  std::vector<std::vector<std::string>> toks;
  toks.reserve(lines.size());
  for (const auto& l : lines) toks.push_back(tokenize(l));
  return build_vocab(std::span<const std::vector<std::string>>(toks), min_count);
}

inline TokenSeq encode(std::span<const std::string> sentence, const Vocabulary& vocab) {
  TokenSeq out;
  out.reserve(sentence.size());
  for (const auto& t : sentence) out.push_back(vocab.id(t));
  return out;
}

struct Corpus {
  std::vector<TokenSeq> sentences;
  std::string source_name;
  std::size_t token_count = 0;

  static Corpus from_sentences(std::vector<TokenSeq> sentences, std::string name) {
    Corpus c{std::move(sentences), std::move(name), 0};
    for (const auto& s : c.sentences) c.token_count += s.size();
    return c;
  }
};

/// Reads WikiText-style plain text: lines whose first non-blank character is
/// '=' are headers and are skipped; every other line is tokenized and cut into
/// sentences after each terminal token.
inline std::vector<std::vector<std::string>> read_sentences(std::istream& in) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '=') continue;
    std::vector<std::string> cur;
    for (auto& tok : tokenize(body)) {
      const bool terminal = is_sentence_terminal(tok);
      cur.push_back(std::move(tok));
      if (terminal) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
  }
  return out;
}

inline Corpus encode_corpus(std::span<const std::vector<std::string>> sentences,
                            const Vocabulary& vocab, std::string name) {
  std::vector<TokenSeq> ids;
  ids.reserve(sentences.size());
  for (const auto& s : sentences) ids.push_back(encode(s, vocab));
  return Corpus::from_sentences(std::move(ids), std::move(name));
}

/// Sentence-level partition into k parts after a seeded permutation; parts are
/// filled round-robin so their sizes differ by at most one sentence.
inline std::vector<Corpus> split_disjoint(const Corpus& corpus, std::size_t k,
                                          std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("split_disjoint: k must be >= 1");
  if (k > corpus.sentences.size())
    throw InfeasibleError("split_disjoint: cannot split " +
                          std::to_string(corpus.sentences.size()) + " sentences into " +
                          std::to_string(k) + " non-empty parts");
  std::vector<std::size_t> order(corpus.sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5e11ULL));
  rng.shuffle(order);
  std::vector<std::vector<TokenSeq>> parts(k);
  for (std::size_t i = 0; i < order.size(); ++i)
    parts[i % k].push_back(corpus.sentences[order[i]]);
  std::vector<Corpus> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    out.push_back(Corpus::from_sentences(std::move(parts[i]),
                                         corpus.source_name + "#" + std::to_string(i)));
  return out;
}

}  // namespace primeprobe
