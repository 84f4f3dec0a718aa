#pragma once

// Interpolated Kneser-Ney n-gram language model.
//
// Level n (1..N) of the recursion predicts w from the n-1 preceding ids h:
//
//   p_n(w|h) = max(c_n(h w) - D_n, 0) / S_n(h) + D_n T_n(h) / S_n(h) * p_{n-1}(w|h')
//
// where h' drops the oldest id of h, S_n(h) = sum_w c_n(h w) and T_n(h) is the
// number of w with c_n(h w) > 0. The top level uses raw counts; every lower
// level uses continuation counts (number of distinct ids u with raw count
// c(u h w) > 0). When S_n(h) = 0 the level is skipped. p_0 is uniform over the
// vocabulary without <s>, which is never predicted.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "primeprobe/corpus.hpp"
#include "primeprobe/util.hpp"

namespace primeprobe {

inline constexpr std::size_t kMaxNgramOrder = 6;

/// Fixed-capacity n-gram key.
struct NGram {
  std::array<TokenId, kMaxNgramOrder> ids{};
  std::uint8_t len = 0;

  NGram() = default;
  explicit NGram(std::span<const TokenId> xs) : len(static_cast<std::uint8_t>(xs.size())) {
    if (xs.size() > kMaxNgramOrder) throw InvalidArgument("NGram: order too large");
    std::copy(xs.begin(), xs.end(), ids.begin());
  }

  std::span<const TokenId> view() const { return {ids.data(), len}; }
  NGram drop_front() const { return NGram(view().subspan(1)); }
  NGram drop_back() const { return NGram(view().first(len - 1)); }

  friend bool operator==(const NGram& a, const NGram& b) {
    return a.len == b.len && std::equal(a.ids.begin(), a.ids.begin() + a.len, b.ids.begin());
  }
  friend bool operator<(const NGram& a, const NGram& b) {
    return std::lexicographical_compare(a.ids.begin(), a.ids.begin() + a.len, b.ids.begin(),
                                        b.ids.begin() + b.len);
  }
};

struct NGramHash {
  std::size_t operator()(const NGram& g) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ g.len;
    for (std::size_t i = 0; i < g.len; ++i) h = splitmix64(h ^ g.ids[i]);
    return static_cast<std::size_t>(h);
  }
};

using NGramCounts = std::unordered_map<NGram, std::uint64_t, NGramHash>;

/// Raw n-gram counts for orders 1..max(N, 2). Bigrams are kept even for a
/// unigram model because the unigram level is a continuation distribution.
class CountTable {
 public:
  CountTable() = default;
  explicit CountTable(std::size_t order)
      : order_(order), raw_(std::max<std::size_t>(order, 2) + 1) {}

  std::size_t order() const { return order_; }
  std::size_t max_stored_order() const { return raw_.size() - 1; }
  std::size_t padding() const { return std::max<std::size_t>(order_, 2) - 1; }

  /// Counts every n-gram ending at a real token or at </s> of a sentence padded
  /// with padding() copies of <s>.
  void add_sentence(std::span<const TokenId> sentence, TokenId bos, TokenId eos,
                    std::uint64_t weight = 1) {
    std::vector<TokenId> seq(padding(), bos);
    seq.insert(seq.end(), sentence.begin(), sentence.end());
    seq.push_back(eos);
    for (std::size_t i = padding(); i < seq.size(); ++i)
      for (std::size_t n = 1; n <= max_stored_order() && n <= i + 1; ++n)
        raw_[n][NGram(std::span<const TokenId>(seq).subspan(i + 1 - n, n))] += weight;
  }

  const NGramCounts& raw(std::size_t n) const { return raw_.at(n); }

  std::uint64_t count(std::span<const TokenId> gram) const {
    if (gram.empty() || gram.size() > max_stored_order()) return 0;
    const auto& m = raw_[gram.size()];
    auto it = m.find(NGram(gram));
    return it == m.end() ? 0 : it->second;
  }

  friend bool operator==(const CountTable& a, const CountTable& b) {
    return a.order_ == b.order_ && a.raw_ == b.raw_;
  }

 private:
  friend class KNModel;
  std::size_t order_ = 0;
  std::vector<NGramCounts> raw_;  // index = n-gram length
};

class KNModel {
 public:
  struct ContextStats {
    double total = 0;        // S_n(h)
    std::uint64_t types = 0; // T_n(h)
  };

  KNModel(std::shared_ptr<const Vocabulary> vocab, CountTable counts, std::vector<double> discounts)
      : vocab_(std::move(vocab)), counts_(std::move(counts)), discounts_(std::move(discounts)) {
    if (!vocab_) throw InvalidArgument("KNModel: null vocabulary");
    if (counts_.order() < 1 || counts_.order() > kMaxNgramOrder - 1)
      throw InvalidArgument("KNModel: order must lie in [1, " + std::to_string(kMaxNgramOrder - 1) + "]");
    if (discounts_.size() != counts_.order()) throw InvalidArgument("KNModel: one discount per order required");
    for (double d : discounts_)
      if (!(d > 0.0 && d < 1.0)) throw InvalidArgument("KNModel: discounts must lie in (0, 1)");
    rebuild();
  }

  std::size_t order() const { return counts_.order(); }
  const std::vector<double>& discounts() const { return discounts_; }
  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
  const CountTable& counts() const { return counts_; }

  /// c_n(gram) for level n = gram.size(): raw at the top level, continuation below.
  std::uint64_t level_count(std::span<const TokenId> gram) const {
    const std::size_t n = gram.size();
    if (n == 0 || n > order()) return 0;
    const auto& m = level_table(n);
    auto it = m.find(NGram(gram));
    return it == m.end() ? 0 : it->second;
  }

  ContextStats context_stats(std::span<const TokenId> history) const {
    const std::size_t n = history.size() + 1;
    if (n > order()) return {};
    auto it = contexts_[n].find(NGram(history));
    return it == contexts_[n].end() ? ContextStats{} : it->second;
  }

  /// Number of ids a distribution ranges over (all but <s>).
  std::size_t support_size() const { return vocab_->size() - 1; }

  /// p(word | context); the context is truncated to its last N-1 ids.
  /// Returns 0 for <s>.
  double prob(std::span<const TokenId> context, TokenId word) const {
    if (word >= vocab_->size()) throw InvalidArgument("KNModel::prob: id out of range");
    if (word == vocab_->bos_id()) return 0.0;
    const std::size_t hist = std::min(context.size(), order() - 1);
    const auto h = context.last(hist);
    std::array<TokenId, kMaxNgramOrder> buf{};
    double p = 1.0 / static_cast<double>(support_size());
    for (std::size_t n = 1; n <= hist + 1; ++n) {
      const auto hn = h.last(n - 1);
      auto cit = contexts_[n].find(NGram(hn));
      if (cit == contexts_[n].end() || cit->second.total <= 0) continue;
      std::copy(hn.begin(), hn.end(), buf.begin());
      buf[n - 1] = word;
      const double c = static_cast<double>(level_count(std::span<const TokenId>(buf.data(), n)));
      const double d = discounts_[n - 1];
      const auto& st = cit->second;
      p = (std::max(c - d, 0.0) + d * static_cast<double>(st.types) * p) / st.total;
    }
    return p;
  }

  /// Sentence surprisal in bits: every real token plus </s>, not <s>.
  double surprisal(std::span<const TokenId> sentence) const {
    std::vector<TokenId> seq(order() - 1, vocab_->bos_id());
    seq.insert(seq.end(), sentence.begin(), sentence.end());
    seq.push_back(vocab_->eos_id());
    double bits = 0.0;
    const std::span<const TokenId> all(seq);
    for (std::size_t i = order() - 1; i < seq.size(); ++i)
      bits -= std::log2(prob(all.first(i), seq[i]));
    return bits;
  }

  /// Copy with the sentences' n-gram counts added once each.
  KNModel adapt(std::span<const TokenSeq> sentences) const {
    CountTable counts = counts_;
    for (const auto& s : sentences) {
      for (TokenId id : s)
        if (id >= vocab_->size()) throw InvalidArgument("KNModel::adapt: id out of range");
      counts.add_sentence(s, vocab_->bos_id(), vocab_->eos_id());
    }
    return KNModel(vocab_, std::move(counts), discounts_);
  }

  // Text model file:
  //   primeprobe-kn 1
  //   order <N>
  //   discounts <D_1> ... <D_N>
  //   vocab <V>            followed by V "surface<TAB>id" lines
  //   ngrams <M>           followed by M "<n><TAB><id id ...><TAB><count>" lines
  //   end
  std::string serialize() const {
    std::string out = "primeprobe-kn 1\norder " + std::to_string(order()) + "\ndiscounts";
    for (double d : discounts_) out += ' ' + format_double(d);
    out += "\nvocab " + std::to_string(vocab_->size()) + '\n' + vocab_->serialize();
    std::vector<std::pair<NGram, std::uint64_t>> rows;
    for (std::size_t n = 1; n <= counts_.max_stored_order(); ++n)
      for (const auto& kv : counts_.raw_[n]) rows.emplace_back(kv);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.first.len != b.first.len ? a.first.len < b.first.len : a.first < b.first;
    });
    out += "ngrams " + std::to_string(rows.size()) + '\n';
    for (const auto& [g, c] : rows) {
      out += std::to_string(g.len) + '\t';
      for (std::size_t i = 0; i < g.len; ++i) out += (i ? " " : "") + std::to_string(g.ids[i]);
      out += '\t' + std::to_string(c) + '\n';
    }
    out += "end\n";
    return out;
  }

  static KNModel deserialize(std::string_view text) {
    auto lines = split(text, '\n');
    std::size_t li = 0;
    auto next = [&]() -> std::string_view {
      if (li >= lines.size()) throw ParseError("kn model: unexpected end of file");
      return lines[li++];
    };
    auto keyed = [&](std::string_view key) {
      auto line = next();
      if (line.substr(0, key.size() + 1) != std::string(key) + ' ')
        throw ParseError("kn model: expected '" + std::string(key) + "'");
      return line.substr(key.size() + 1);
    };
    if (next() != "primeprobe-kn 1") throw ParseError("kn model: bad header");
    const auto order = parse_number<std::size_t>(keyed("order"), "order");
    std::vector<double> discounts;
    for (auto d : split(keyed("discounts"), ' ')) discounts.push_back(parse_number<double>(d, "discount"));
    const auto v = parse_number<std::size_t>(keyed("vocab"), "vocab size");
    std::string vtext;
    for (std::size_t i = 0; i < v; ++i) (vtext += next()) += '\n';
    auto vocab = std::make_shared<const Vocabulary>(Vocabulary::deserialize(vtext));
    if (vocab->size() != v) throw ParseError("kn model: vocabulary size mismatch");
    if (order < 1 || order >= kMaxNgramOrder) throw ParseError("kn model: unsupported order");
    CountTable counts(order);
    const auto m = parse_number<std::size_t>(keyed("ngrams"), "n-gram count");
    for (std::size_t i = 0; i < m; ++i) {
      auto cols = split(next(), '\t');
      if (cols.size() != 3) throw ParseError("kn model: malformed n-gram line");
      const auto n = parse_number<std::size_t>(cols[0], "n");
      std::vector<TokenId> ids;
      for (auto s : split(cols[1], ' ')) {
        ids.push_back(parse_number<TokenId>(s, "token id"));
        if (ids.back() >= v) throw ParseError("kn model: token id out of range");
      }
      if (n < 1 || n > counts.max_stored_order() || ids.size() != n)
        throw ParseError("kn model: n-gram length mismatch");
      counts.raw_[n][NGram(ids)] = parse_number<std::uint64_t>(cols[2], "count");
    }
    if (next() != "end") throw ParseError("kn model: missing end marker");
    return KNModel(std::move(vocab), std::move(counts), std::move(discounts));
  }

 private:
  // The top level uses raw counts, except for a unigram model whose only
  // level is the continuation distribution.
  const NGramCounts& level_table(std::size_t n) const {
    return (n == order() && order() > 1) ? counts_.raw_[n] : continuation_[n];
  }

  void rebuild() {
    const std::size_t N = order();
    continuation_.assign(N + 1, {});
    contexts_.assign(N + 1, {});
    for (std::size_t n = 1; n <= N; ++n) {
      if (n == N && N > 1) break;
      for (const auto& [g, c] : counts_.raw_[n + 1])
        if (c > 0) ++continuation_[n][g.drop_front()];
    }
    for (std::size_t n = 1; n <= N; ++n) {
      for (const auto& [g, c] : level_table(n)) {
        if (c == 0) continue;
        auto& st = contexts_[n][g.drop_back()];
        st.total += static_cast<double>(c);
        ++st.types;
      }
    }
  }

  std::shared_ptr<const Vocabulary> vocab_;
  CountTable counts_;
  std::vector<double> discounts_;
  std::vector<NGramCounts> continuation_;                                 // index = level
  std::vector<std::unordered_map<NGram, ContextStats, NGramHash>> contexts_;  // keyed by history
};

/// Trains an order-N model on every sentence of the corpus.
inline KNModel train_kn(const Corpus& corpus, std::shared_ptr<const Vocabulary> vocab,
                        std::size_t order, double discount = 0.75) {
  if (corpus.sentences.empty()) throw InvalidArgument("train_kn: empty corpus");
  if (order < 1) throw InvalidArgument("train_kn: order must be >= 1");
  if (!(discount > 0.0 && discount < 1.0)) throw InvalidArgument("train_kn: discount must lie in (0, 1)");
  if (!vocab) throw InvalidArgument("train_kn: null vocabulary");
  CountTable counts(order);
  for (const auto& s : corpus.sentences) {
    for (TokenId id : s)
      if (id >= vocab->size()) throw InvalidArgument("train_kn: token id out of range");
    counts.add_sentence(s, vocab->bos_id(), vocab->eos_id());
  }
  return KNModel(std::move(vocab), std::move(counts), std::vector<double>(order, discount));
}

}  // namespace primeprobe
