#pragma once

// The priming experiment: score every test set with a base model, adapt a
// fresh copy on each type's adaptation set, rescore, and record the drop in
// mean surprisal for every (adaptation type, test type) pair.

#include <array>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "primeprobe/corpus.hpp"
#include "primeprobe/stimuli.hpp"
#include "primeprobe/util.hpp"

namespace primeprobe {

/// What the driver needs from a model family. adapt() must leave the model
/// it is called on unchanged.
template <class M>
concept PrimableModel = requires(const M& m, std::span<const TokenSeq> sentences, std::span<const TokenId> s) {
  { m.surprisal(s) } -> std::convertible_to<double>;
  { m.adapt(sentences) } -> std::same_as<M>;
  { m.vocab() } -> std::convertible_to<const Vocabulary&>;
};

using EffectMatrix = std::array<std::array<double, kNumTypes>, kNumTypes>;  // [adapt][test]

/// Per-instance outcome. pre[t] is the base model's mean test surprisal on
/// type t; post[a][t] the same after adapting on type a.
struct InstanceResult {
  std::size_t instance = 0;
  std::array<double, kNumTypes> pre{};
  EffectMatrix post{};
  EffectMatrix effect{};
};

struct RunOptions {
  bool scramble_adaptation = false;
  std::uint64_t seed = 0;
};

/// Encodes a stimulus set, rejecting any token the vocabulary lacks.
inline std::vector<TokenSeq> encode_stimuli(const std::vector<Stimulus>& set, const Vocabulary& vocab) {
  std::vector<TokenSeq> out;
  out.reserve(set.size());
  for (const auto& s : set) {
    for (const auto& t : s.tokens)
      if (!vocab.contains(t))
        throw InvalidArgument("vocabulary mismatch: stimulus token '" + t + "' is not in the model vocabulary");
    out.push_back(encode(s.tokens, vocab));
  }
  return out;
}

template <PrimableModel M>
double mean_surprisal(const M& model, std::span<const TokenSeq> set) {
  if (set.empty()) return 0.0;
  double sum = 0;
  for (const auto& s : set) sum += model.surprisal(s);
  return sum / static_cast<double>(set.size());
}

/// Runs all seven adaptation conditions against one base model. Scrambling,
/// when enabled, touches adaptation sets only; its stream depends on
/// (seed, instance, adaptation type).
template <PrimableModel M>
InstanceResult run_instance(const M& base, const StimulusBundle& bundle, const RunOptions& opt,
                            std::size_t instance = 0) {
  const auto& vocab = base.vocab();
  InstanceResult r;
  r.instance = instance;
  std::array<std::vector<TokenSeq>, kNumTypes> tests;
  for (auto t : kAllTypes) {
    tests[index_of(t)] = encode_stimuli(bundle.test_set(t), vocab);
    r.pre[index_of(t)] = mean_surprisal(base, tests[index_of(t)]);
  }
  for (auto a : kAllTypes) {
    std::vector<Stimulus> adapt_set = bundle.adapt_set(a);
    if (opt.scramble_adaptation) {
      Rng rng(derive_seed(opt.seed, instance, 0x5c00 + index_of(a)));
      for (auto& s : adapt_set) s = scramble(s, rng);
    }
    const auto ids = encode_stimuli(adapt_set, vocab);
    const M adapted = base.adapt(ids);
    for (auto t : kAllTypes) {
      const auto ai = index_of(a), ti = index_of(t);
      r.post[ai][ti] = mean_surprisal(adapted, tests[ti]);
      r.effect[ai][ti] = r.pre[ti] - r.post[ai][ti];
    }
  }
  return r;
}

/// Entrywise mean over instances, summed in list order.
struct AdaptationMatrix {
  EffectMatrix mean{};
  std::vector<EffectMatrix> instances;
};

inline AdaptationMatrix aggregate(std::span<const EffectMatrix> instances) {
  if (instances.empty()) throw InvalidArgument("aggregate: no instances");
  AdaptationMatrix m;
  m.instances.assign(instances.begin(), instances.end());
  for (const auto& x : instances)
    for (std::size_t a = 0; a < kNumTypes; ++a)
      for (std::size_t t = 0; t < kNumTypes; ++t) m.mean[a][t] += x[a][t];
  const double n = static_cast<double>(instances.size());
  for (auto& row : m.mean)
    for (auto& v : row) v /= n;
  return m;
}

inline AdaptationMatrix aggregate(std::span<const InstanceResult> results) {
  std::vector<EffectMatrix> xs;
  for (const auto& r : results) xs.push_back(r.effect);
  return aggregate(std::span<const EffectMatrix>(xs));
}

// ---------------------------------------------------------------------------
// Contrasts

struct SameDiff {
  double same = 0;       // effect[t][t]
  double different = 0;  // mean over a != t of effect[a][t]
};

inline std::array<SameDiff, kNumTypes> contrast_same_vs_diff(const EffectMatrix& m) {
  std::array<SameDiff, kNumTypes> out{};
  for (std::size_t t = 0; t < kNumTypes; ++t) {
    out[t].same = m[t][t];
    double sum = 0;
    for (std::size_t a = 0; a < kNumTypes; ++a)
      if (a != t) sum += m[a][t];
    out[t].different = sum / static_cast<double>(kNumTypes - 1);
  }
  return out;
}

/// cells[adapt_class][test_class] with class 0 = RC (5 types), 1 = coordination (2 types).
struct RcCoord {
  std::array<std::array<double, 2>, 2> cells{};
};

inline RcCoord contrast_rc_vs_coord(const EffectMatrix& m) {
  RcCoord out;
  std::array<std::array<std::size_t, 2>, 2> n{};
  for (auto a : kAllTypes)
    for (auto t : kAllTypes) {
      const std::size_t ca = is_rc(a) ? 0 : 1, ct = is_rc(t) ? 0 : 1;
      out.cells[ca][ct] += m[index_of(a)][index_of(t)];
      ++n[ca][ct];
    }
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) out.cells[i][j] /= static_cast<double>(n[i][j]);
  return out;
}

/// Mean effect over the 16 adapt x test pairs of the four voice/reduction
/// types, grouped by whether voice and reduction match.
struct VoiceReduction {
  double matched_voice_matched_reduction = 0;
  double matched_voice_mismatched_reduction = 0;
  double mismatched_voice_matched_reduction = 0;
  double mismatched_voice_mismatched_reduction = 0;

  std::array<double, 4> cells() const {
    return {matched_voice_matched_reduction, matched_voice_mismatched_reduction,
            mismatched_voice_matched_reduction, mismatched_voice_mismatched_reduction};
  }
};

inline constexpr std::array<std::string_view, 4> kVoiceReductionCells = {
    "matched-voice/matched-reduction", "matched-voice/mismatched-reduction",
    "mismatched-voice/matched-reduction", "mismatched-voice/mismatched-reduction"};

inline VoiceReduction contrast_voice_reduction(const EffectMatrix& m) {
  std::array<double, 4> sum{};
  std::array<std::size_t, 4> n{};
  for (auto a : kAllTypes)
    for (auto t : kAllTypes) {
      const auto va = voice_reduction(a), vt = voice_reduction(t);
      if (!va || !vt) continue;
      const std::size_t cell = (va->first == vt->first ? 0 : 2) + (va->second == vt->second ? 0 : 1);
      sum[cell] += m[index_of(a)][index_of(t)];
      ++n[cell];
    }
  return {sum[0] / static_cast<double>(n[0]), sum[1] / static_cast<double>(n[1]),
          sum[2] / static_cast<double>(n[2]), sum[3] / static_cast<double>(n[3])};
}

// ---------------------------------------------------------------------------
// Long-format results file: header row, then one row per
// (instance, adapt_type, test_type) with pre, post and effect in bits.

inline constexpr std::string_view kResultsHeader =
    "instance\tadapt_type\ttest_type\tpre_surprisal\tpost_surprisal\teffect";

inline std::string format_results(std::span<const InstanceResult> results) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : results)
    for (auto a : kAllTypes)
      for (auto t : kAllTypes) {
        const auto ai = index_of(a), ti = index_of(t);
        out += std::to_string(r.instance) + '\t' + std::string(type_name(a)) + '\t' + std::string(type_name(t)) +
               '\t' + format_double(r.pre[ti]) + '\t' + format_double(r.post[ai][ti]) + '\t' +
               format_double(r.effect[ai][ti]) + '\n';
      }
  return out;
}

inline std::vector<InstanceResult> parse_results(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || lines.front() != kResultsHeader) throw ParseError("results: missing header row");
  std::vector<InstanceResult> out;
  std::vector<std::array<std::array<bool, kNumTypes>, kNumTypes>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cols = split(lines[i], '\t');
    if (cols.size() != 6) throw ParseError("results line " + std::to_string(i + 1) + ": expected 6 columns");
    const auto inst = parse_number<std::size_t>(cols[0], "instance");
    const auto a = index_of(parse_type(cols[1])), t = index_of(parse_type(cols[2]));
    std::size_t k = 0;
    while (k < out.size() && out[k].instance != inst) ++k;
    if (k == out.size()) {
      out.push_back({});
      out.back().instance = inst;
      seen.push_back({});
    }
    auto& r = out[k];
    if (seen[k][a][t]) throw ParseError("results: duplicate row for instance " + std::to_string(inst));
    seen[k][a][t] = true;
    r.pre[t] = parse_number<double>(cols[3], "pre_surprisal");
    r.post[a][t] = parse_number<double>(cols[4], "post_surprisal");
    r.effect[a][t] = parse_number<double>(cols[5], "effect");
  }
  for (std::size_t k = 0; k < out.size(); ++k)
    for (const auto& row : seen[k])
      for (bool b : row)
        if (!b) throw ParseError("results: instance " + std::to_string(out[k].instance) + " is incomplete");
  return out;
}

}  // namespace primeprobe
