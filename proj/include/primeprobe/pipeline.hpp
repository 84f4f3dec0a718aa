#pragma once

// End-to-end experiment steps shared by the command-line tool and the
// acceptance suite. Every step reads and writes files under one output
// directory:
//
//   stimuli/{adaptation,test}.{txt,meta.tsv}
//   vocab.txt
//   models/ngram_<i>.kn | models/lstm_<i>.bin
//   results.tsv, analysis.tsv, summary.tsv
//   figures/{same_vs_diff,rc_vs_coord,voice_reduction}.svg
//   manifest.txt

#include <filesystem>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "primeprobe/corpus.hpp"
#include "primeprobe/kn_model.hpp"
#include "primeprobe/lstm.hpp"
#include "primeprobe/priming.hpp"
#include "primeprobe/report.hpp"
#include "primeprobe/stats.hpp"
#include "primeprobe/stimuli.hpp"

namespace primeprobe {

namespace fs = std::filesystem;

using Logger = std::function<void(const std::string&)>;

struct Paths {
  fs::path out;
  fs::path stimuli() const { return out / "stimuli"; }
  fs::path vocab() const { return out / "vocab.txt"; }
  fs::path models() const { return out / "models"; }
  fs::path ngram_model(std::size_t i) const { return models() / ("ngram_" + std::to_string(i) + ".kn"); }
  fs::path lstm_model(std::size_t i) const { return models() / ("lstm_" + std::to_string(i) + ".bin"); }
  fs::path results() const { return out / "results.tsv"; }
  fs::path analysis() const { return out / "analysis.tsv"; }
  fs::path summary() const { return out / "summary.tsv"; }
  fs::path figures() const { return out / "figures"; }
  fs::path manifest() const { return out / "manifest.txt"; }
};

/// Tokenized training text plus a checksum of the raw bytes.
struct LoadedCorpus {
  std::vector<std::vector<std::string>> sentences;
  std::uint64_t checksum = 0;
};

inline LoadedCorpus load_corpus(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  LoadedCorpus c{read_sentences(in), fnv1a(bytes)};
  if (c.sentences.empty()) throw InvalidArgument("corpus " + path.string() + " has no sentences");
  return c;
}

/// Every surface a stimulus can contain: lexicon words plus frame literals.
inline std::vector<std::string> stimulus_surfaces(const Lexicon& lex, const std::vector<Frame>& frames) {
  std::vector<std::string> out;
  for (const auto& e : lex.entries()) out.push_back(e.pos == Pos::Verb ? e.past : e.lemma);
  for (const auto& f : frames)
    for (const auto& s : f.slots)
      if (s.role == Role::Literal && std::find(out.begin(), out.end(), s.literal) == out.end()) out.push_back(s.literal);
  return out;
}

inline void require_in_vocab(const Lexicon& lex, const std::vector<Frame>& frames, const Vocabulary& vocab) {
  std::string missing;
  for (const auto& w : stimulus_surfaces(lex, frames))
    if (!vocab.contains(w)) missing += (missing.empty() ? "" : ",") + w;
  if (!missing.empty())
    throw InfeasibleError("vocabulary mismatch: stimulus words below min_count in the corpus: " + missing);
}

inline StimulusBundle make_stimuli(const ExperimentConfig& cfg, const Lexicon& lex) {
  GenerateOptions opt;
  opt.n_adapt = cfg.n_adapt;
  opt.n_test = cfg.n_test;
  opt.seed = cfg.seed;
  opt.p_mod = cfg.p_mod;
  return generate(default_frames(), lex, opt);
}

/// Shared vocabulary over the whole corpus and the disjoint per-instance splits.
struct TrainingData {
  std::shared_ptr<const Vocabulary> vocab;
  std::vector<Corpus> parts;
};

inline TrainingData prepare_training(const ExperimentConfig& cfg, const LoadedCorpus& corpus) {
  TrainingData d;
  d.vocab = std::make_shared<const Vocabulary>(
      build_vocab(std::span<const std::vector<std::string>>(corpus.sentences), cfg.min_count));
  const Corpus all = encode_corpus(corpus.sentences, *d.vocab, "corpus");
  d.parts = split_disjoint(all, cfg.models, derive_seed(cfg.seed, 0xc0ULL));
  return d;
}

inline LstmConfig instance_lstm_config(const ExperimentConfig& cfg, std::size_t i) {
  LstmConfig c = cfg.lstm;
  c.seed = derive_seed(cfg.seed, 0x1500ULL, i);
  return c;
}

using LstmNet = LstmModel<float>;

inline LstmNet train_lstm_instance(const ExperimentConfig& cfg, const TrainingData& d, std::size_t i,
                                   const Logger& log) {
  const auto lc = instance_lstm_config(cfg, i);
  LstmNet net = LstmNet::init(lc, d.vocab->size(), lc.seed);
  const auto tr = train_lstm(net, d.parts[i], *d.vocab);
  if (log) {
    std::string msg = "lstm " + std::to_string(i) + " trained on " + std::to_string(d.parts[i].token_count) +
                      " tokens; epoch bits/token:";
    for (double b : tr.epoch_bits) msg += ' ' + format_fixed(b, 3);
    log(msg);
  }
  return net;
}

inline RunOptions run_options(const ExperimentConfig& cfg) { return {cfg.scramble_adaptation, cfg.seed}; }

/// Analysis tables and figures from a list of instance results.
inline void write_analysis(const Paths& p, std::span<const InstanceResult> results) {
  const auto an = analyze(results);
  write_file_atomic(p.analysis(), format_analysis(an));
  write_file_atomic(p.summary(), format_summary(an));
}

inline void write_figures(const Paths& p, std::string_view summary_text) {
  const auto rows = parse_summary(summary_text);
  write_file_atomic(p.figures() / "same_vs_diff.svg",
                    plot_bars(chart_from_summary(rows, "same_vs_diff", "Same-type vs. different-type adaptation")));
  write_file_atomic(p.figures() / "rc_vs_coord.svg",
                    plot_bars(chart_from_summary(rows, "rc_vs_coord", "RC vs. coordination adaptation")));
  write_file_atomic(p.figures() / "voice_reduction.svg",
                    plot_bars(chart_from_summary(rows, "voice_reduction", "Voice and reduction match")));
}

// ---------------------------------------------------------------------------
// Steps

inline void step_gen_stimuli(const ExperimentConfig& cfg, const Paths& p) {
  const auto lex = Lexicon::load(cfg.lexicon);
  save_bundle(make_stimuli(cfg, lex), p.stimuli());
}

inline void step_train(const ExperimentConfig& cfg, const Paths& p, const Logger& log) {
  const auto corpus = load_corpus(cfg.corpus);
  const auto lex = Lexicon::load(cfg.lexicon);
  const auto data = prepare_training(cfg, corpus);
  require_in_vocab(lex, default_frames(), *data.vocab);
  write_file_atomic(p.vocab(), data.vocab->serialize());
  for (std::size_t i = 0; i < cfg.models; ++i) {
    if (cfg.family == Family::Ngram) {
      write_file_atomic(p.ngram_model(i), train_kn(data.parts[i], data.vocab, cfg.order, cfg.discount).serialize());
    } else {
      write_file_atomic(p.lstm_model(i), train_lstm_instance(cfg, data, i, log).serialize(data.vocab->fingerprint()));
    }
    if (log) log("trained " + std::string(family_name(cfg.family)) + " model " + std::to_string(i));
  }
}

/// Runs the priming experiment over saved models and stimuli.
inline std::vector<InstanceResult> step_run_priming(const ExperimentConfig& cfg, const Paths& p, const Logger& log) {
  const auto bundle = load_bundle(p.stimuli());
  std::vector<InstanceResult> results;
  if (cfg.family == Family::Ngram) {
    for (std::size_t i = 0; i < cfg.models; ++i) {
      const auto m = KNModel::deserialize(read_file(p.ngram_model(i)));
      results.push_back(run_instance(m, bundle, run_options(cfg), i));
      if (log) log("primed ngram model " + std::to_string(i));
    }
  } else {
    auto vocab = std::make_shared<const Vocabulary>(Vocabulary::deserialize(read_file(p.vocab())));
    for (std::size_t i = 0; i < cfg.models; ++i) {
      std::uint64_t vh = 0;
      auto net = LstmNet::deserialize(read_file(p.lstm_model(i)), &vh);
      if (vh != vocab->fingerprint())
        throw InvalidArgument("vocabulary mismatch: " + p.lstm_model(i).string() + " was trained with another vocabulary");
      const LstmLanguageModel<float> m(std::move(net), vocab, cfg.carry_state);
      results.push_back(run_instance(m, bundle, run_options(cfg), i));
      if (log) log("primed lstm model " + std::to_string(i));
    }
  }
  write_file_atomic(p.results(), format_results(results));
  return results;
}

inline void step_analyze(const Paths& p) {
  const auto results = parse_results(read_file(p.results()));
  write_analysis(p, results);
}

inline void step_plot(const Paths& p) { write_figures(p, read_file(p.summary())); }

/// Full pipeline in memory (no model files): stimuli, training, priming,
/// analysis, figures and manifest. Results depend only on the config and
/// the bytes of the corpus and lexicon.
inline std::vector<InstanceResult> run_all(const ExperimentConfig& cfg, const Paths& p, const Logger& log) {
  cfg.validate();
  const std::string lex_bytes = read_file(cfg.lexicon);
  const auto lex = Lexicon::parse(lex_bytes);
  const auto corpus = load_corpus(cfg.corpus);
  const auto bundle = make_stimuli(cfg, lex);
  save_bundle(bundle, p.stimuli());
  const auto data = prepare_training(cfg, corpus);
  require_in_vocab(lex, default_frames(), *data.vocab);
  write_file_atomic(p.vocab(), data.vocab->serialize());
  if (log)
    log("corpus: " + std::to_string(corpus.sentences.size()) + " sentences, vocabulary " +
        std::to_string(data.vocab->size()) + ", " + std::to_string(cfg.models) + " splits");

  std::vector<InstanceResult> results;
  for (std::size_t i = 0; i < cfg.models; ++i) {
    if (cfg.family == Family::Ngram) {
      const auto m = train_kn(data.parts[i], data.vocab, cfg.order, cfg.discount);
      results.push_back(run_instance(m, bundle, run_options(cfg), i));
    } else {
      const LstmLanguageModel<float> m(train_lstm_instance(cfg, data, i, log), data.vocab, cfg.carry_state);
      results.push_back(run_instance(m, bundle, run_options(cfg), i));
    }
    if (log) log("instance " + std::to_string(i) + " done");
  }
  write_file_atomic(p.results(), format_results(results));
  write_analysis(p, results);
  write_figures(p, read_file(p.summary()));

  RunManifest man{cfg, corpus.checksum, fnv1a(lex_bytes), cfg.seed, utc_timestamp()};
  write_file_atomic(p.manifest(), man.serialize());
  return results;
}

/// Checks that the corpus and lexicon on disk match a manifest's checksums.
inline void verify_manifest_inputs(const RunManifest& m) {
  if (m.corpus_checksum != 0 && fnv1a(read_file(m.config.corpus)) != m.corpus_checksum)
    throw InvalidArgument("manifest: corpus checksum mismatch for " + m.config.corpus);
  if (m.lexicon_checksum != 0 && fnv1a(read_file(m.config.lexicon)) != m.lexicon_checksum)
    throw InvalidArgument("manifest: lexicon checksum mismatch for " + m.config.lexicon);
}

}  // namespace primeprobe
