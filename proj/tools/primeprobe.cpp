// Command-line driver. Errors are reported as one tab-separated line on
// stderr, "error<TAB><kind><TAB><message>", with an exit code per kind.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "primeprobe/primeprobe.hpp"

namespace pp = primeprobe;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kParse = 4,
  kInfeasible = 5,
  kNumeric = 6,
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> models;
  std::optional<std::string> family;
  bool scramble = false;
  std::optional<std::size_t> order;
  std::optional<double> discount;
  std::optional<std::string> corpus;
  std::optional<std::string> lexicon;
  std::string out = "out";
  bool quiet = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key=value config file (a manifest.txt also works)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--models", f.models, "number of model instances (>= 2)");
  cmd->add_option("--family", f.family, "model family")->check(CLI::IsMember({"ngram", "lstm"}));
  cmd->add_flag("--scramble-adaptation", f.scramble, "scramble adaptation sentences before adapting");
  cmd->add_option("--order", f.order, "n-gram order (1-4)");
  cmd->add_option("--discount", f.discount, "Kneser-Ney discount in (0,1)");
  cmd->add_option("--corpus", f.corpus, "training text, one or more sentences per line");
  cmd->add_option("--lexicon", f.lexicon, "lexicon TSV");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--quiet", f.quiet, "suppress progress messages");
}

pp::ExperimentConfig resolve(const Flags& f) {
  pp::ExperimentConfig c;
  if (!f.config.empty()) {
    const auto text = pp::read_file(f.config);
    c = pp::ExperimentConfig::parse(text);
    if (text.find("manifest.") != std::string::npos) pp::verify_manifest_inputs(pp::RunManifest::parse(text));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.models) c.models = *f.models;
  if (f.family) c.family = pp::parse_family(*f.family);
  if (f.scramble) c.scramble_adaptation = true;
  if (f.order) c.order = *f.order;
  if (f.discount) c.discount = *f.discount;
  if (f.corpus) c.corpus = *f.corpus;
  if (f.lexicon) c.lexicon = *f.lexicon;
  c.validate();
  return c;
}

int fail(std::string_view kind, std::string_view msg, int code) {
  std::string m(msg);
  for (auto& ch : m)
    if (ch == '\n' || ch == '\t') ch = ' ';
  std::cerr << "error\t" << kind << '\t' << m << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Syntactic priming probe for n-gram and LSTM language models"};
  app.require_subcommand(1);
  Flags f;
  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"gen-stimuli", "generate adaptation and test sets into OUT/stimuli"},
      {"train-ngram", "train Kneser-Ney models on disjoint corpus splits into OUT/models"},
      {"train-lstm", "train LSTM models on disjoint corpus splits into OUT/models"},
      {"run-priming", "adapt and rescore saved models, writing OUT/results.tsv"},
      {"analyze", "significance tests from OUT/results.tsv"},
      {"plot", "SVG charts from OUT/summary.tsv"},
      {"all", "every step in memory, plus OUT/manifest.txt"},
  };
  for (const auto& c : cmds) add_common(app.add_subcommand(c.name, c.help), f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kUsage);
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  const pp::Paths paths{f.out};
  const pp::Logger log = f.quiet ? pp::Logger{} : pp::Logger([](const std::string& m) { std::cerr << m << '\n'; });
  try {
    if (cmd == "analyze") {
      pp::step_analyze(paths);
      return kOk;
    }
    if (cmd == "plot") {
      pp::step_plot(paths);
      return kOk;
    }
    auto cfg = resolve(f);
    if (cmd == "train-ngram" || cmd == "train-lstm") {
      const auto want = cmd == "train-ngram" ? pp::Family::Ngram : pp::Family::Lstm;
      if (f.family && pp::parse_family(*f.family) != want)
        return fail("usage", "--family " + *f.family + " contradicts " + cmd, kUsage);
      cfg.family = want;
    }
    if (cmd == "gen-stimuli") pp::step_gen_stimuli(cfg, paths);
    else if (cmd == "train-ngram" || cmd == "train-lstm") pp::step_train(cfg, paths, log);
    else if (cmd == "run-priming") pp::step_run_priming(cfg, paths, log);
    else if (cmd == "all") pp::run_all(cfg, paths, log);
    return kOk;
  } catch (const pp::InvalidArgument& e) {
    return fail("invalid-argument", e.what(), kUsage);
  } catch (const pp::IoError& e) {
    return fail("io", e.what(), kIo);
  } catch (const pp::ParseError& e) {
    return fail("parse", e.what(), kParse);
  } catch (const pp::InfeasibleError& e) {
    return fail("infeasible", e.what(), kInfeasible);
  } catch (const pp::NumericError& e) {
    return fail("numeric", e.what(), kNumeric);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what(), kIo);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kInternal);
  }
}
