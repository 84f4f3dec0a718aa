#pragma once

// Experiment configuration, run manifests and SVG bar charts.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "primeprobe/lstm.hpp"
#include "primeprobe/stats.hpp"
#include "primeprobe/util.hpp"

namespace primeprobe {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Family { Ngram, Lstm };

inline std::string_view family_name(Family f) { return f == Family::Ngram ? "ngram" : "lstm"; }

inline Family parse_family(std::string_view s) {
  if (s == "ngram") return Family::Ngram;
  if (s == "lstm") return Family::Lstm;
  throw InvalidArgument("unknown model family '" + std::string(s) + "' (expected ngram or lstm)");
}

/// Flat key=value experiment configuration. Blank lines and lines starting
/// with '#' are ignored, as are keys under "manifest." so that a manifest file
/// can be fed back in as a configuration.
struct ExperimentConfig {
  Family family = Family::Ngram;
  std::size_t models = 20;
  std::uint64_t seed = 1;
  bool scramble_adaptation = false;
  std::size_t order = 3;
  double discount = 0.75;
  std::string corpus = "data/desk_corpus.txt";
  std::string lexicon = "data/lexicon.tsv";
  std::size_t min_count = 2;
  std::size_t n_adapt = 20;
  std::size_t n_test = 50;
  double p_mod = 0.5;
  bool carry_state = false;
  LstmConfig lstm;

  void validate() const {
    if (models < 2) throw InvalidArgument("config: models must be >= 2");
    if (order < 1 || order > 4) throw InvalidArgument("config: order must lie in [1, 4]");
    if (!(discount > 0 && discount < 1)) throw InvalidArgument("config: discount must lie in (0, 1)");
    if (min_count < 1) throw InvalidArgument("config: min_count must be >= 1");
    if (n_adapt < 1 || n_test < 1) throw InvalidArgument("config: set sizes must be >= 1");
    if (p_mod < 0 || p_mod > 1) throw InvalidArgument("config: p_mod must lie in [0, 1]");
    if (family == Family::Ngram && carry_state)
      throw InvalidArgument("config: carry_state applies to the lstm family only");
    lstm.validate();
  }

  void set(std::string_view key, std::string_view value) {
    auto sz = [&] { return parse_number<std::size_t>(value, key); };
    auto dbl = [&] { return parse_number<double>(value, key); };
    auto boolean = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw ParseError("config: '" + std::string(key) + "' expects true or false");
    };
    if (key == "family") family = parse_family(value);
    else if (key == "models") models = sz();
    else if (key == "seed") seed = parse_number<std::uint64_t>(value, key);
    else if (key == "scramble_adaptation") scramble_adaptation = boolean();
    else if (key == "order") order = sz();
    else if (key == "discount") discount = dbl();
    else if (key == "corpus") corpus = value;
    else if (key == "lexicon") lexicon = value;
    else if (key == "min_count") min_count = sz();
    else if (key == "n_adapt") n_adapt = sz();
    else if (key == "n_test") n_test = sz();
    else if (key == "p_mod") p_mod = dbl();
    else if (key == "carry_state") carry_state = boolean();
    else if (key == "lstm.embed_dim") lstm.embed_dim = sz();
    else if (key == "lstm.hidden_dim") lstm.hidden_dim = sz();
    else if (key == "lstm.num_layers") lstm.num_layers = sz();
    else if (key == "lstm.bptt_len") lstm.bptt_len = sz();
    else if (key == "lstm.batch_size") lstm.batch_size = sz();
    else if (key == "lstm.epochs") lstm.epochs = sz();
    else if (key == "lstm.train_lr") lstm.train_lr = dbl();
    else if (key == "lstm.adapt_lr") lstm.adapt_lr = dbl();
    else if (key == "lstm.grad_clip") lstm.grad_clip = dbl();
    else throw ParseError("config: unknown key '" + std::string(key) + "'");
  }

  static ExperimentConfig parse(std::string_view text) {
    ExperimentConfig c;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t, std::less<>> seen;
    for (auto raw : split(text, '\n')) {
      ++lineno;
      const auto line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
      const auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (key.starts_with("manifest.")) continue;
      if (auto [it, fresh] = seen.emplace(std::string(key), lineno); !fresh)
        throw InvalidArgument("config: key '" + std::string(key) + "' set twice (lines " +
                              std::to_string(it->second) + " and " + std::to_string(lineno) + ")");
      c.set(key, value);
    }
    return c;
  }

  /// Canonical form: every key in a fixed order.
  std::string serialize() const {
    std::string o;
    auto kv = [&](std::string_view k, const std::string& v) { (((o += k) += '=') += v) += '\n'; };
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    kv("family", std::string(family_name(family)));
    kv("models", std::to_string(models));
    kv("seed", std::to_string(seed));
    kv("scramble_adaptation", b(scramble_adaptation));
    kv("order", std::to_string(order));
    kv("discount", format_double(discount));
    kv("corpus", corpus);
    kv("lexicon", lexicon);
    kv("min_count", std::to_string(min_count));
    kv("n_adapt", std::to_string(n_adapt));
    kv("n_test", std::to_string(n_test));
    kv("p_mod", format_double(p_mod));
    kv("carry_state", b(carry_state));
    kv("lstm.embed_dim", std::to_string(lstm.embed_dim));
    kv("lstm.hidden_dim", std::to_string(lstm.hidden_dim));
    kv("lstm.num_layers", std::to_string(lstm.num_layers));
    kv("lstm.bptt_len", std::to_string(lstm.bptt_len));
    kv("lstm.batch_size", std::to_string(lstm.batch_size));
    kv("lstm.epochs", std::to_string(lstm.epochs));
    kv("lstm.train_lr", format_double(lstm.train_lr));
    kv("lstm.adapt_lr", format_double(lstm.adapt_lr));
    kv("lstm.grad_clip", format_double(lstm.grad_clip));
    return o;
  }

  std::uint64_t hash() const { return fnv1a(serialize()); }
};

/// Provenance written next to every run. The file is the canonical config
/// followed by "manifest.*" lines, so it can be passed back as --config.
struct RunManifest {
  ExperimentConfig config;
  std::uint64_t corpus_checksum = 0;
  std::uint64_t lexicon_checksum = 0;
  std::uint64_t stimuli_seed = 0;
  std::string timestamp;

  std::string serialize() const {
    std::string o = config.serialize();
    o += "manifest.config_hash=" + hex64(config.hash()) + '\n';
    o += "manifest.seed=" + std::to_string(config.seed) + '\n';
    o += "manifest.stimuli_seed=" + std::to_string(stimuli_seed) + '\n';
    o += "manifest.corpus_checksum=" + hex64(corpus_checksum) + '\n';
    o += "manifest.lexicon_checksum=" + hex64(lexicon_checksum) + '\n';
    o += "manifest.version.primeprobe=" + std::string(kVersion) + '\n';
    o += "manifest.version.eigen=" + std::to_string(EIGEN_WORLD_VERSION) + '.' +
         std::to_string(EIGEN_MAJOR_VERSION) + '.' + std::to_string(EIGEN_MINOR_VERSION) + '\n';
    o += "manifest.version.boost=" + std::to_string(BOOST_VERSION) + '\n';
    o += "manifest.timestamp=" + timestamp + '\n';
    return o;
  }

  /// Reads the manifest-only fields; the config comes from ExperimentConfig::parse.
  static RunManifest parse(std::string_view text) {
    RunManifest m;
    m.config = ExperimentConfig::parse(text);
    for (auto raw : split(text, '\n')) {
      const auto line = trim(raw);
      const auto eq = line.find('=');
      if (!line.starts_with("manifest.") || eq == std::string_view::npos) continue;
      const auto key = line.substr(9, eq - 9), value = line.substr(eq + 1);
      auto hex = [&] {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v, 16);
        if (ec != std::errc{} || p != value.data() + value.size())
          throw ParseError("manifest: bad hex value for " + std::string(key));
        return v;
      };
      if (key == "corpus_checksum") m.corpus_checksum = hex();
      else if (key == "lexicon_checksum") m.lexicon_checksum = hex();
      else if (key == "stimuli_seed") m.stimuli_seed = parse_number<std::uint64_t>(value, key);
      else if (key == "timestamp") m.timestamp = value;
    }
    return m;
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// SVG bar charts

/// Grouped bars: values[g][s] is series s within group g; ci[g][s] its
/// (low, high) whisker.
struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> groups;
  std::vector<std::string> series;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::pair<double, double>>> ci;
};

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline std::string px(double v) { return format_fixed(v, 2); }

// Round step of the form {1,2,5} x 10^k yielding about `target` ticks.
inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10 * mag;
}

}  // namespace detail

inline constexpr std::array<std::string_view, 4> kPalette = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};

/// Renders a standalone SVG. Output depends only on the chart contents.
inline std::string plot_bars(const BarChart& ch) {
  const std::size_t G = ch.groups.size(), S = ch.series.size();
  if (G == 0 || S == 0) throw InvalidArgument("plot_bars: no groups or series");
  if (ch.values.size() != G || ch.ci.size() != G) throw InvalidArgument("plot_bars: values/ci length != groups");
  double lo = 0, hi = 0;
  for (std::size_t g = 0; g < G; ++g) {
    if (ch.values[g].size() != S || ch.ci[g].size() != S)
      throw InvalidArgument("plot_bars: group " + std::to_string(g) + " length != series");
    for (std::size_t s = 0; s < S; ++s) {
      const double v = ch.values[g][s];
      const auto [a, b] = ch.ci[g][s];
      if (!std::isfinite(v) || !std::isfinite(a) || !std::isfinite(b))
        throw InvalidArgument("plot_bars: non-finite value");
      lo = std::min({lo, v, a, b});
      hi = std::max({hi, v, a, b});
    }
  }
  if (hi == lo) hi = lo + 1;
  const double step = detail::nice_step(hi - lo, 5);
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;

  const double left = 70, right = 20, top = 40, bottom = 110;
  const double group_w = std::max(60.0, 22.0 * static_cast<double>(S) + 24);
  const double plot_w = group_w * static_cast<double>(G), plot_h = 260;
  const double legend_h = 18.0 * static_cast<double>(S);
  const double W = left + plot_w + right, Hh = top + plot_h + bottom + legend_h;
  auto y = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::px(W) + "\" height=\"" + detail::px(Hh) +
       "\" viewBox=\"0 0 " + detail::px(W) + ' ' + detail::px(Hh) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + detail::px(W / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::xml_escape(ch.title) + "</text>\n";
  for (double t = lo; t <= hi + step / 2; t += step) {
    const double v = std::abs(t) < step * 1e-9 ? 0.0 : t;
    o += "<line x1=\"" + detail::px(left) + "\" x2=\"" + detail::px(left + plot_w) + "\" y1=\"" + detail::px(y(v)) +
         "\" y2=\"" + detail::px(y(v)) + "\" stroke=\"#dddddd\"/>\n";
    o += "<text x=\"" + detail::px(left - 6) + "\" y=\"" + detail::px(y(v) + 4) + "\" text-anchor=\"end\">" +
         format_fixed(v, step < 0.1 ? 3 : 2) + "</text>\n";
  }
  o += "<line x1=\"" + detail::px(left) + "\" x2=\"" + detail::px(left + plot_w) + "\" y1=\"" + detail::px(y(0)) +
       "\" y2=\"" + detail::px(y(0)) + "\" stroke=\"black\"/>\n";
  o += "<text transform=\"translate(16," + detail::px(top + plot_h / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + detail::xml_escape(ch.y_label) + "</text>\n";

  const double bar_w = (group_w - 24) / static_cast<double>(S);
  for (std::size_t g = 0; g < G; ++g) {
    const double gx = left + group_w * static_cast<double>(g) + 12;
    for (std::size_t s = 0; s < S; ++s) {
      const double v = ch.values[g][s];
      const double x = gx + bar_w * static_cast<double>(s);
      const double y0 = y(std::max(v, 0.0)), y1 = y(std::min(v, 0.0));
      o += "<rect x=\"" + detail::px(x) + "\" y=\"" + detail::px(y0) + "\" width=\"" + detail::px(bar_w - 2) +
           "\" height=\"" + detail::px(y1 - y0) + "\" fill=\"" + std::string(kPalette[s % kPalette.size()]) +
           "\"/>\n";
      const double cx = x + (bar_w - 2) / 2;
      const auto [a, b] = ch.ci[g][s];
      o += "<path d=\"M" + detail::px(cx) + ' ' + detail::px(y(a)) + "V" + detail::px(y(b)) + "M" +
           detail::px(cx - 4) + ' ' + detail::px(y(a)) + "H" + detail::px(cx + 4) + "M" + detail::px(cx - 4) +
           ' ' + detail::px(y(b)) + "H" + detail::px(cx + 4) + "\" stroke=\"black\" fill=\"none\"/>\n";
    }
    const double lx = gx + (group_w - 24) / 2, ly = top + plot_h + 12;
    o += "<text x=\"" + detail::px(lx) + "\" y=\"" + detail::px(ly) + "\" text-anchor=\"end\" transform=\"rotate(-35 " +
         detail::px(lx) + ' ' + detail::px(ly) + ")\">" + detail::xml_escape(ch.groups[g]) + "</text>\n";
  }
  for (std::size_t s = 0; s < S; ++s) {
    const double ly = top + plot_h + bottom + 18.0 * static_cast<double>(s);
    o += "<rect x=\"" + detail::px(left) + "\" y=\"" + detail::px(ly - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
         std::string(kPalette[s % kPalette.size()]) + "\"/>\n";
    o += "<text x=\"" + detail::px(left + 18) + "\" y=\"" + detail::px(ly) + "\">" + detail::xml_escape(ch.series[s]) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

/// Groups summary rows of one chart into a BarChart, keeping first-seen order.
inline BarChart chart_from_summary(std::span<const SummaryRow> rows, std::string_view chart, std::string title,
                                   std::string y_label = "adaptation effect (bits)") {
  BarChart ch{std::move(title), std::move(y_label), {}, {}, {}, {}};
  auto index = [](std::vector<std::string>& v, const std::string& x) {
    auto it = std::find(v.begin(), v.end(), x);
    if (it != v.end()) return static_cast<std::size_t>(it - v.begin());
    v.push_back(x);
    return v.size() - 1;
  };
  for (const auto& r : rows)
    if (r.chart == chart) {
      index(ch.groups, r.group);
      index(ch.series, r.bar);
    }
  if (ch.groups.empty()) throw InvalidArgument("chart_from_summary: no rows for chart '" + std::string(chart) + "'");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ch.values.assign(ch.groups.size(), std::vector<double>(ch.series.size(), nan));
  ch.ci.assign(ch.groups.size(), std::vector<std::pair<double, double>>(ch.series.size(), {nan, nan}));
  for (const auto& r : rows)
    if (r.chart == chart) {
      const auto g = index(ch.groups, r.group), s = index(ch.series, r.bar);
      ch.values[g][s] = r.value.mean;
      ch.ci[g][s] = {r.value.low, r.value.high};
    }
  return ch;
}

}  // namespace primeprobe
