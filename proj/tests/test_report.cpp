#include <gtest/gtest.h>

#include "primeprobe/report.hpp"

using namespace primeprobe;

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  const auto back = ExperimentConfig::parse(c.serialize());
  EXPECT_EQ(back.serialize(), c.serialize());
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(Config, ParseOverridesAndComments) {
  const auto c = ExperimentConfig::parse(
      "# comment\n\nfamily = lstm\nmodels=10\nscramble_adaptation=true\nlstm.hidden_dim=32\nlstm.adapt_lr=0.05\n"
      "manifest.timestamp=ignored\n");
  EXPECT_EQ(c.family, Family::Lstm);
  EXPECT_EQ(c.models, 10u);
  EXPECT_TRUE(c.scramble_adaptation);
  EXPECT_EQ(c.lstm.hidden_dim, 32u);
  EXPECT_DOUBLE_EQ(c.lstm.adapt_lr, 0.05);
  EXPECT_NE(c.hash(), ExperimentConfig{}.hash());
}

TEST(Config, Errors) {
  EXPECT_THROW(ExperimentConfig::parse("colour=blue\n"), ParseError);
  EXPECT_THROW(ExperimentConfig::parse("models\n"), ParseError);
  EXPECT_THROW(ExperimentConfig::parse("models=ten\n"), ParseError);
  EXPECT_THROW(ExperimentConfig::parse("carry_state=maybe\n"), ParseError);
  EXPECT_THROW(ExperimentConfig::parse("seed=1\nseed=2\n"), InvalidArgument);
  EXPECT_THROW(ExperimentConfig::parse("family=transformer\n"), InvalidArgument);
  for (const char* bad : {"models=1", "order=5", "order=0", "discount=1", "p_mod=1.5", "carry_state=true"})
    EXPECT_THROW(ExperimentConfig::parse(bad).validate(), InvalidArgument) << bad;
  EXPECT_NO_THROW(ExperimentConfig::parse("family=lstm\ncarry_state=true\n").validate());
}

TEST(Manifest, RoundTrip) {
  RunManifest m;
  m.config.models = 3;
  m.config.seed = 42;
  m.corpus_checksum = 0x0123456789abcdefULL;
  m.lexicon_checksum = 0xfeedULL;
  m.stimuli_seed = 42;
  m.timestamp = "2026-01-02T03:04:05Z";
  const auto text = m.serialize();
  EXPECT_NE(text.find("manifest.config_hash=" + hex64(m.config.hash())), std::string::npos);
  EXPECT_NE(text.find("manifest.version.primeprobe=" + std::string(kVersion)), std::string::npos);
  const auto back = RunManifest::parse(text);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.corpus_checksum, m.corpus_checksum);
  EXPECT_EQ(back.config.seed, 42u);
  EXPECT_THROW(RunManifest::parse("manifest.corpus_checksum=xyz\n"), ParseError);
}

TEST(Timestamp, Format) {
  const auto t = utc_timestamp();
  ASSERT_EQ(t.size(), 20u);
  EXPECT_EQ(t[4], '-');
  EXPECT_EQ(t[10], 'T');
  EXPECT_EQ(t.back(), 'Z');
}

namespace {

BarChart one_bar() { return {"T & t", "bits", {"g"}, {"s"}, {{1.0}}, {{{0.5, 1.5}}}}; }

}  // namespace

// Geometry worked out by hand: range [0, 1.5] with ticks every 0.5; plot area
// x in [70, 130], y in [40, 300]; value 1.0 maps to y = 40 + 260 * 0.5 / 1.5.
TEST(Plot, OneBarGeometry) {
  const auto svg = plot_bars(one_bar());
  EXPECT_TRUE(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"150.00\" height=\"428.00\""));
  EXPECT_NE(svg.find("<rect x=\"82.00\" y=\"126.67\" width=\"34.00\" height=\"173.33\" fill=\"#4c72b0\"/>"),
            std::string::npos);
  EXPECT_NE(svg.find("<path d=\"M99.00 213.33V40.00M95.00 213.33H103.00M95.00 40.00H103.00\""), std::string::npos);
  EXPECT_NE(svg.find(">T &amp; t</text>"), std::string::npos);
  for (const char* tick : {">0.00<", ">0.50<", ">1.00<", ">1.50<"}) EXPECT_NE(svg.find(tick), std::string::npos);
  EXPECT_EQ(svg.find(">2.00<"), std::string::npos);
  EXPECT_TRUE(svg.ends_with("</svg>\n"));
  EXPECT_EQ(plot_bars(one_bar()), svg);
}

TEST(Plot, NegativeBarsHangFromZero) {
  BarChart ch{"", "", {"a", "b"}, {"x", "y"}, {{-1, 2}, {0.5, -0.25}}, {{{-1.5, -0.5}, {1, 3}}, {{0, 1}, {-1, 0}}}};
  const auto svg = plot_bars(ch);
  std::size_t rects = 0;
  for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
  EXPECT_EQ(rects, 1u + 4u + 2u);  // background, bars, legend
  EXPECT_EQ(svg.find("height=\"-"), std::string::npos);
}

TEST(Plot, Errors) {
  auto ch = one_bar();
  ch.values[0][0] = std::nan("");
  EXPECT_THROW(plot_bars(ch), InvalidArgument);
  ch = one_bar();
  ch.values.push_back({1});
  EXPECT_THROW(plot_bars(ch), InvalidArgument);
  EXPECT_THROW(plot_bars(BarChart{}), InvalidArgument);
}

TEST(Plot, ChartFromSummary) {
  const std::vector<SummaryRow> rows{{"c", "g1", "same", {1, 0, 2}}, {"c", "g1", "diff", {0.5, 0, 1}},
                                     {"c", "g2", "same", {3, 2, 4}}, {"c", "g2", "diff", {1.5, 1, 2}},
                                     {"other", "z", "same", {9, 9, 9}}};
  const auto ch = chart_from_summary(rows, "c", "title");
  EXPECT_EQ(ch.groups, (std::vector<std::string>{"g1", "g2"}));
  EXPECT_EQ(ch.series, (std::vector<std::string>{"same", "diff"}));
  EXPECT_EQ(ch.values[1][1], 1.5);
  EXPECT_EQ(ch.ci[1][0], std::make_pair(2.0, 4.0));
  EXPECT_THROW(chart_from_summary(rows, "none", "t"), InvalidArgument);
  // A missing cell surfaces as a plotting error rather than a silent zero.
  const auto partial = chart_from_summary(std::span(rows).first(3), "c", "t");
  EXPECT_THROW(plot_bars(partial), InvalidArgument);
}
