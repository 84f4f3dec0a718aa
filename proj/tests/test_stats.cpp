#include <gtest/gtest.h>

#include "primeprobe/stats.hpp"

using namespace primeprobe;

// Reference values below were computed with scipy.stats (ttest_rel,
// binomtest, t.interval) and statsmodels multipletests(method="holm").

TEST(PairedT, MatchesReference) {
  const PairedSample s{{1.2, 0.4, 2.2, 1.9, 0.3, 1.1, 0.8, 1.5}, {0.9, 0.6, 1.1, 1.0, 0.35, 0.2, 0.85, 0.7}};
  const auto r = paired_t(s);
  EXPECT_NEAR(r.statistic, 2.5150372842671986, 1e-12);
  EXPECT_NEAR(r.p_value, 0.04010043564982247, 1e-12);
  EXPECT_NEAR(r.mean_difference, 0.4625, 1e-15);
  EXPECT_EQ(r.n, 8u);
}

TEST(PairedT, Errors) {
  EXPECT_THROW(paired_t({{1, 2}, {1}}), InvalidArgument);
  EXPECT_THROW(paired_t({{1}, {0}}), InvalidArgument);
  EXPECT_THROW(paired_t({{1, 2, 3}, {0, 1, 2}}), NumericError);
}

// Properties: shifting both arms leaves t unchanged, scaling both by c > 0
// leaves t unchanged, and swapping arms flips the sign of t but not p.
TEST(PairedT, InvarianceProperties) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    PairedSample s;
    const auto n = 3 + rng.below(15);
    for (std::size_t i = 0; i < n; ++i) {
      s.a.push_back(rng.uniform() * 4 - 1);
      s.b.push_back(rng.uniform() * 4 - 2);
    }
    const auto r = paired_t(s);
    PairedSample shifted = s, scaled = s, swapped{s.b, s.a};
    const double k = rng.uniform() * 10 - 5, c = 0.1 + rng.uniform() * 10;
    for (auto& v : shifted.a) v += k;
    for (auto& v : shifted.b) v += k;
    for (auto& v : scaled.a) v *= c;
    for (auto& v : scaled.b) v *= c;
    EXPECT_NEAR(paired_t(shifted).statistic, r.statistic, 1e-8 * (1 + std::fabs(r.statistic)));
    EXPECT_NEAR(paired_t(scaled).statistic, r.statistic, 1e-8 * (1 + std::fabs(r.statistic)));
    EXPECT_NEAR(paired_t(swapped).statistic, -r.statistic, 1e-12 * (1 + std::fabs(r.statistic)));
    EXPECT_NEAR(paired_t(swapped).p_value, r.p_value, 1e-12);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(SignTest, MatchesReference) {
  auto sample = [](std::size_t pos, std::size_t neg, std::size_t ties) {
    PairedSample s;
    for (std::size_t i = 0; i < pos; ++i) s.a.push_back(1), s.b.push_back(0);
    for (std::size_t i = 0; i < neg; ++i) s.a.push_back(0), s.b.push_back(1);
    for (std::size_t i = 0; i < ties; ++i) s.a.push_back(2), s.b.push_back(2);
    return s;
  };
  EXPECT_NEAR(sign_test(sample(6, 2, 0)).p_value, 0.2890625, 1e-14);
  EXPECT_NEAR(sign_test(sample(0, 10, 0)).p_value, 0.001953125, 1e-14);
  EXPECT_NEAR(sign_test(sample(9, 11, 3)).p_value, 0.8238029479980469, 1e-12);
  EXPECT_NEAR(sign_test(sample(17, 3, 0)).p_value, 0.0025768280029296875, 1e-14);
  EXPECT_EQ(sign_test(sample(17, 3, 0)).statistic, 17.0);
  EXPECT_EQ(sign_test(sample(0, 0, 4)).p_value, 1.0);
  EXPECT_EQ(sign_test(sample(5, 5, 0)).p_value, 1.0);
}

TEST(SignTest, SymmetricUnderSwap) {
  for (std::size_t pos = 0; pos <= 12; ++pos) {
    PairedSample s;
    for (std::size_t i = 0; i < 12; ++i) {
      s.a.push_back(i < pos ? 1.0 : 0.0);
      s.b.push_back(i < pos ? 0.0 : 1.0);
    }
    EXPECT_NEAR(sign_test(s).p_value, sign_test({s.b, s.a}).p_value, 1e-15);
  }
}

TEST(Holm, MatchesReference) {
  const std::vector<double> p{0.01, 0.04, 0.03, 0.005, 0.2, 0.04};
  const std::vector<double> expect{0.05, 0.12, 0.12, 0.03, 0.2, 0.12};
  const auto adj = holm_correct(p);
  ASSERT_EQ(adj.size(), expect.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(adj[i], expect[i], 1e-15);
  EXPECT_TRUE(holm_correct(std::vector<double>{}).empty());
  EXPECT_THROW(holm_correct(std::vector<double>{0.1, 1.5}), InvalidArgument);
  EXPECT_THROW(holm_correct(std::vector<double>{std::nan("")}), InvalidArgument);
}

// Properties: adjusted >= raw, <= 1, and monotone in the raw order.
TEST(Holm, Properties) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + rng.below(20));
    for (auto& v : p) v = rng.uniform() * rng.uniform();
    const auto adj = holm_correct(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GE(adj[i], p[i]);
      EXPECT_LE(adj[i], 1.0);
      for (std::size_t j = 0; j < p.size(); ++j)
        if (p[i] < p[j]) {
          EXPECT_LE(adj[i], adj[j]);
        }
    }
    EXPECT_NEAR(*std::min_element(adj.begin(), adj.end()),
                std::min(1.0, static_cast<double>(p.size()) * *std::min_element(p.begin(), p.end())), 1e-15);
  }
}

TEST(MeanCI, MatchesReference) {
  const std::vector<double> x{2.0, 3.5, 1.0, 4.5, 3.0};
  const auto c = mean_ci(x);
  EXPECT_DOUBLE_EQ(c.mean, 2.8);
  EXPECT_NEAR(c.low, 1.122604307536669, 1e-12);
  EXPECT_NEAR(c.high, 4.477395692463331, 1e-12);
  const auto one = mean_ci(std::vector<double>{7.0});
  EXPECT_EQ(one.low, 7.0);
  EXPECT_EQ(one.high, 7.0);
  EXPECT_THROW(mean_ci(std::vector<double>{}), InvalidArgument);
}

namespace {

// Instances with a same-type bonus of `boost` and per-instance jitter.
std::vector<InstanceResult> synthetic(std::size_t n, double boost, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<InstanceResult> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].instance = i;
    for (std::size_t t = 0; t < kNumTypes; ++t) {
      out[i].pre[t] = 60;
      for (std::size_t a = 0; a < kNumTypes; ++a) {
        out[i].effect[a][t] = 0.5 + 0.2 * rng.uniform() + (a == t ? boost : 0.0);
        out[i].post[a][t] = out[i].pre[t] - out[i].effect[a][t];
      }
    }
  }
  return out;
}

}  // namespace

TEST(Analyze, DetectsSameTypeBoost) {
  const auto rs = synthetic(10, 1.0, 4);
  const auto an = analyze(rs);
  EXPECT_EQ(an.instances, 10u);
  EXPECT_EQ(an.rows.size(), 2 * kNumTypes + 2 + 2 + 3);
  EXPECT_EQ(an.summary.size(), 2 * kNumTypes + 4 + 4);
  for (auto t : kAllTypes) {
    const auto* row = an.find("same_vs_diff/" + std::string(type_name(t)) + "/sign");
    ASSERT_NE(row, nullptr);
    EXPECT_EQ(row->test.statistic, 10.0);
    EXPECT_NEAR(row->test.p_value, 0.001953125, 1e-14);
    EXPECT_NEAR(row->p_holm, 7 * 0.001953125, 1e-14);
    EXPECT_TRUE(row->significant);
    // Independent recomputation of the t row from the raw effects.
    PairedSample s;
    for (const auto& r : rs) {
      double diff = 0;
      for (std::size_t a = 0; a < kNumTypes; ++a)
        if (a != index_of(t)) diff += r.effect[a][index_of(t)];
      s.a.push_back(r.effect[index_of(t)][index_of(t)]);
      s.b.push_back(diff / 6);
    }
    EXPECT_NEAR(an.find("same_vs_diff/" + std::string(type_name(t)) + "/t")->test.statistic, paired_t(s).statistic,
                1e-9);
  }
  EXPECT_TRUE(an.find("same_vs_diff/pooled/sign")->significant);
  EXPECT_TRUE(an.find("voice_reduction/matched-voice/matched-reduction-vs-mismatched-voice/mismatched-reduction/t")
                  ->significant);
  EXPECT_EQ(an.find("nope"), nullptr);
}

TEST(Analyze, NoEffectIsNotSignificant) {
  const auto an = analyze(synthetic(10, 0.0, 5));
  std::size_t sig = 0;
  for (const auto& r : an.rows) sig += r.significant;
  EXPECT_LE(sig, 2u);
}

TEST(Analyze, ConstantEffectsAreDegenerate) {
  auto rs = synthetic(3, 0.0, 6);
  for (auto& r : rs) r.effect = rs[0].effect;
  const auto an = analyze(rs);
  const auto* row = an.find("same_vs_diff/ActiveSubjRC/t");
  ASSERT_NE(row, nullptr);
  EXPECT_TRUE(row->degenerate);
  EXPECT_TRUE(std::isnan(row->p_holm));
  EXPECT_FALSE(row->significant);
  EXPECT_THROW(analyze(std::span<const InstanceResult>(rs.data(), 1)), InvalidArgument);
}

TEST(Analyze, TablesRoundTrip) {
  const auto an = analyze(synthetic(4, 0.3, 7));
  const auto text = format_analysis(an);
  EXPECT_EQ(text.substr(0, text.find('\n')), "name\tmean_diff\tstatistic\tp_raw\tp_holm\tsignificant");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), an.rows.size() + 1);
  const auto rows = parse_summary(format_summary(an));
  ASSERT_EQ(rows.size(), an.summary.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].chart, an.summary[i].chart);
    EXPECT_EQ(rows[i].value.mean, an.summary[i].value.mean);
    EXPECT_EQ(rows[i].value.high, an.summary[i].value.high);
  }
  EXPECT_THROW(parse_summary("x\n"), ParseError);
  EXPECT_THROW(parse_summary("chart\tgroup\tbar\tmean\tci_low\tci_high\na\tb\n"), ParseError);
}
