#pragma once

// Paired significance tests over model instances, Holm correction, and the
// analysis tables derived from a results file.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "primeprobe/priming.hpp"
#include "primeprobe/util.hpp"

namespace primeprobe {

/// Matched observations; differences are a[i] - b[i].
struct PairedSample {
  std::vector<double> a;
  std::vector<double> b;

  std::vector<double> differences() const {
    if (a.size() != b.size()) throw InvalidArgument("paired sample: unequal lengths");
    if (a.size() < 2) throw InvalidArgument("paired sample: need at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
  }
};

struct TestResult {
  double statistic = 0;
  double p_value = 1;
  double mean_difference = 0;
  std::size_t n = 0;
  std::string method;
};

inline double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance_of(std::span<const double> x) {
  const double m = mean_of(x);
  double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

/// Two-sided paired t-test.
inline TestResult paired_t(const PairedSample& s) {
  const auto d = s.differences();
  const double n = static_cast<double>(d.size());
  const double m = mean_of(d);
  const double var = variance_of(d);
  if (!(var > 0))
    throw NumericError("paired_t: differences have zero variance; use sign_test instead");
  const double t = m / std::sqrt(var / n);
  const boost::math::students_t dist(n - 1);
  const double p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
  return {t, p, m, d.size(), "paired-t"};
}

/// Exact two-sided binomial sign test; zero differences are dropped. The
/// statistic is the number of positive differences.
inline TestResult sign_test(const PairedSample& s) {
  const auto d = s.differences();
  std::size_t pos = 0, used = 0;
  for (double v : d) {
    if (v == 0) continue;
    ++used;
    if (v > 0) ++pos;
  }
  TestResult r{static_cast<double>(pos), 1.0, mean_of(d), d.size(), "sign"};
  if (used == 0) return r;
  const boost::math::binomial_distribution<double> bin(static_cast<double>(used), 0.5);
  const double k = static_cast<double>(pos);
  const double lower = boost::math::cdf(bin, k);
  const double upper = pos == 0 ? 1.0 : boost::math::cdf(boost::math::complement(bin, k - 1));
  r.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
  return r;
}

/// Holm step-down adjustment; output order matches input order.
inline std::vector<double> holm_correct(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> out(m);
  double running = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = order[r];
    if (!(p[i] >= 0 && p[i] <= 1)) throw InvalidArgument("holm_correct: p-values must lie in [0,1]");
    running = std::max(running, std::min(1.0, static_cast<double>(m - r) * p[i]));
    out[i] = running;
  }
  return out;
}

/// Mean with a two-sided t-based confidence interval.
struct MeanCI {
  double mean = 0;
  double low = 0;
  double high = 0;
};

inline MeanCI mean_ci(std::span<const double> x, double level = 0.95) {
  if (x.empty()) throw InvalidArgument("mean_ci: empty sample");
  MeanCI c;
  c.mean = c.low = c.high = mean_of(x);
  if (x.size() < 2) return c;
  const boost::math::students_t dist(static_cast<double>(x.size() - 1));
  const double q = boost::math::quantile(boost::math::complement(dist, (1 - level) / 2));
  const double half = q * std::sqrt(variance_of(x) / static_cast<double>(x.size()));
  c.low = c.mean - half;
  c.high = c.mean + half;
  return c;
}

// ---------------------------------------------------------------------------
// Analysis of a results file

inline constexpr double kAlpha = 0.05;

struct AnalysisRow {
  std::string name;
  std::string family;  // rows sharing a family are Holm-corrected together
  TestResult test;
  double p_holm = 1;
  bool significant = false;
  bool degenerate = false;  // zero-variance t-test; excluded from correction
};

/// One bar of a summary chart.
struct SummaryRow {
  std::string chart;
  std::string group;
  std::string bar;
  MeanCI value;
};

struct Analysis {
  std::size_t instances = 0;
  std::vector<AnalysisRow> rows;
  std::vector<SummaryRow> summary;

  const AnalysisRow* find(std::string_view name) const {
    for (const auto& r : rows)
      if (r.name == name) return &r;
    return nullptr;
  }
};

namespace detail {

inline AnalysisRow t_row(std::string name, std::string family, const PairedSample& s) {
  AnalysisRow row{std::move(name), std::move(family), {}, 1, false, false};
  try {
    row.test = paired_t(s);
  } catch (const NumericError&) {
    const auto d = s.differences();
    row.test = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                mean_of(d), d.size(), "paired-t"};
    row.degenerate = true;
  }
  return row;
}

inline void apply_holm(std::vector<AnalysisRow>& rows) {
  std::vector<std::string> families;
  for (const auto& r : rows)
    if (std::find(families.begin(), families.end(), r.family) == families.end()) families.push_back(r.family);
  for (const auto& f : families) {
    std::vector<std::size_t> idx;
    std::vector<double> p;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].family == f && !rows[i].degenerate) {
        idx.push_back(i);
        p.push_back(rows[i].test.p_value);
      }
    const auto adj = holm_correct(p);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      rows[idx[k]].p_holm = adj[k];
      rows[idx[k]].significant = adj[k] < kAlpha;
    }
  }
  for (auto& r : rows)
    if (r.degenerate) r.p_holm = std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Builds every contrast from per-instance effect matrices:
///   same_vs_diff/<type>/{t,sign}: same-type effect vs mean different-type
///     effect, Holm over the 7 types per method;
///   same_vs_diff/pooled/{t,sign}: all instance x type pairs together;
///   rc_vs_coord/adapt-<class>/t: within-class vs cross-class test effect;
///   voice_reduction/<cell>/t: matched/matched cell vs each other cell.
inline Analysis analyze(std::span<const InstanceResult> results) {
  if (results.size() < 2) throw InvalidArgument("analyze: need at least 2 model instances");
  Analysis an;
  an.instances = results.size();

  std::array<PairedSample, kNumTypes> per_type;
  PairedSample pooled;
  std::array<std::array<std::vector<double>, 2>, 2> rc;
  std::array<std::vector<double>, 4> vr;
  for (const auto& r : results) {
    const auto sd = contrast_same_vs_diff(r.effect);
    for (std::size_t t = 0; t < kNumTypes; ++t) {
      per_type[t].a.push_back(sd[t].same);
      per_type[t].b.push_back(sd[t].different);
      pooled.a.push_back(sd[t].same);
      pooled.b.push_back(sd[t].different);
    }
    const auto c = contrast_rc_vs_coord(r.effect);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) rc[i][j].push_back(c.cells[i][j]);
    const auto v = contrast_voice_reduction(r.effect).cells();
    for (std::size_t k = 0; k < 4; ++k) vr[k].push_back(v[k]);
  }

  for (auto t : kAllTypes) {
    const std::string base = "same_vs_diff/" + std::string(type_name(t));
    an.rows.push_back(detail::t_row(base + "/t", "same_vs_diff/t", per_type[index_of(t)]));
    an.rows.push_back({base + "/sign", "same_vs_diff/sign", sign_test(per_type[index_of(t)]), 1, false, false});
  }
  an.rows.push_back(detail::t_row("same_vs_diff/pooled/t", "pooled/t", pooled));
  an.rows.push_back({"same_vs_diff/pooled/sign", "pooled/sign", sign_test(pooled), 1, false, false});

  const std::array<std::string, 2> cls = {"rc", "coord"};
  for (std::size_t i = 0; i < 2; ++i)
    an.rows.push_back(detail::t_row("rc_vs_coord/adapt-" + cls[i] + "/t", "rc_vs_coord",
                                    PairedSample{rc[i][i], rc[i][1 - i]}));
  for (std::size_t k = 1; k < 4; ++k)
    an.rows.push_back(detail::t_row("voice_reduction/" + std::string(kVoiceReductionCells[0]) + "-vs-" +
                                        std::string(kVoiceReductionCells[k]) + "/t",
                                    "voice_reduction", PairedSample{vr[0], vr[k]}));
  detail::apply_holm(an.rows);

  for (auto t : kAllTypes) {
    const auto& s = per_type[index_of(t)];
    an.summary.push_back({"same_vs_diff", std::string(type_name(t)), "same", mean_ci(s.a)});
    an.summary.push_back({"same_vs_diff", std::string(type_name(t)), "different", mean_ci(s.b)});
  }
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      an.summary.push_back({"rc_vs_coord", "adapt-" + cls[i], "test-" + cls[j], mean_ci(rc[i][j])});
  for (std::size_t k = 0; k < 4; ++k)
    an.summary.push_back({"voice_reduction", std::string(kVoiceReductionCells[k]), "effect", mean_ci(vr[k])});
  return an;
}

inline std::string format_analysis(const Analysis& an) {
  std::string out = "name\tmean_diff\tstatistic\tp_raw\tp_holm\tsignificant\n";
  for (const auto& r : an.rows)
    out += r.name + '\t' + format_double(r.test.mean_difference) + '\t' + format_double(r.test.statistic) + '\t' +
           format_double(r.test.p_value) + '\t' + format_double(r.p_holm) + '\t' + (r.significant ? "yes" : "no") +
           '\n';
  return out;
}

inline std::string format_summary(const Analysis& an) {
  std::string out = "chart\tgroup\tbar\tmean\tci_low\tci_high\n";
  for (const auto& r : an.summary)
    out += r.chart + '\t' + r.group + '\t' + r.bar + '\t' + format_double(r.value.mean) + '\t' +
           format_double(r.value.low) + '\t' + format_double(r.value.high) + '\n';
  return out;
}

inline std::vector<SummaryRow> parse_summary(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || lines.front() != "chart\tgroup\tbar\tmean\tci_low\tci_high")
    throw ParseError("summary: missing header row");
  std::vector<SummaryRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto c = split(lines[i], '\t');
    if (c.size() != 6) throw ParseError("summary line " + std::to_string(i + 1) + ": expected 6 columns");
    out.push_back({std::string(c[0]), std::string(c[1]), std::string(c[2]),
                   {parse_number<double>(c[3], "mean"), parse_number<double>(c[4], "ci_low"),
                    parse_number<double>(c[5], "ci_high")}});
  }
  return out;
}

}  // namespace primeprobe
