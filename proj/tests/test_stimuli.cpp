#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>

#include "primeprobe/stimuli.hpp"

using namespace primeprobe;

namespace {

const char* kBakeryLexicon =
    "agent-noun\tbaker\n"
    "agent-noun\tcook\n"
    "agent-noun\tcustomers\n"
    "agent-noun\tguests\n"
    "patient-noun\tcake\n"
    "patient-noun\tpie\n"
    "verb\tbake\t\ta:baker,a:cook,p:cake,p:pie\n"
    "verb\timpress\t\ta:cake,a:pie,a:baker,a:cook,p:customers,p:guests\n";

Lexicon bakery() { return Lexicon::parse(kBakeryLexicon); }

Lexicon builtin() { return Lexicon::load(std::filesystem::path(PRIMEPROBE_SOURCE_DIR) / "data" / "lexicon.tsv"); }

Filler bakery_filler() {
  Filler f;
  f.agent = "baker";
  f.patient = "cake";
  f.verb = "bake";
  f.main_verb = "impress";
  f.object = "customers";
  return f;
}

}  // namespace

TEST(SentenceType, SevenTypesFiveRc) {
  EXPECT_EQ(kAllTypes.size(), 7u);
  EXPECT_EQ(std::count_if(kAllTypes.begin(), kAllTypes.end(), is_rc), 5);
  for (auto t : kAllTypes) EXPECT_EQ(parse_type(type_name(t)), t);
  EXPECT_THROW(parse_type("Nope"), ParseError);
  int with_attrs = 0;
  for (auto t : kAllTypes) with_attrs += voice_reduction(t).has_value();
  EXPECT_EQ(with_attrs, 4);
  EXPECT_EQ(voice_reduction(SentenceType::ReducedPassSubjRC)->first, Voice::Passive);
  EXPECT_EQ(voice_reduction(SentenceType::ReducedObjRC)->second, Reduction::Reduced);
}

TEST(Lexicon, RegularPast) {
  EXPECT_EQ(regular_past("bake"), "baked");
  EXPECT_EQ(regular_past("carry"), "carried");
  EXPECT_EQ(regular_past("destroy"), "destroyed");
  EXPECT_EQ(regular_past("kill"), "killed");
}

TEST(Lexicon, ParseAndValidate) {
  const auto lex = bakery();
  EXPECT_EQ(lex.at("bake").past, "baked");
  EXPECT_EQ(&lex.at("baked"), &lex.at("bake"));
  EXPECT_EQ(Lexicon::parse(lex.serialize()).serialize(), lex.serialize());
  EXPECT_THROW(Lexicon::parse("verb\tbake\t\ta:baker,p:cake\nagent-noun\tbaker\npatient-noun\tcake\n"),
               InvalidArgument);  // fewer than 2 partners per role
  EXPECT_THROW(Lexicon::parse("verb\tx\t\ta:q,a:r,p:s,p:t\n"), InvalidArgument);  // unknown partners
  EXPECT_THROW(Lexicon::parse("adverb\tquickly\n"), ParseError);
  EXPECT_THROW(Lexicon::parse("agent-noun\tbaker\t\tp:cake\n"), ParseError);
}

TEST(Lexicon, BuiltinSatisfiesInvariants) {
  const auto lex = builtin();
  EXPECT_GE(lex.lemmas(Pos::AgentNoun).size(), 40u);
  EXPECT_GE(lex.lemmas(Pos::PatientNoun).size(), 40u);
  EXPECT_GE(lex.lemmas(Pos::Verb).size(), 20u);
  for (const auto& e : lex.entries())
    if (e.pos == Pos::Verb) {
      EXPECT_GE(e.agents.size(), 2u) << e.lemma;
      EXPECT_GE(e.patients.size(), 2u) << e.lemma;
    }
}

TEST(Felicity, LicensedPairsOnly) {
  const auto lex = bakery();
  EXPECT_TRUE(check_felicity("bake", "baker", "cake", lex));
  EXPECT_FALSE(check_felicity("bake", "cake", "baker", lex));
  EXPECT_FALSE(check_felicity("bake", "customers", "cake", lex));
  EXPECT_THROW(check_felicity("bake", "dragon", "cake", lex), InvalidArgument);
  EXPECT_THROW(check_felicity("baker", "baker", "cake", lex), InvalidArgument);
}

TEST(Realize, ReferenceExamples) {
  const auto lex = bakery();
  const auto frames = default_frames();
  const auto f = bakery_filler();
  const auto obj = realize(frame_for(frames, SentenceType::UnreducedObjRC), f, lex);
  EXPECT_EQ(obj.text(), "the cake that the baker baked impressed the customers .");
  EXPECT_EQ(obj.gap_index, 6);
  Filler g = f;
  g.object = "customers";
  const auto subj = realize(frame_for(frames, SentenceType::ActiveSubjRC), g, lex);
  EXPECT_EQ(subj.text(), "the baker that baked the cake impressed the customers .");
  EXPECT_EQ(subj.gap_index, 3);
  const auto coord = realize(frame_for(frames, SentenceType::ActiveSubjMatchedCoord), g, lex);
  EXPECT_EQ(coord.text(), "the baker baked the cake and impressed the customers .");
  EXPECT_EQ(coord.gap_index, -1);
  EXPECT_EQ(realize(frame_for(frames, SentenceType::ReducedPassSubjRC), f, lex).text(),
            "the cake baked by the baker impressed the customers .");
  EXPECT_EQ(realize(frame_for(frames, SentenceType::UnreducedPassSubjRC), f, lex).text(),
            "the cake that was baked by the baker impressed the customers .");
  EXPECT_EQ(realize(frame_for(frames, SentenceType::ReducedObjRC), f, lex).text(),
            "the cake the baker baked impressed the customers .");
  EXPECT_EQ(realize(frame_for(frames, SentenceType::PassObjMatchedCoord), f, lex).text(),
            "the cake was baked by the baker and impressed the customers .");
}

TEST(Realize, ModifiersPrecedeTheirNoun) {
  auto lex = Lexicon::parse(std::string(kBakeryLexicon) + "modifier\tsweet\nmodifier\tgreat\n");
  auto f = bakery_filler();
  f.patient_mod = "sweet";
  f.object_mod = "great";
  const auto s = realize(frame_for(default_frames(), SentenceType::UnreducedObjRC), f, lex);
  EXPECT_EQ(s.text(), "the sweet cake that the baker baked impressed the great customers .");
  EXPECT_EQ(s.gap_index, 7);
  EXPECT_TRUE(s.content_lemmas.contains("sweet"));
  const auto back = match_frame(s.tokens, frame_for(default_frames(), SentenceType::UnreducedObjRC), lex);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(*back, f);
}

TEST(MatchFrame, RejectsInfelicitousAndWrongType) {
  const auto lex = bakery();
  const auto frames = default_frames();
  const auto bad = tokenize("the cake that the customers baked impressed the guests .");
  EXPECT_FALSE(match_frame(bad, frame_for(frames, SentenceType::UnreducedObjRC), lex));
  const auto obj = tokenize("the cake that the baker baked impressed the customers .");
  EXPECT_TRUE(match_frame(obj, frame_for(frames, SentenceType::UnreducedObjRC), lex));
  EXPECT_FALSE(match_frame(obj, frame_for(frames, SentenceType::ReducedObjRC), lex));
}

class Generated : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    lex_ = new Lexicon(builtin());
    GenerateOptions opt;
    opt.seed = 17;
    bundle_ = new StimulusBundle(generate(default_frames(), *lex_, opt));
  }
  static void TearDownTestSuite() {
    delete bundle_;
    delete lex_;
  }
  static Lexicon* lex_;
  static StimulusBundle* bundle_;
};
Lexicon* Generated::lex_ = nullptr;
StimulusBundle* Generated::bundle_ = nullptr;

TEST_F(Generated, SizesTypesAndDistinctness) {
  for (auto t : kAllTypes) {
    const auto& a = bundle_->adapt_set(t);
    const auto& s = bundle_->test_set(t);
    EXPECT_EQ(a.size(), 20u);
    EXPECT_EQ(s.size(), 50u);
    std::set<std::string> texts;
    for (const auto* set : {&a, &s})
      for (const auto& x : *set) {
        EXPECT_EQ(x.type, t);
        texts.insert(x.text());
      }
    EXPECT_EQ(texts.size(), 70u);
  }
}

// Property: every stimulus re-parses against its own frame with felicitous
// triples and the same content lemmas; gap indices are in bounds.
TEST_F(Generated, FrameRoundTrip) {
  const auto frames = default_frames();
  for (auto t : kAllTypes)
    for (const auto* set : {&bundle_->adapt_set(t), &bundle_->test_set(t)})
      for (const auto& s : *set) {
        const auto f = match_frame(s.tokens, frame_for(frames, t), *lex_);
        ASSERT_TRUE(f.has_value()) << s.text();
        EXPECT_EQ(realize(frame_for(frames, t), *f, *lex_).content_lemmas, s.content_lemmas);
        if (is_rc(t)) {
          EXPECT_GT(s.gap_index, 0);
          EXPECT_LE(s.gap_index, static_cast<int>(s.tokens.size()));
        } else {
          EXPECT_EQ(s.gap_index, -1);
        }
        EXPECT_EQ(s.tokens.back(), ".");
      }
}

TEST_F(Generated, OverlapInvariant) {
  for (auto t : kAllTypes) {
    const double j = jaccard(content_lemmas(bundle_->adapt_set(t)), content_lemmas(bundle_->test_set(t)));
    EXPECT_LE(j, 0.2);
  }
}

TEST_F(Generated, ModifiersAppearAtRoughlyHalfRate) {
  std::size_t slots = 0, filled = 0;
  for (auto t : kAllTypes)
    for (const auto& s : bundle_->test_set(t)) {
      slots += 3;
      for (const auto& w : s.tokens) filled += lex_->find(w) && lex_->find(w)->pos == Pos::Modifier;
    }
  const double rate = static_cast<double>(filled) / static_cast<double>(slots);
  EXPECT_GT(rate, 0.4);
  EXPECT_LT(rate, 0.6);
}

TEST_F(Generated, DeterministicUnderSeed) {
  GenerateOptions opt;
  opt.seed = 17;
  const auto again = generate(default_frames(), *lex_, opt);
  opt.seed = 18;
  const auto other = generate(default_frames(), *lex_, opt);
  bool differs = false;
  for (auto t : kAllTypes) {
    for (std::size_t i = 0; i < 50; ++i) {
      EXPECT_EQ(again.test_set(t)[i].text(), bundle_->test_set(t)[i].text());
      differs |= other.test_set(t)[i].text() != bundle_->test_set(t)[i].text();
    }
  }
  EXPECT_TRUE(differs);
}

TEST_F(Generated, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "primeprobe_stimuli_test";
  std::filesystem::remove_all(dir);
  save_bundle(*bundle_, dir);
  const auto frames = default_frames();
  const auto back = load_bundle(dir, lex_, &frames);
  for (auto t : kAllTypes)
    for (std::size_t i = 0; i < 20; ++i) {
      const auto& a = bundle_->adapt_set(t)[i];
      const auto& b = back.adapt_set(t)[i];
      EXPECT_EQ(a.tokens, b.tokens);
      EXPECT_EQ(a.gap_index, b.gap_index);
      EXPECT_EQ(a.content_lemmas, b.content_lemmas);
    }
  std::filesystem::remove_all(dir);
}

TEST(Generate, ZeroAdaptationSetsAreValid) {
  GenerateOptions opt;
  opt.n_adapt = 0;
  const auto b = generate(default_frames(), builtin(), opt);
  for (auto t : kAllTypes) {
    EXPECT_TRUE(b.adapt_set(t).empty());
    EXPECT_EQ(b.test_set(t).size(), 50u);
  }
}

TEST(Generate, InfeasibleNamesTheClass) {
  // One agent noun cannot be split into disjoint adaptation and test pools.
  try {
    const auto lex = Lexicon::parse(
        "agent-noun\tbaker\npatient-noun\tcake\npatient-noun\tpie\n"
        "verb\tbake\t\ta:baker,a:baker,p:cake,p:pie\n");
    generate(default_frames(), lex, GenerateOptions{});
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    // The verb itself lacks two distinct agents.
    EXPECT_NE(std::string(e.what()).find("bake"), std::string::npos);
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("agent-noun"), std::string::npos);
  }
  const auto small = bakery();
  GenerateOptions opt;
  opt.n_test = 500;
  try {
    generate(default_frames(), small, opt);
    FAIL() << "expected an error";
  } catch (const InfeasibleError& e) {
    EXPECT_FALSE(std::string(e.what()).empty());
  }
}

TEST(Scramble, SingletonIsFixed) {
  Stimulus s;
  s.tokens = {"a"};
  Rng rng(1);
  EXPECT_EQ(scramble(s, rng).tokens, s.tokens);
}

TEST(Scramble, MultisetAndTerminalPreserved) {
  Rng rng(2);
  Stimulus s;
  s.tokens = tokenize("the cake that the baker baked impressed the customers .");
  s.type = SentenceType::UnreducedObjRC;
  for (int i = 0; i < 200; ++i) {
    const auto x = scramble(s, rng);
    EXPECT_EQ(x.tokens.back(), ".");
    EXPECT_EQ(x.type, s.type);
    auto a = x.tokens, b = s.tokens;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

// Regression fixture: the permutation a fixed seed produces, computed once by
// an independent SplitMix64 + Lemire + Fisher-Yates implementation.
TEST(Scramble, FrozenPermutation) {
  Stimulus s;
  s.tokens = {"t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9"};
  Rng rng(2024);
  const auto x = scramble(s, rng);
  EXPECT_EQ(x.text(), "t8 t7 t3 t9 t6 t0 t4 t1 t2 t5");
}

// Oracle: with 3 permutable tokens all 6 orders should be roughly equally likely.
TEST(Scramble, UniformOverPermutations) {
  Stimulus s;
  s.tokens = {"a", "b", "c", "."};
  Rng rng(9);
  std::map<std::string, int> freq;
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++freq[scramble(s, rng).text()];
  ASSERT_EQ(freq.size(), 6u);
  for (const auto& [k, c] : freq) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 6, 0.01) << k;
}
