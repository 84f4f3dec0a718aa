#pragma once

// Templated stimulus generation for the seven sentence types, the felicity
// check on verb-argument pairs, and the word-order scrambling transform.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "primeprobe/corpus.hpp"
#include "primeprobe/util.hpp"

namespace primeprobe {

enum class SentenceType : std::uint8_t {
  UnreducedObjRC,
  ReducedObjRC,
  UnreducedPassSubjRC,
  ReducedPassSubjRC,
  ActiveSubjRC,
  PassObjMatchedCoord,
  ActiveSubjMatchedCoord,
};

inline constexpr std::size_t kNumTypes = 7;

inline constexpr std::array<SentenceType, kNumTypes> kAllTypes = {
    SentenceType::UnreducedObjRC,      SentenceType::ReducedObjRC,
    SentenceType::UnreducedPassSubjRC, SentenceType::ReducedPassSubjRC,
    SentenceType::ActiveSubjRC,        SentenceType::PassObjMatchedCoord,
    SentenceType::ActiveSubjMatchedCoord,
};

inline constexpr std::size_t index_of(SentenceType t) { return static_cast<std::size_t>(t); }

inline constexpr std::string_view type_name(SentenceType t) {
  constexpr std::array<std::string_view, kNumTypes> names = {
      "UnreducedObjRC",      "ReducedObjRC",        "UnreducedPassSubjRC",
      "ReducedPassSubjRC",   "ActiveSubjRC",        "PassObjMatchedCoord",
      "ActiveSubjMatchedCoord",
  };
  return names[index_of(t)];
}

inline SentenceType parse_type(std::string_view name) {
  for (auto t : kAllTypes)
    if (type_name(t) == name) return t;
  throw ParseError("unknown sentence type '" + std::string(name) + "'");
}

inline constexpr bool is_rc(SentenceType t) {
  return t != SentenceType::PassObjMatchedCoord && t != SentenceType::ActiveSubjMatchedCoord;
}

enum class Voice { Active, Passive };
enum class Reduction { Unreduced, Reduced };

/// Voice and reduction attributes of the four types crossed in the
/// voice/reduction contrast. Object RCs are the active-voice class.
inline constexpr std::optional<std::pair<Voice, Reduction>> voice_reduction(SentenceType t) {
  switch (t) {
    case SentenceType::UnreducedObjRC: return std::pair{Voice::Active, Reduction::Unreduced};
    case SentenceType::ReducedObjRC: return std::pair{Voice::Active, Reduction::Reduced};
    case SentenceType::UnreducedPassSubjRC: return std::pair{Voice::Passive, Reduction::Unreduced};
    case SentenceType::ReducedPassSubjRC: return std::pair{Voice::Passive, Reduction::Reduced};
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Lexicon

enum class Pos { AgentNoun, PatientNoun, Verb, Modifier };

inline constexpr std::string_view pos_name(Pos p) {
  switch (p) {
    case Pos::AgentNoun: return "agent-noun";
    case Pos::PatientNoun: return "patient-noun";
    case Pos::Verb: return "verb";
    case Pos::Modifier: return "modifier";
  }
  return "?";
}

inline Pos parse_pos(std::string_view s) {
  for (auto p : {Pos::AgentNoun, Pos::PatientNoun, Pos::Verb, Pos::Modifier})
    if (pos_name(p) == s) return p;
  throw ParseError("unknown part of speech '" + std::string(s) + "'");
}

/// Regular past: bake -> baked, carry -> carried, kill -> killed.
inline std::string regular_past(std::string_view lemma) {
  std::string s(lemma);
  if (s.empty()) return s;
  if (s.back() == 'e') return s + "d";
  if (s.size() >= 2 && s.back() == 'y' && std::string_view("aeiou").find(s[s.size() - 2]) == std::string_view::npos)
    return s.substr(0, s.size() - 1) + "ied";
  return s + "ed";
}

struct LexiconEntry {
  std::string lemma;
  Pos pos = Pos::AgentNoun;
  std::string past;                 // verbs only; also used as passive participle
  std::set<std::string> agents;     // verbs: lemmas licensed as the agent
  std::set<std::string> patients;   // verbs: lemmas licensed as the patient
};

class Lexicon {
 public:
  Lexicon() = default;

  explicit Lexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto& e = entries_[i];
      if (e.pos == Pos::Verb && e.past.empty()) e.past = regular_past(e.lemma);
      if (!by_lemma_.emplace(e.lemma, i).second)
        throw InvalidArgument("lexicon: duplicate lemma '" + e.lemma + "'");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.pos != Pos::Verb) continue;
      if (e.past != e.lemma && !by_lemma_.contains(e.past)) by_form_.emplace(e.past, i);
      if (e.agents.size() < 2 || e.patients.size() < 2)
        throw InvalidArgument("lexicon: verb '" + e.lemma +
                              "' needs at least 2 licensed agents and 2 licensed patients");
      for (const auto* set : {&e.agents, &e.patients})
        for (const auto& partner : *set) {
          const auto* p = find(partner);
          if (!p || (p->pos != Pos::AgentNoun && p->pos != Pos::PatientNoun))
            throw InvalidArgument("lexicon: verb '" + e.lemma + "' licenses unknown noun '" +
                                  partner + "'");
        }
    }
  }

  /// Looks up a lemma, or a verb by its past form.
  const LexiconEntry* find(std::string_view word) const {
    const std::string key(word);
    if (auto it = by_lemma_.find(key); it != by_lemma_.end()) return &entries_[it->second];
    if (auto it = by_form_.find(key); it != by_form_.end()) return &entries_[it->second];
    return nullptr;
  }

  const LexiconEntry& at(std::string_view word) const {
    if (const auto* e = find(word)) return *e;
    throw InvalidArgument("lexicon: unknown lemma '" + std::string(word) + "'");
  }

  const std::vector<LexiconEntry>& entries() const { return entries_; }

  std::vector<std::string> lemmas(Pos pos) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (e.pos == pos) out.push_back(e.lemma);
    return out;
  }

  /// Lines "pos<TAB>lemma<TAB>past-form<TAB>partners" where partners are
  /// comma-separated "a:<lemma>" (agent) or "p:<lemma>" (patient) items. Blank
  /// lines and lines starting with '#' are ignored.
  static Lexicon parse(std::string_view text) {
    std::vector<LexiconEntry> entries;
    std::size_t lineno = 0;
    for (auto line : split(text, '\n')) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (trim(line).empty() || line.front() == '#') continue;
      auto cols = split(line, '\t');
      if (cols.size() < 2 || cols.size() > 4)
        throw ParseError("lexicon line " + std::to_string(lineno) + ": expected 2-4 tab-separated columns");
      LexiconEntry e;
      e.pos = parse_pos(cols[0]);
      e.lemma = std::string(cols[1]);
      if (e.lemma.empty()) throw ParseError("lexicon line " + std::to_string(lineno) + ": empty lemma");
      if (cols.size() > 2) e.past = std::string(cols[2]);
      if (cols.size() > 3 && !cols[3].empty()) {
        for (auto item : split(cols[3], ',')) {
          if (item.size() < 3 || item[1] != ':' || (item[0] != 'a' && item[0] != 'p'))
            throw ParseError("lexicon line " + std::to_string(lineno) + ": bad partner '" +
                             std::string(item) + "'");
          (item[0] == 'a' ? e.agents : e.patients).emplace(item.substr(2));
        }
      }
      if (e.pos != Pos::Verb && (!e.past.empty() || !e.agents.empty() || !e.patients.empty()))
        throw ParseError("lexicon line " + std::to_string(lineno) + ": only verbs take a past form or partners");
      entries.push_back(std::move(e));
    }
    return Lexicon(std::move(entries));
  }

  static Lexicon load(const std::filesystem::path& path) { return parse(read_file(path)); }

  std::string serialize() const {
    std::string out;
    for (const auto& e : entries_) {
      out += std::string(pos_name(e.pos)) + '\t' + e.lemma;
      if (e.pos == Pos::Verb) {
        out += '\t' + e.past + '\t';
        bool first = true;
        for (const auto& a : e.agents) out += (first ? "" : ",") + ("a:" + a), first = false;
        for (const auto& p : e.patients) out += (first ? "" : ",") + ("p:" + p), first = false;
      }
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<LexiconEntry> entries_;
  std::map<std::string, std::size_t> by_lemma_;
  std::map<std::string, std::size_t> by_form_;
};

/// True iff the verb licenses `agent` as its agent and `patient` as its patient.
inline bool check_felicity(std::string_view verb, std::string_view agent,
                           std::string_view patient, const Lexicon& lexicon) {
  const auto& v = lexicon.at(verb);
  lexicon.at(agent);
  lexicon.at(patient);
  if (v.pos != Pos::Verb) throw InvalidArgument("check_felicity: '" + v.lemma + "' is not a verb");
  return v.agents.contains(std::string(agent)) && v.patients.contains(std::string(patient));
}

// ---------------------------------------------------------------------------
// Frames

/// Roles a frame slot can be filled with. `Gap` emits nothing and marks the
/// extraction site; `Modifier` is an optional adjective on the following noun.
enum class Role { Literal, Agent, Patient, Verb, MainVerb, Object, Modifier, Gap };

struct FrameSlot {
  Role role = Role::Literal;
  std::string literal;
};

struct Frame {
  SentenceType type;
  std::vector<FrameSlot> slots;
};

namespace detail {
inline Frame make_frame(SentenceType t, std::string_view spec) {
  Frame f{t, {}};
  for (auto w : split(spec, ' ')) {
    if (w == "A") f.slots.push_back({Role::Agent, {}});
    else if (w == "P") f.slots.push_back({Role::Patient, {}});
    else if (w == "V") f.slots.push_back({Role::Verb, {}});
    else if (w == "V2") f.slots.push_back({Role::MainVerb, {}});
    else if (w == "N3") f.slots.push_back({Role::Object, {}});
    else if (w == "M") f.slots.push_back({Role::Modifier, {}});
    else if (w == "_") f.slots.push_back({Role::Gap, {}});
    else f.slots.push_back({Role::Literal, std::string(w)});
  }
  return f;
}
}  // namespace detail

/// The built-in frame inventory. P is the patient of the embedded verb V and A
/// its agent; V2 is the main-clause verb and N3 its object.
inline std::vector<Frame> default_frames() {
  using T = SentenceType;
  return {
      detail::make_frame(T::UnreducedObjRC, "the M P that the M A V _ V2 the M N3 ."),
      detail::make_frame(T::ReducedObjRC, "the M P the M A V _ V2 the M N3 ."),
      detail::make_frame(T::UnreducedPassSubjRC, "the M P that was V _ by the M A V2 the M N3 ."),
      detail::make_frame(T::ReducedPassSubjRC, "the M P V _ by the M A V2 the M N3 ."),
      detail::make_frame(T::ActiveSubjRC, "the M A that _ V the M P V2 the M N3 ."),
      detail::make_frame(T::PassObjMatchedCoord, "the M P was V by the M A and V2 the M N3 ."),
      detail::make_frame(T::ActiveSubjMatchedCoord, "the M A V the M P and V2 the M N3 ."),
  };
}

inline const Frame& frame_for(const std::vector<Frame>& frames, SentenceType t) {
  for (const auto& f : frames)
    if (f.type == t) return f;
  throw InvalidArgument("no frame for sentence type " + std::string(type_name(t)));
}

/// The noun that is the subject of the main clause.
inline Role head_role(const Frame& frame) {
  for (const auto& s : frame.slots)
    if (s.role == Role::Agent || s.role == Role::Patient) return s.role;
  throw InvalidArgument("frame without a head noun");
}

/// Lemmas chosen for one realization. Modifier lemmas are empty when absent.
struct Filler {
  std::string agent, patient, verb, main_verb, object;
  std::string agent_mod, patient_mod, object_mod;

  friend bool operator==(const Filler&, const Filler&) = default;
};

struct Stimulus {
  std::vector<std::string> tokens;
  SentenceType type = SentenceType::UnreducedObjRC;
  int gap_index = -1;
  std::set<std::string> content_lemmas;

  std::string text() const {
    std::string s;
    for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
    return s;
  }
};

inline Stimulus realize(const Frame& frame, const Filler& f, const Lexicon& lexicon) {
  Stimulus s;
  s.type = frame.type;
  // A modifier slot takes the modifier of the noun slot that follows it.
  auto modifier_for_next = [&](std::size_t i) -> const std::string& {
    static const std::string none;
    for (std::size_t j = i + 1; j < frame.slots.size(); ++j) {
      switch (frame.slots[j].role) {
        case Role::Agent: return f.agent_mod;
        case Role::Patient: return f.patient_mod;
        case Role::Object: return f.object_mod;
        case Role::Literal: continue;
        default: return none;
      }
    }
    return none;
  };
  for (std::size_t i = 0; i < frame.slots.size(); ++i) {
    const auto& slot = frame.slots[i];
    switch (slot.role) {
      case Role::Literal: s.tokens.push_back(slot.literal); break;
      case Role::Agent: s.tokens.push_back(f.agent); break;
      case Role::Patient: s.tokens.push_back(f.patient); break;
      case Role::Object: s.tokens.push_back(f.object); break;
      case Role::Verb: s.tokens.push_back(lexicon.at(f.verb).past); break;
      case Role::MainVerb: s.tokens.push_back(lexicon.at(f.main_verb).past); break;
      case Role::Modifier:
        if (const auto& m = modifier_for_next(i); !m.empty()) s.tokens.push_back(m);
        break;
      case Role::Gap:
        if (is_rc(frame.type)) s.gap_index = static_cast<int>(s.tokens.size());
        break;
    }
  }
  s.content_lemmas = {f.agent, f.patient, f.verb, f.main_verb, f.object};
  for (const auto* m : {&f.agent_mod, &f.patient_mod, &f.object_mod})
    if (!m->empty()) s.content_lemmas.insert(*m);
  return s;
}

/// Parses `tokens` against `frame`. Succeeds only if every slot is filled by a
/// lexicon item of the right class and both verb-argument triples are felicitous.
inline std::optional<Filler> match_frame(std::span<const std::string> tokens, const Frame& frame,
                                         const Lexicon& lexicon) {
  const Role head = head_role(frame);
  std::optional<Filler> result;
  Filler cur;
  std::string pending_mod;

  auto lex_pos = [&](const std::string& w) -> std::optional<Pos> {
    const auto* e = lexicon.find(w);
    if (!e || e->lemma != w) return std::nullopt;
    return e->pos;
  };
  auto verb_lemma = [&](const std::string& w) -> std::optional<std::string> {
    const auto* e = lexicon.find(w);
    if (!e || e->pos != Pos::Verb || e->past != w) return std::nullopt;
    return e->lemma;
  };

  std::function<void(std::size_t, std::size_t)> go = [&](std::size_t si, std::size_t ti) {
    if (result) return;
    if (si == frame.slots.size()) {
      if (ti != tokens.size()) return;
      const auto& h = head == Role::Agent ? cur.agent : cur.patient;
      if (check_felicity(cur.verb, cur.agent, cur.patient, lexicon) &&
          check_felicity(cur.main_verb, h, cur.object, lexicon))
        result = cur;
      return;
    }
    const auto& slot = frame.slots[si];
    if (slot.role == Role::Gap) return go(si + 1, ti);
    if (slot.role == Role::Modifier) {
      go(si + 1, ti);  // absent
      if (ti < tokens.size() && lex_pos(tokens[ti]) == Pos::Modifier) {
        pending_mod = tokens[ti];
        go(si + 1, ti + 1);
        pending_mod.clear();
      }
      return;
    }
    if (ti >= tokens.size()) return;
    const auto& tok = tokens[ti];
    auto take_noun = [&](std::string& lemma, std::string& mod, Pos pos) {
      if (lex_pos(tok) != pos) return;
      lemma = tok;
      mod = pending_mod;
      const auto saved = pending_mod;
      pending_mod.clear();
      go(si + 1, ti + 1);
      pending_mod = saved;
    };
    switch (slot.role) {
      case Role::Literal:
        if (pending_mod.empty() && tok == slot.literal) go(si + 1, ti + 1);
        break;
      case Role::Agent: take_noun(cur.agent, cur.agent_mod, Pos::AgentNoun); break;
      case Role::Patient: take_noun(cur.patient, cur.patient_mod, Pos::PatientNoun); break;
      case Role::Object: take_noun(cur.object, cur.object_mod, Pos::AgentNoun); break;
      case Role::Verb:
      case Role::MainVerb:
        if (auto v = verb_lemma(tok); v && pending_mod.empty()) {
          (slot.role == Role::Verb ? cur.verb : cur.main_verb) = *v;
          go(si + 1, ti + 1);
        }
        break;
      default: break;
    }
  };
  go(0, 0);
  return result;
}

// ---------------------------------------------------------------------------
// Generation

struct StimulusBundle {
  std::array<std::vector<Stimulus>, kNumTypes> adaptation;
  std::array<std::vector<Stimulus>, kNumTypes> test;
  std::uint64_t seed = 0;

  const std::vector<Stimulus>& adapt_set(SentenceType t) const { return adaptation[index_of(t)]; }
  const std::vector<Stimulus>& test_set(SentenceType t) const { return test[index_of(t)]; }
};

struct GenerateOptions {
  std::size_t n_adapt = 20;
  std::size_t n_test = 50;
  std::uint64_t seed = 0;
  double p_mod = 0.5;
  double overlap_max = 0.2;
};

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.contains(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline std::set<std::string> content_lemmas(const std::vector<Stimulus>& set) {
  std::set<std::string> out;
  for (const auto& s : set) out.insert(s.content_lemmas.begin(), s.content_lemmas.end());
  return out;
}

namespace detail {

struct Pool {
  std::vector<std::string> agents, patients, verbs, modifiers;
};

inline std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

template <class Set>
std::vector<std::string> intersect(const std::set<std::string>& licensed, const Set& pool) {
  std::vector<std::string> out;
  for (const auto& x : licensed)
    if (pool.contains(x)) out.push_back(x);
  return out;
}

inline std::vector<Stimulus> sample_set(const Frame& frame, const Lexicon& lex, const Pool& pool,
                                        std::size_t n, double p_mod, Rng& rng) {
  if (n == 0) return {};
  const auto agents = as_set(pool.agents);
  const auto patients = as_set(pool.patients);
  const Role head = head_role(frame);

  std::vector<std::string> embedded;
  bool any_agent = false;
  for (const auto& v : pool.verbs) {
    const auto& e = lex.at(v);
    const bool a = !intersect(e.agents, agents).empty();
    const bool p = !intersect(e.patients, patients).empty();
    any_agent = any_agent || a;
    if (a && p) embedded.push_back(v);
  }
  if (pool.verbs.empty()) throw InfeasibleError("lexicon too small: no verb in pool");
  if (embedded.empty())
    throw InfeasibleError(std::string("lexicon too small: no pooled verb licenses a pooled ") +
                          (any_agent ? "patient-noun" : "agent-noun"));

  std::unordered_set<std::string> seen;
  std::vector<Stimulus> out;
  const std::size_t max_attempts = 200 * n + 1000;
  for (std::size_t attempt = 0; out.size() < n && attempt < max_attempts; ++attempt) {
    Filler f;
    f.verb = rng.pick(embedded);
    const auto& ve = lex.at(f.verb);
    f.agent = rng.pick(intersect(ve.agents, agents));
    f.patient = rng.pick(intersect(ve.patients, patients));
    const std::string& h = head == Role::Agent ? f.agent : f.patient;

    std::vector<std::string> mains;
    for (const auto& v : pool.verbs) {
      if (v == f.verb) continue;
      const auto& e = lex.at(v);
      if (!e.agents.contains(h)) continue;
      for (const auto& o : intersect(e.patients, agents))
        if (o != f.agent) { mains.push_back(v); break; }
    }
    if (mains.empty()) continue;
    f.main_verb = rng.pick(mains);
    std::vector<std::string> objects;
    for (const auto& o : intersect(lex.at(f.main_verb).patients, agents))
      if (o != f.agent) objects.push_back(o);
    f.object = rng.pick(objects);
    for (auto* m : {&f.patient_mod, &f.agent_mod, &f.object_mod})
      if (!pool.modifiers.empty() && rng.bernoulli(p_mod)) *m = rng.pick(pool.modifiers);

    auto s = realize(frame, f, lex);
    if (seen.insert(s.text()).second) out.push_back(std::move(s));
  }
  if (out.size() < n) {
    // Name the smallest class of the pool: it bounds the number of distinct sentences.
    std::string_view cls = pos_name(Pos::Verb);
    std::size_t least = pool.verbs.size();
    if (pool.agents.size() < least) least = pool.agents.size(), cls = pos_name(Pos::AgentNoun);
    if (pool.patients.size() < least) least = pool.patients.size(), cls = pos_name(Pos::PatientNoun);
    throw InfeasibleError("lexicon too small: cannot realize " + std::to_string(n) + " distinct " +
                          std::string(type_name(frame.type)) + " sentences; deficient class: " +
                          std::string(cls));
  }
  return out;
}

}  // namespace detail

/// Generates adaptation and test sets for every sentence type. Content lemmas
/// of each class are split once into an adaptation pool and a disjoint test
/// pool, so adaptation and test sets share no content lemma.
inline StimulusBundle generate(const std::vector<Frame>& frames, const Lexicon& lexicon,
                               const GenerateOptions& opt) {
  for (auto t : kAllTypes) frame_for(frames, t);
  if (opt.p_mod < 0.0 || opt.p_mod > 1.0) throw InvalidArgument("generate: p_mod must lie in [0, 1]");

  detail::Pool adapt_pool, test_pool;
  Rng part_rng(derive_seed(opt.seed, 0x9001ULL));
  auto partition = [&](Pos pos, std::vector<std::string> detail::Pool::*member) {
    auto all = lexicon.lemmas(pos);
    if (pos != Pos::Modifier && all.size() < 2)
      throw InfeasibleError("lexicon too small: need at least 2 of class " +
                            std::string(pos_name(pos)) + " to separate adaptation and test items");
    part_rng.shuffle(all);
    const std::size_t half = (all.size() + 1) / 2;
    adapt_pool.*member = {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(half)};
    test_pool.*member = {all.begin() + static_cast<std::ptrdiff_t>(half), all.end()};
    std::sort((adapt_pool.*member).begin(), (adapt_pool.*member).end());
    std::sort((test_pool.*member).begin(), (test_pool.*member).end());
  };
  partition(Pos::AgentNoun, &detail::Pool::agents);
  partition(Pos::PatientNoun, &detail::Pool::patients);
  partition(Pos::Verb, &detail::Pool::verbs);
  partition(Pos::Modifier, &detail::Pool::modifiers);

  StimulusBundle b;
  b.seed = opt.seed;
  for (auto t : kAllTypes) {
    const auto& frame = frame_for(frames, t);
    Rng ra(derive_seed(opt.seed, index_of(t), 1));
    Rng rt(derive_seed(opt.seed, index_of(t), 2));
    b.adaptation[index_of(t)] = detail::sample_set(frame, lexicon, adapt_pool, opt.n_adapt, opt.p_mod, ra);
    b.test[index_of(t)] = detail::sample_set(frame, lexicon, test_pool, opt.n_test, opt.p_mod, rt);
    const double j = jaccard(content_lemmas(b.adaptation[index_of(t)]), content_lemmas(b.test[index_of(t)]));
    if (j > opt.overlap_max)
      throw InfeasibleError("lexical overlap " + format_double(j) + " exceeds overlap_max for " +
                            std::string(type_name(t)));
  }
  return b;
}

/// Uniformly permutes the tokens of a sentence. A final terminal punctuation
/// token stays in place.
inline Stimulus scramble(const Stimulus& s, Rng& rng) {
  Stimulus out = s;
  std::size_t n = out.tokens.size();
  if (n > 0 && is_sentence_terminal(out.tokens.back())) --n;
  rng.shuffle(std::span<std::string>(out.tokens.data(), n));
  return out;
}

// ---------------------------------------------------------------------------
// Stimulus files: "<name>.txt" holds one sentence per line and
// "<name>.meta.tsv" the sidecar "line<TAB>sentence_type<TAB>gap_index" rows
// (1-based line numbers, header row first).

inline std::pair<std::string, std::string> format_stimulus_file(const std::array<std::vector<Stimulus>, kNumTypes>& sets) {
  std::string text, meta = "line\tsentence_type\tgap_index\n";
  std::size_t line = 0;
  for (const auto& set : sets)
    for (const auto& s : set) {
      text += s.text() + '\n';
      meta += std::to_string(++line) + '\t' + std::string(type_name(s.type)) + '\t' +
              std::to_string(s.gap_index) + '\n';
    }
  return {text, meta};
}

/// Reads a stimulus file pair. With a lexicon and frames, each sentence is
/// re-parsed against its frame to recover content lemmas.
inline std::array<std::vector<Stimulus>, kNumTypes> parse_stimulus_file(
    std::string_view text, std::string_view meta, const Lexicon* lexicon = nullptr,
    const std::vector<Frame>* frames = nullptr) {
  std::array<std::vector<Stimulus>, kNumTypes> sets;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  auto rows = split(meta, '\n');
  if (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty() || rows.front() != "line\tsentence_type\tgap_index")
    throw ParseError("stimulus metadata: missing header row");
  if (rows.size() - 1 != lines.size())
    throw ParseError("stimulus metadata: " + std::to_string(rows.size() - 1) + " rows for " +
                     std::to_string(lines.size()) + " sentences");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto cols = split(rows[i], '\t');
    if (cols.size() != 3) throw ParseError("stimulus metadata: expected 3 columns");
    if (parse_number<std::size_t>(cols[0], "line") != i)
      throw ParseError("stimulus metadata: line numbers must be consecutive");
    Stimulus s;
    s.type = parse_type(cols[1]);
    s.gap_index = parse_number<int>(cols[2], "gap_index");
    for (auto w : split(lines[i - 1], ' '))
      if (!w.empty()) s.tokens.emplace_back(w);
    if (lexicon && frames) {
      auto f = match_frame(s.tokens, frame_for(*frames, s.type), *lexicon);
      if (!f) throw ParseError("stimulus line " + std::to_string(i) + " does not realize its frame");
      s.content_lemmas = realize(frame_for(*frames, s.type), *f, *lexicon).content_lemmas;
    }
    sets[index_of(s.type)].push_back(std::move(s));
  }
  return sets;
}

inline void save_bundle(const StimulusBundle& b, const std::filesystem::path& dir) {
  auto [at, am] = format_stimulus_file(b.adaptation);
  auto [tt, tm] = format_stimulus_file(b.test);
  write_file_atomic(dir / "adaptation.txt", at);
  write_file_atomic(dir / "adaptation.meta.tsv", am);
  write_file_atomic(dir / "test.txt", tt);
  write_file_atomic(dir / "test.meta.tsv", tm);
}

inline StimulusBundle load_bundle(const std::filesystem::path& dir, const Lexicon* lexicon = nullptr,
                                  const std::vector<Frame>* frames = nullptr) {
  StimulusBundle b;
  b.adaptation = parse_stimulus_file(read_file(dir / "adaptation.txt"),
                                     read_file(dir / "adaptation.meta.tsv"), lexicon, frames);
  b.test = parse_stimulus_file(read_file(dir / "test.txt"), read_file(dir / "test.meta.tsv"),
                               lexicon, frames);
  return b;
}

/// Lemma surfaces (nouns, modifiers and verb past forms) that a vocabulary lacks.
inline std::vector<std::string> missing_from_vocab(const Lexicon& lex, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& e : lex.entries()) {
    const auto& surface = e.pos == Pos::Verb ? e.past : e.lemma;
    if (!vocab.contains(surface)) out.push_back(surface);
  }
  return out;
}

}  // namespace primeprobe
