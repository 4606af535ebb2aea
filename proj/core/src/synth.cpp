#include "acosqe/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <json.hpp>

#include "acosqe/errors.hpp"
#include "acosqe/rng.hpp"

namespace acosqe {

namespace {

using json = nlohmann::ordered_json;

struct AspectEntry {
  const char* word;
  const char* category;
};

// every aspect word belongs to exactly one category
const AspectEntry kAspects[] = {
    {"view", "scenery"},        {"sunset", "scenery"},
    {"garden", "scenery"},      {"waterfall", "scenery"},
    {"staff", "service"},       {"waiter", "service"},
    {"guide", "service"},       {"reception", "service"},
    {"booking", "management"},  {"checkin", "management"},
    {"schedule", "management"}, {"queue", "management"},
    {"air", "environment"},     {"streets", "environment"},
    {"riverbank", "environment"}, {"plaza", "environment"},
    {"price", "price"},         {"fare", "price"},
    {"fee", "price"},           {"rate", "price"},
    {"museum", "attraction"},   {"temple", "attraction"},
    {"castle", "attraction"},   {"monument", "attraction"},
    {"pool", "facility"},       {"wifi", "facility"},
    {"elevator", "facility"},   {"parking", "facility"},
    {"cuisine", "feature"},     {"festival", "feature"},
    {"architecture", "feature"}, {"handicrafts", "feature"},
};

const char* kGenericPositive[] = {"great", "lovely", "superb", "spotless",
                                  "charming"};
const char* kGenericNegative[] = {"awful", "dirty", "noisy", "shabby",
                                  "chaotic"};
const char* kNeutral[] = {"average", "ordinary", "acceptable"};

// pairing-dependent words: sign comes from the category they attach to
struct AmbiguousEntry {
  const char* word;
  std::vector<std::string> positive_with;
  std::vector<std::string> negative_with;
};

const AmbiguousEntry kAmbiguous[] = {
    {"cheap", {"price"}, {"facility", "service", "feature"}},
    {"crowded", {"feature"}, {"attraction", "environment", "facility"}},
};

// implicit sentences carry no aspect span; the opinion word alone names the
// category
struct ImplicitEntry {
  const char* word;
  const char* category;
  Polarity polarity;
};

const ImplicitEntry kImplicit[] = {
    {"breathtaking", "scenery", Polarity::kPositive},
    {"underwhelming", "scenery", Polarity::kNegative},
    {"helpful", "service", Polarity::kPositive},
    {"rude", "service", Polarity::kNegative},
    {"organized", "management", Polarity::kPositive},
    {"disorganized", "management", Polarity::kNegative},
    {"pristine", "environment", Polarity::kPositive},
    {"polluted", "environment", Polarity::kNegative},
    {"affordable", "price", Polarity::kPositive},
    {"overpriced", "price", Polarity::kNegative},
    {"fascinating", "attraction", Polarity::kPositive},
    {"dull", "attraction", Polarity::kNegative},
    {"modern", "facility", Polarity::kPositive},
    {"broken", "facility", Polarity::kNegative},
    {"unique", "feature", Polarity::kPositive},
    {"forgettable", "feature", Polarity::kNegative},
};

Polarity flip(Polarity p) {
  if (p == Polarity::kPositive) return Polarity::kNegative;
  if (p == Polarity::kNegative) return Polarity::kPositive;
  return Polarity::kNeutral;
}

template <size_t N>
const char* pick(Rng& rng, const char* const (&arr)[N]) {
  return arr[rng.uniform_int(0, static_cast<int>(N) - 1)];
}

struct OpinionDraw {
  std::vector<std::string> words;  // 1 word, or {"not", word}
  Polarity polarity;
};

// `want`: -1 any, otherwise the required final polarity (for the second half
// of a contrastive sentence)
OpinionDraw sample_opinion(Rng& rng, const std::string& category, int want,
                           double negation_fraction) {
  // ambiguous words usable with this category, split by achieved sign
  std::vector<const char*> amb_pos, amb_neg;
  for (const auto& a : kAmbiguous) {
    for (const auto& c : a.positive_with)
      if (c == category) amb_pos.push_back(a.word);
    for (const auto& c : a.negative_with)
      if (c == category) amb_neg.push_back(a.word);
  }
  bool negate = rng.uniform() < negation_fraction;
  int target;
  if (want >= 0) {
    target = want;
    if (target == static_cast<int>(Polarity::kNeutral)) negate = false;
  } else {
    double r = rng.uniform();
    target = r < 0.40 ? 0 : (r < 0.80 ? 1 : 2);  // pos / neg / neutral
    if (target == 2) negate = false;
  }
  // the written word carries the opposite sign when "not" is in front
  int base = negate ? (target == 0 ? 1 : 0) : target;
  const char* word;
  if (base == 2) {
    word = pick(rng, kNeutral);
  } else {
    auto& amb = base == 0 ? amb_pos : amb_neg;
    if (!amb.empty() && rng.uniform() < 0.30)
      word = amb[rng.uniform_int(0, static_cast<int>(amb.size()) - 1)];
    else
      word = base == 0 ? pick(rng, kGenericPositive) : pick(rng, kGenericNegative);
  }
  OpinionDraw out;
  if (negate) out.words.push_back("not");
  out.words.emplace_back(word);
  out.polarity = static_cast<Polarity>(target);
  return out;
}

struct Builder {
  std::vector<std::string> tokens;
  std::vector<Quadruple> quads;

  int add(const std::string& w) {
    tokens.push_back(w);
    return static_cast<int>(tokens.size()) - 1;
  }

  // "the <aspect> is|was <opinion...>"
  void explicit_clause(Rng& rng, double negation_fraction, int want = -1) {
    const AspectEntry& asp =
        kAspects[rng.uniform_int(0, static_cast<int>(std::size(kAspects)) - 1)];
    OpinionDraw op = sample_opinion(rng, asp.category, want, negation_fraction);
    add("the");
    int a = add(asp.word);
    add(rng.uniform() < 0.5 ? "is" : "was");
    int o0 = -1, o1 = -1;
    for (const auto& w : op.words) {
      int i = add(w);
      if (o0 < 0) o0 = i;
      o1 = i;
    }
    Quadruple q;
    q.category = asp.category;
    q.aspect = Span{a, a};
    q.opinion = Span{o0, o1};
    q.polarity = op.polarity;
    quads.push_back(q);
  }

  void implicit_clause(Rng& rng, double negation_fraction) {
    const ImplicitEntry& imp =
        kImplicit[rng.uniform_int(0, static_cast<int>(std::size(kImplicit)) - 1)];
    bool negate = rng.uniform() < negation_fraction;
    add("it");
    add(rng.uniform() < 0.5 ? "is" : "was");
    int o0 = -1, o1 = -1;
    if (negate) o0 = add("not");
    int i = add(imp.word);
    if (o0 < 0) o0 = i;
    o1 = i;
    Quadruple q;
    q.category = imp.category;
    q.aspect = std::nullopt;
    q.opinion = Span{o0, o1};
    q.polarity = negate ? flip(imp.polarity) : imp.polarity;
    quads.push_back(q);
  }
};

enum class SentenceKind { kSingle, kImplicit, kTwoPair, kThreePair };

Example make_sentence(Rng& rng, SentenceKind kind, double negation_fraction) {
  Builder b;
  switch (kind) {
    case SentenceKind::kSingle:
      if (rng.uniform() < 0.2) b.add(rng.uniform() < 0.5 ? "overall" : "honestly");
      b.explicit_clause(rng, negation_fraction);
      break;
    case SentenceKind::kImplicit:
      b.implicit_clause(rng, negation_fraction);
      break;
    case SentenceKind::kTwoPair: {
      b.explicit_clause(rng, negation_fraction);
      bool contrast = rng.uniform() < 0.6;
      b.add(contrast ? "but" : "and");
      int want = -1;
      if (contrast) {
        Polarity first = b.quads.back().polarity;
        want = static_cast<int>(first == Polarity::kNeutral
                                    ? (rng.uniform() < 0.5 ? Polarity::kPositive
                                                           : Polarity::kNegative)
                                    : flip(first));
      }
      b.explicit_clause(rng, negation_fraction, want);
      break;
    }
    case SentenceKind::kThreePair:
      b.explicit_clause(rng, negation_fraction);
      b.add(",");
      b.explicit_clause(rng, negation_fraction);
      b.add("and");
      b.explicit_clause(rng, negation_fraction);
      break;
  }
  std::string text;
  for (size_t i = 0; i < b.tokens.size(); ++i) {
    if (i) text += ' ';
    text += b.tokens[i];
  }
  Sentence s = tokenize(text, TokenizeMode::kWhitespace);
  return {std::move(s), std::move(b.quads)};
}

std::vector<Example> make_split(Rng& rng, int n, const SynthConfig& cfg) {
  auto count = [&](double f) {
    return static_cast<int>(std::lround(f * n));
  };
  int n_implicit = count(cfg.implicit_fraction);
  int n_two = count(cfg.two_pair_fraction);
  int n_three = count(cfg.three_pair_fraction);
  if (n_implicit + n_two + n_three > n)
    throw DataError("synthetic corpus: sentence-kind fractions exceed 1");
  std::vector<SentenceKind> kinds;
  kinds.reserve(n);
  for (int i = 0; i < n_implicit; ++i) kinds.push_back(SentenceKind::kImplicit);
  for (int i = 0; i < n_two; ++i) kinds.push_back(SentenceKind::kTwoPair);
  for (int i = 0; i < n_three; ++i) kinds.push_back(SentenceKind::kThreePair);
  while (static_cast<int>(kinds.size()) < n) kinds.push_back(SentenceKind::kSingle);
  for (size_t i = kinds.size(); i > 1; --i)
    std::swap(kinds[i - 1], kinds[rng.uniform_int(0, static_cast<int>(i) - 1)]);
  std::vector<Example> out;
  out.reserve(n);
  for (SentenceKind k : kinds)
    out.push_back(make_sentence(rng, k, cfg.negation_fraction));
  return out;
}

json stats_json(const std::vector<Example>& data) {
  CorpusStats st = corpus_stats(data);
  json per_cat = json::object();
  for (const auto& [cat, cnt] : st.per_category) per_cat[cat] = cnt;
  return json{{"sentences", st.sentences},
              {"tokens", st.tokens},
              {"quads", st.quads},
              {"implicit_aspects", st.implicit_aspects},
              {"per_category", per_cat},
              {"per_polarity",
               {{"positive", st.per_polarity[0]},
                {"negative", st.per_polarity[1]},
                {"neutral", st.per_polarity[2]}}}};
}

}  // namespace

SynthCorpus make_synthetic_corpus(const SynthConfig& cfg) {
  if (cfg.train_sentences < 1 || cfg.test_sentences < 0)
    throw DataError("synthetic corpus: needs >= 1 training sentence");
  Rng rng(cfg.seed);
  SynthCorpus out;
  out.train = make_split(rng, cfg.train_sentences, cfg);
  out.test = make_split(rng, cfg.test_sentences, cfg);
  json ledger{{"seed", cfg.seed},
              {"train", stats_json(out.train)},
              {"test", stats_json(out.test)}};
  out.ledger_json = ledger.dump(2) + "\n";
  return out;
}

void write_synthetic_corpus(const std::string& out_dir, const SynthConfig& cfg) {
  SynthCorpus corpus = make_synthetic_corpus(cfg);
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  write_dataset((dir / "train.jsonl").string(), corpus.train);
  write_dataset((dir / "test.jsonl").string(), corpus.test);
  std::ofstream ledger(dir / "ledger.json", std::ios::binary);
  if (!ledger) throw DataError("cannot write " + (dir / "ledger.json").string());
  ledger << corpus.ledger_json;
}

}  // namespace acosqe
