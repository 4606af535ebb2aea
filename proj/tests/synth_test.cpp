#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "acosqe/corpus.hpp"
#include "acosqe/synth.hpp"

using namespace acosqe;

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig cfg;
  cfg.train_sentences = 40;
  cfg.test_sentences = 10;
  SynthCorpus a = make_synthetic_corpus(cfg);
  SynthCorpus b = make_synthetic_corpus(cfg);
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].first.text == b.train[i].first.text);
    CHECK(a.train[i].second == b.train[i].second);
  }
  SynthConfig other = cfg;
  other.seed = 7;
  SynthCorpus c = make_synthetic_corpus(other);
  bool differs = false;
  for (size_t i = 0; i < a.train.size() && !differs; ++i)
    differs = a.train[i].first.text != c.train[i].first.text;
  CHECK(differs);
}

TEST_CASE("every label round trips through the json codec") {
  SynthConfig cfg;
  cfg.train_sentences = 60;
  cfg.test_sentences = 20;
  SynthCorpus sc = make_synthetic_corpus(cfg);
  CorpusConfig pc;
  std::ostringstream all;
  for (const auto& ex : sc.train) all << example_to_json(ex) << "\n";
  auto back = parse_dataset_text(all.str(), pc);
  REQUIRE(back.size() == sc.train.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].first.tokens == sc.train[i].first.tokens);
    CHECK(back[i].second == sc.train[i].second);
  }
}

TEST_CASE("spans point at real tokens and categories stay in the inventory") {
  SynthConfig cfg;
  cfg.train_sentences = 120;
  cfg.test_sentences = 30;
  SynthCorpus sc = make_synthetic_corpus(cfg);
  const auto cat_list = default_categories();
  std::set<std::string> cats(cat_list.begin(), cat_list.end());
  for (const auto& split : {sc.train, sc.test})
    for (const auto& [sent, quads] : split) {
      int n = static_cast<int>(sent.tokens.size());
      REQUIRE(!quads.empty());
      REQUIRE(static_cast<int>(quads.size()) <= 3);
      for (const auto& q : quads) {
        CHECK(cats.count(q.category) == 1);
        CHECK(q.opinion.start >= 0);
        CHECK(q.opinion.end < n);
        if (q.aspect) {
          CHECK(q.aspect->start >= 0);
          CHECK(q.aspect->end < n);
        }
      }
    }
}

TEST_CASE("split sizes and the implicit share follow the config") {
  SynthConfig cfg;
  cfg.train_sentences = 200;
  cfg.test_sentences = 50;
  SynthCorpus sc = make_synthetic_corpus(cfg);
  CHECK(sc.train.size() == 200);
  CHECK(sc.test.size() == 50);
  CorpusStats st = corpus_stats(sc.train);
  // implicit sentences carry exactly one implicit quad each
  CHECK(st.implicit_aspects == std::lround(cfg.implicit_fraction * 200));
  // all three polarities and every category occur at this size
  for (auto c : st.per_polarity) CHECK(c > 0);
  CHECK(st.per_category.size() == default_categories().size());
}

TEST_CASE("ledger json mirrors the generated corpus") {
  SynthConfig cfg;
  cfg.train_sentences = 50;
  cfg.test_sentences = 10;
  SynthCorpus sc = make_synthetic_corpus(cfg);
  CorpusStats st = corpus_stats(sc.train);
  CHECK(sc.ledger_json.find("\"train\"") != std::string::npos);
  CHECK(sc.ledger_json.find(std::to_string(st.quads)) != std::string::npos);

  SUBCASE("written corpus parses back from disk") {
    auto dir = std::filesystem::temp_directory_path() / "acosqe_synth_out";
    write_synthetic_corpus(dir.string(), cfg);
    CorpusConfig pc;
    auto train = parse_dataset((dir / "train.jsonl").string(), pc);
    auto test = parse_dataset((dir / "test.jsonl").string(), pc);
    REQUIRE(train.size() == sc.train.size());
    CHECK(test.size() == sc.test.size());
    // same seed, same sentences
    for (size_t i = 0; i < train.size(); ++i)
      CHECK(train[i].first.text == sc.train[i].first.text);
    CHECK(std::filesystem::exists(dir / "ledger.json"));
    std::filesystem::remove_all(dir);
  }
}
