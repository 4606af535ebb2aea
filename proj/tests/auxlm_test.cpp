#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "acosqe/auxlm.hpp"
#include "acosqe/corpus.hpp"
#include "acosqe/errors.hpp"
#include "acosqe/gradcheck.hpp"
#include "acosqe/param_store.hpp"
#include "acosqe/rng.hpp"

using namespace acosqe;

namespace {

Example make_example(const std::string& text, std::vector<Quadruple> quads) {
  return {tokenize(text, TokenizeMode::kWhitespace), std::move(quads)};
}

}  // namespace

TEST_CASE("vocab assigns stable ids and round trips text") {
  Vocab v = Vocab::build({"abba", "cab"});
  // distinct codepoints a,b,c -> ids 3,4,5 in sorted order
  CHECK(v.size() == 6);
  CHECK(v.id('a') == 3);
  CHECK(v.id('c') == 5);
  CHECK(v.id('z') == Vocab::kUnk);
  auto ids = v.encode("cab");
  CHECK(ids == std::vector<int>{5, 3, 4});
  CHECK(v.decode(ids) == "cab");
  // specials are skipped on decode
  ids.push_back(Vocab::kEos);
  CHECK(v.decode(ids) == "cab");

  SUBCASE("pack survives a round trip") {
    Vocab w = Vocab::unpack(v.pack());
    CHECK(w.size() == v.size());
    CHECK(w.encode("abc") == v.encode("abc"));
  }
  SUBCASE("multibyte codepoints") {
    Vocab m = Vocab::build({"山水"});
    CHECK(m.size() == 5);
    CHECK(m.decode(m.encode("水山")) == "水山");
  }
}

TEST_CASE("prompt template wraps the input text") {
  CHECK(format_prompt("nice view") ==
        "Instruction: {extract aspects and sentiment terms from the following "
        "text and classify sentiment polarity and evaluation category}, "
        "input:{nice view}, output:");
  CHECK_THROWS_AS(format_prompt(""), EmptyTextError);
}

TEST_CASE("hint grammar parses well-formed lines and rejects junk") {
  SUBCASE("full quadruple lines") {
    auto p = parse_hints("as=view | ot=great | ac=scenery | sp=positive\n"
                         "as=None | ot=pricey | ac=price | sp=negative");
    REQUIRE(p.has_value());
    REQUIRE(p->size() == 2);
    CHECK((*p)[0].aspect == "view");
    CHECK((*p)[0].opinion == "great");
    CHECK((*p)[0].category == "scenery");
    CHECK((*p)[0].polarity == "positive");
    CHECK((*p)[1].aspect == "None");
  }
  SUBCASE("prefix levels leave later fields empty") {
    auto p = parse_hints("as=view");
    REQUIRE(p.has_value());
    CHECK(!(*p)[0].opinion.has_value());
    auto q = parse_hints("as=view | ot=great");
    REQUIRE(q.has_value());
    CHECK((*q)[0].opinion == "great");
    CHECK(!(*q)[0].category.has_value());
  }
  SUBCASE("bad lines fail the whole parse") {
    CHECK(!parse_hints("ot=great | as=view").has_value());  // wrong order
    CHECK(!parse_hints("as=view | junk").has_value());
    CHECK(!parse_hints("free text with no grammar").has_value());
  }
  SUBCASE("empty text parses to no hints") {
    auto p = parse_hints("");
    REQUIRE(p.has_value());
    CHECK(p->empty());
  }
}

TEST_CASE("gold hints serialize span surfaces at every level") {
  Example ex = make_example(
      "the view is great",
      {{"scenery", Span{1, 1}, Span{3, 3}, Polarity::kPositive}});
  CHECK(serialize_hints(ex, HintLevel::kFull) ==
        "as=view | ot=great | ac=scenery | sp=positive");
  CHECK(serialize_hints(ex, HintLevel::kAspect) == "as=view");
  CHECK(serialize_hints(ex, HintLevel::kAspectOpinion) == "as=view | ot=great");
  CHECK(serialize_hints(ex, HintLevel::kAspectOpinionCategory) ==
        "as=view | ot=great | ac=scenery");

  SUBCASE("implicit aspect serializes as None") {
    Example imp = make_example(
        "it was pricey", {{"price", std::nullopt, Span{2, 2}, Polarity::kNegative}});
    CHECK(serialize_hints(imp, HintLevel::kFull) ==
          "as=None | ot=pricey | ac=price | sp=negative");
  }
  SUBCASE("serialized hints parse back") {
    auto p = parse_hints(serialize_hints(ex, HintLevel::kFull));
    REQUIRE(p.has_value());
    CHECK((*p)[0].aspect == "view");
  }
}

TEST_CASE("augment input separates text from hints") {
  CHECK(augment_input("a b", "as=a", " \xE2\x8A\xA2 ") == "a b ⊢ as=a");
  CHECK(augment_input("a b", "", " \xE2\x8A\xA2 ") == "a b");
}

TEST_CASE("preference margins and the reward loss fixtures") {
  CHECK(margin_for_preference(0) == 0.0);
  CHECK(margin_for_preference(1) == 0.5);
  CHECK(margin_for_preference(2) == 1.0);
  // equal rewards, no margin: -log sigmoid(0) = log 2
  CHECK(reward_loss(1.0, 1.0, 0.0) == doctest::Approx(0.693147).epsilon(1e-6));
  // gap 1 with margin 0: softplus(-1) = 0.313262
  CHECK(reward_loss(2.0, 1.0, 0.0) == doctest::Approx(0.313262).epsilon(1e-6));
  // margin shifts the argument
  CHECK(reward_loss(2.0, 1.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  // extreme values stay finite
  CHECK(std::isfinite(reward_loss(-500.0, 500.0, 1.0)));

  SUBCASE("tensor flavour matches and is differentiable") {
    ParamStore store;
    Rng rng(2);
    store.create_uniform("rc", {1}, rng, 1.0);
    store.create_uniform("rr", {1}, rng, 1.0);
    ParamLeaves leaves(store);
    double want = reward_loss(leaves.get("rc").data()[0],
                              leaves.get("rr").data()[0], 0.5);
    CHECK(reward_loss(leaves.get("rc"), leaves.get("rr"), 0.5).item() ==
          doctest::Approx(want).epsilon(1e-10));
    double err = check_gradients(
        [](ParamLeaves& l) {
          return reward_loss(l.get("rc"), l.get("rr"), 0.5);
        },
        store);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("lm forward shapes and guards") {
  LmConfig cfg;
  cfg.layers = 1;
  cfg.dim = 8;
  cfg.ffn = 16;
  cfg.context = 32;
  ParamStore store;
  Rng rng(6);
  init_lm_params(store, cfg, 11, rng);
  ParamLeaves leaves(store);
  Tensor logits = lm_forward({3, 4, 5}, leaves, cfg);
  CHECK(logits.rows() == 3);
  CHECK(logits.cols() == 11);

  SUBCASE("odd model width is rejected at init") {
    ParamStore s2;
    LmConfig bad = cfg;
    bad.dim = 7;
    CHECK_THROWS_AS(init_lm_params(s2, bad, 11, rng), OddDimensionError);
  }
  SUBCASE("prunable layer list covers matmul weights only") {
    auto names = lm_prunable_layers(cfg);
    CHECK(names.size() == 8);  // 7 per block + head
    for (const auto& n : names) {
      CHECK(store.shape(n).size() == 2);
      CHECK(n.find("gain") == std::string::npos);
      CHECK(n.find("embed") == std::string::npos);
    }
  }
}

TEST_CASE("tiny training run drives the masked loss down") {
  std::vector<Example> data;
  for (int i = 0; i < 8; ++i) {
    data.push_back(make_example(
        "the view is great",
        {{"scenery", Span{1, 1}, Span{3, 3}, Polarity::kPositive}}));
    data.push_back(make_example(
        "the staff was rude",
        {{"service", Span{1, 1}, Span{3, 3}, Polarity::kNegative}}));
  }
  AuxConfig cfg;
  cfg.layers = 1;
  cfg.dim = 8;
  cfg.ffn = 16;
  cfg.context = 256;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 2e-3;
  cfg.seed = 9;
  AuxTrainReport report;
  AuxModel model = train_aux(data, cfg, &report);
  REQUIRE(report.epoch_loss.size() == 3);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());

  SUBCASE("training is deterministic in the seed") {
    AuxTrainReport r2;
    AuxModel m2 = train_aux(data, cfg, &r2);
    CHECK(r2.epoch_loss == report.epoch_loss);
    for (const auto& name : model.store.names())
      CHECK(model.store.values(name) == m2.store.values(name));
  }
  SUBCASE("empty corpus is refused") {
    CHECK_THROWS_AS(train_aux({}, cfg), EmptyCorpusError);
  }
  SUBCASE("held-out cross entropy is finite") {
    double ce = aux_eval_ce(model, data, HintLevel::kFull);
    CHECK(std::isfinite(ce));
    CHECK(ce > 0.0);
  }
  SUBCASE("checkpoints restore the model bit for bit") {
    std::string path = (std::filesystem::temp_directory_path() /
                        "acosqe_aux_roundtrip.bin").string();
    save_aux_checkpoint(path, model);
    AuxModel back = load_aux_checkpoint(path);
    CHECK(back.cfg.dim == cfg.dim);
    CHECK(back.cfg.layers == cfg.layers);
    CHECK(back.vocab.size() == model.vocab.size());
    REQUIRE(back.store.names() == model.store.names());
    for (const auto& name : model.store.names())
      CHECK(back.store.values(name) == model.store.values(name));
    Hints a = generate_hints(model, "the view is great", 40, 1.0);
    Hints b = generate_hints(back, "the view is great", 40, 1.0);
    CHECK(a.text == b.text);
    std::filesystem::remove(path);
  }
}

TEST_CASE("incremental decoding matches the full forward pass") {
  // generate_hints walks a per-position cache; every step must produce the
  // same logits as rerunning lm_forward over the whole prefix
  LmConfig cfg;
  cfg.layers = 2;
  cfg.dim = 8;
  cfg.ffn = 12;
  cfg.context = 256;  // prompt template alone runs ~160 codepoints
  ParamStore store;
  Rng rng(13);
  init_lm_params(store, cfg, 9, rng);
  AuxModel model;
  model.store = store;
  model.vocab = Vocab::build({"abcdef"});
  model.cfg = cfg;

  // drive the public greedy path and reproduce it with lm_forward
  Hints h = generate_hints(model, "fed", 6, 1.0);
  std::vector<int> seq = model.vocab.encode(format_prompt("fed"));
  std::string replay;
  for (int step = 0; step < 6; ++step) {
    ParamLeaves leaves(model.store);
    Tensor logits = lm_forward(seq, leaves, cfg);
    const double* row = logits.data() + (logits.rows() - 1) * logits.cols();
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (row[j] > row[best]) best = j;
    if (best == Vocab::kEos) break;
    seq.push_back(best);
    replay += model.vocab.decode({best});
  }
  CHECK(h.text == replay);
}

TEST_CASE("generation guards and budget") {
  LmConfig cfg;
  cfg.layers = 1;
  cfg.dim = 8;
  cfg.ffn = 12;
  cfg.context = 180;
  ParamStore store;
  Rng rng(14);
  init_lm_params(store, cfg, 30, rng);
  AuxModel model;
  model.store = store;
  model.vocab = Vocab::build({format_prompt("abc")});
  model.cfg = cfg;

  SUBCASE("zero budget returns empty text") {
    Hints h = generate_hints(model, "abc", 0, 1.0);
    CHECK(h.text.empty());
    REQUIRE(h.parse.has_value());
    CHECK(h.parse->empty());
  }
  SUBCASE("budget caps the emitted length") {
    Hints h = generate_hints(model, "abc", 3, 1.0);
    CHECK(utf8_codepoints(h.text).size() <= 3);
  }
  SUBCASE("prompt overflow is refused") {
    LmConfig tiny = cfg;
    tiny.context = 16;
    AuxModel small;
    small.store = model.store;
    small.vocab = model.vocab;
    small.cfg = tiny;
    CHECK_THROWS_AS(generate_hints(small, "abc", 4, 1.0), ContextOverflowError);
  }
  SUBCASE("repetition penalty below one is rejected") {
    CHECK_THROWS_AS(generate_hints(model, "abc", 4, 0.5), NumericError);
  }
}

TEST_CASE("pruning the lm keeps the layer shapes and hits the target") {
  std::vector<Example> data;
  for (int i = 0; i < 6; ++i)
    data.push_back(make_example(
        "the view is great",
        {{"scenery", Span{1, 1}, Span{3, 3}, Polarity::kPositive}}));
  AuxConfig cfg;
  cfg.layers = 1;
  cfg.dim = 8;
  cfg.ffn = 16;
  cfg.context = 256;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 21;
  AuxModel model = train_aux(data, cfg);
  auto masks = prune_aux(model, data, HintLevel::kFull, 0.5);
  CHECK(masks.size() == lm_prunable_layers(model.cfg).size());
  for (const auto& [name, mask] : masks) {
    CHECK(mask.achieved_sparsity == doctest::Approx(0.5).epsilon(0.05));
    const auto& vals = model.store.values(name);
    int zeros = 0;
    for (size_t i = 0; i < vals.size(); ++i) {
      if (!mask.keep[i]) {
        CHECK(vals[i] == 0.0);
        ++zeros;
      }
    }
    CHECK(zeros > 0);
  }
}
